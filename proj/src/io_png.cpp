#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

#include <png.h>

#include "ctsplat/io.hpp"

namespace ctsplat {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

constexpr double kPngMax = 65535.0;

}  // namespace

void write_image(const ProjectionImage& img, const std::filesystem::path& path) {
    if (img.width < 1 || img.height < 1) {
        throw std::invalid_argument("write_image: empty image");
    }
    for (double v : img.pixels) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw std::invalid_argument("write_image: pixels must be finite and in [0, 1]");
        }
    }

    // Rows are prepared up front (big-endian 16-bit as PNG requires) so no
    // C++ object is created inside the setjmp region below.
    std::vector<std::vector<png_byte>> rows(img.height,
                                            std::vector<png_byte>(img.width * 2));
    std::vector<png_bytep> row_ptrs(img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto v = static_cast<unsigned>(std::lround(img.at(x, y) * kPngMax));
            rows[y][2 * x] = static_cast<png_byte>(v >> 8);
            rows[y][2 * x + 1] = static_cast<png_byte>(v & 0xff);
        }
        row_ptrs[y] = rows[y].data();
    }

    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw std::runtime_error("cannot open for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("PNG encoding failed: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
    // Fixed filter and compression settings keep the encoded bytes
    // reproducible across runs.
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ProjectionImage read_image(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw std::runtime_error("cannot open image: " + path.string());

    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw std::runtime_error("not a PNG file: " + path.string());
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }

    std::vector<std::vector<png_byte>> rows;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("PNG decoding failed: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported PNG (need 16-bit grayscale): " + path.string());
    }

    rows.assign(height, std::vector<png_byte>(width * 2));
    row_ptrs.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = rows[y].data();
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ProjectionImage img(static_cast<int>(width), static_cast<int>(height));
    for (png_uint_32 y = 0; y < height; ++y) {
        for (png_uint_32 x = 0; x < width; ++x) {
            const unsigned v = (static_cast<unsigned>(rows[y][2 * x]) << 8) | rows[y][2 * x + 1];
            img.at(static_cast<int>(x), static_cast<int>(y)) = v / kPngMax;
        }
    }
    return img;
}

namespace {
constexpr char kRawMagic[8] = {'C', 'T', 'S', 'R', 'A', 'W', '0', '1'};
}

void write_image_raw(const ProjectionImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(kRawMagic, sizeof kRawMagic);
    const std::int32_t dims[2] = {img.width, img.height};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ProjectionImage read_image_raw(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image: " + path.string());
    char magic[8];
    std::int32_t dims[2];
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    if (!in || std::memcmp(magic, kRawMagic, sizeof magic) != 0 || dims[0] < 1 || dims[1] < 1) {
        throw std::runtime_error("not a raw image file: " + path.string());
    }
    ProjectionImage img(dims[0], dims[1]);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated raw image file: " + path.string());
    return img;
}

}  // namespace ctsplat
