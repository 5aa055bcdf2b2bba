#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ctsplat/io.hpp"

namespace ctsplat {

namespace {

static_assert(std::endian::native == std::endian::little,
              "cloud PLY I/O assumes a little-endian host");

constexpr int kFloatsPerVertex = 12;
constexpr const char* kVersionComment = "comment ctsplat_gaussian_cloud 1";
constexpr const char* kPropertyNames[kFloatsPerVertex] = {
    "x", "y", "z", "log_scale_0", "log_scale_1", "log_scale_2",
    "rot_w", "rot_x", "rot_y", "rot_z", "opacity_logit", "intensity",
};

// DC spherical-harmonic basis constant of the splat-viewer convention.
constexpr double kShC0 = 0.28209479177387814;

std::string native_header(const GaussianCloud& cloud) {
    char extent[64];
    std::snprintf(extent, sizeof extent, "%.17g", cloud.scene_extent);
    std::string h = "ply\nformat binary_little_endian 1.0\n";
    h += kVersionComment;
    h += "\ncomment scene_extent ";
    h += extent;
    h += "\nelement vertex " + std::to_string(cloud.size()) + "\n";
    for (const char* name : kPropertyNames) {
        h += std::string("property float ") + name + "\n";
    }
    h += "end_header\n";
    return h;
}

void write_file(const std::filesystem::path& path, const std::string& header,
                const std::vector<float>& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(body.data()),
              static_cast<std::streamsize>(body.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t offset,
                              const std::string& what) {
    throw std::runtime_error("malformed cloud PLY " + path.string() + " (byte " +
                             std::to_string(offset) + "): " + what);
}

}  // namespace

std::uint64_t write_cloud_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
    const std::string header = native_header(cloud);
    std::vector<float> body;
    body.reserve(cloud.size() * kFloatsPerVertex);
    for (const Gaussian& g : cloud.gaussians) {
        for (int k = 0; k < 3; ++k) body.push_back(static_cast<float>(g.position[k]));
        for (int k = 0; k < 3; ++k) body.push_back(static_cast<float>(g.log_scale[k]));
        for (int k = 0; k < 4; ++k) body.push_back(static_cast<float>(g.rotation[k]));
        body.push_back(static_cast<float>(g.opacity_logit));
        body.push_back(static_cast<float>(g.intensity));
    }
    write_file(path, header, body);
    return header.size() + body.size() * sizeof(float);
}

GaussianCloud read_cloud_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open cloud PLY: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string data = buffer.str();

    // Header scan. `cursor` tracks the byte offset of the line being parsed
    // so every error can name a position.
    std::size_t cursor = 0;
    bool saw_format = false, saw_version = false, saw_end = false;
    bool saw_extent = false;
    double scene_extent = 1.0;
    std::size_t vertex_count = 0;
    bool saw_vertex = false;
    int properties_seen = 0;

    while (cursor < data.size()) {
        const std::size_t eol = data.find('\n', cursor);
        if (eol == std::string::npos) parse_error(path, cursor, "unterminated header line");
        const std::string line = data.substr(cursor, eol - cursor);
        const std::size_t line_start = cursor;
        cursor = eol + 1;

        if (line_start == 0) {
            if (line != "ply") parse_error(path, 0, "missing ply magic");
            continue;
        }
        if (line == "end_header") {
            saw_end = true;
            break;
        }
        if (line.rfind("format ", 0) == 0) {
            if (line != "format binary_little_endian 1.0") {
                parse_error(path, line_start, "unsupported format: " + line);
            }
            saw_format = true;
        } else if (line.rfind("comment ctsplat_gaussian_cloud", 0) == 0) {
            if (line != kVersionComment) {
                parse_error(path, line_start, "unknown cloud format version: " + line);
            }
            saw_version = true;
        } else if (line.rfind("comment scene_extent ", 0) == 0) {
            char* end = nullptr;
            scene_extent = std::strtod(line.c_str() + 21, &end);
            if (end == line.c_str() + 21 || !std::isfinite(scene_extent)) {
                parse_error(path, line_start, "bad scene_extent value");
            }
            saw_extent = true;
        } else if (line.rfind("comment", 0) == 0) {
            continue;
        } else if (line.rfind("element vertex ", 0) == 0) {
            vertex_count = std::stoull(line.substr(15));
            saw_vertex = true;
        } else if (line.rfind("element ", 0) == 0) {
            parse_error(path, line_start, "unexpected element: " + line);
        } else if (line.rfind("property ", 0) == 0) {
            if (properties_seen >= kFloatsPerVertex ||
                line != std::string("property float ") + kPropertyNames[properties_seen]) {
                parse_error(path, line_start, "unexpected property: " + line);
            }
            ++properties_seen;
        } else {
            parse_error(path, line_start, "unrecognized header line: " + line);
        }
    }

    if (!saw_end) parse_error(path, data.size(), "missing end_header");
    if (!saw_format) parse_error(path, cursor, "missing format line");
    if (!saw_version) parse_error(path, cursor, "missing ctsplat_gaussian_cloud version comment");
    if (!saw_extent) parse_error(path, cursor, "missing scene_extent comment");
    if (!saw_vertex) parse_error(path, cursor, "missing element vertex line");
    if (properties_seen != kFloatsPerVertex) {
        parse_error(path, cursor, "expected 12 float properties, found " +
                                      std::to_string(properties_seen));
    }

    const std::size_t body_start = cursor;
    const std::size_t expected = vertex_count * kFloatsPerVertex * sizeof(float);
    const std::size_t actual = data.size() - body_start;
    if (actual < expected) {
        parse_error(path, data.size(),
                    "truncated body: expected " + std::to_string(expected) + " bytes, found " +
                        std::to_string(actual));
    }
    if (actual > expected) {
        parse_error(path, body_start + expected, "trailing data after vertex body");
    }

    GaussianCloud cloud;
    cloud.scene_extent = scene_extent;
    cloud.gaussians.resize(vertex_count);
    const char* p = data.data() + body_start;
    for (std::size_t i = 0; i < vertex_count; ++i) {
        float v[kFloatsPerVertex];
        std::memcpy(v, p + i * sizeof v, sizeof v);
        Gaussian& g = cloud.gaussians[i];
        g.position = Eigen::Vector3d(v[0], v[1], v[2]);
        g.log_scale = Eigen::Vector3d(v[3], v[4], v[5]);
        g.rotation = Eigen::Vector4d(v[6], v[7], v[8], v[9]);
        g.opacity_logit = v[10];
        g.intensity = v[11];
        for (float f : v) {
            if (!std::isfinite(f)) {
                parse_error(path, body_start + i * sizeof v,
                            "non-finite parameter for gaussian " + std::to_string(i));
            }
        }
    }
    return cloud;
}

std::uint64_t write_cloud_ply_compat(const GaussianCloud& cloud,
                                     const std::filesystem::path& path) {
    std::string header = "ply\nformat binary_little_endian 1.0\n";
    header += "comment exported for third-party splat viewers\n";
    header += "element vertex " + std::to_string(cloud.size()) + "\n";
    const char* xyz[] = {"x", "y", "z", "nx", "ny", "nz"};
    for (const char* n : xyz) header += std::string("property float ") + n + "\n";
    for (int k = 0; k < 3; ++k) header += "property float f_dc_" + std::to_string(k) + "\n";
    for (int k = 0; k < 24; ++k) header += "property float f_rest_" + std::to_string(k) + "\n";
    header += "property float opacity\n";
    for (int k = 0; k < 3; ++k) header += "property float scale_" + std::to_string(k) + "\n";
    for (int k = 0; k < 4; ++k) header += "property float rot_" + std::to_string(k) + "\n";
    header += "end_header\n";

    std::vector<float> body;
    body.reserve(cloud.size() * 41);
    for (const Gaussian& g : cloud.gaussians) {
        for (int k = 0; k < 3; ++k) body.push_back(static_cast<float>(g.position[k]));
        for (int k = 0; k < 3; ++k) body.push_back(0.0f);  // normals
        const float dc = static_cast<float>((g.intensity - 0.5) / kShC0);
        for (int k = 0; k < 3; ++k) body.push_back(dc);
        for (int k = 0; k < 24; ++k) body.push_back(0.0f);
        body.push_back(static_cast<float>(g.opacity_logit));
        for (int k = 0; k < 3; ++k) body.push_back(static_cast<float>(g.log_scale[k]));
        const Eigen::Vector4d q = g.rotation.normalized();
        for (int k = 0; k < 4; ++k) body.push_back(static_cast<float>(q[k]));
    }
    write_file(path, header, body);
    return header.size() + body.size() * sizeof(float);
}

}  // namespace ctsplat
