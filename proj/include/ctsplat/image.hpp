// image.hpp: single-channel projection image shared by the DRR generator,
// the rasterizer, and the losses.
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace ctsplat {

// Row-major grayscale image. Pixel (x, y) lives at pixels[y * width + x] and
// samples the continuous image point (u, v) = (x, y). Persisted images hold
// values in [0, 1]; during optimization the rasterizer hands unclamped values
// to the losses, so the range invariant is enforced at the I/O boundary.
struct ProjectionImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;
    double view_angle_deg = 0.0;
    // Accumulated opacity per pixel (1 - final transmittance) when the image
    // came from the rasterizer; absent for measured/synthesized projections.
    std::optional<std::vector<double>> opacity;

    ProjectionImage() = default;
    ProjectionImage(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixel_count() const { return pixels.size(); }
};

// Clamps pixels (not the opacity map) to [0, 1] in place.
inline void clamp_unit(ProjectionImage& img) {
    for (double& p : img.pixels) p = p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

}  // namespace ctsplat
