// losses.hpp: training objective. The total is a weighted sum of an L1 data
// term, a structural dissimilarity term, total variation on the rendered
// image, and a beta distribution prior pushing accumulated opacity toward
// 0 or 1.
#pragma once

#include <vector>

#include "ctsplat/image.hpp"

namespace ctsplat {

struct LossWeights {
    double l1 = 0.8;
    double dssim = 0.2;
    double beta = 1e-3;
    double tv = 1e-4;
};

struct LossReport {
    double l1 = 0.0;
    double dssim = 0.0;
    double tv = 0.0;
    double beta = 0.0;
    double total = 0.0;
};

// Opacity values are clamped to [kBetaEps, 1 - kBetaEps] before the logs.
inline constexpr double kBetaEps = 1e-4;

// Mean absolute error. grad, when non-null, receives sign(r - t) / P per
// pixel with sign(0) = 0. Throws std::invalid_argument on shape mismatch.
double l1_loss(const ProjectionImage& rendered, const ProjectionImage& target,
               std::vector<double>* grad = nullptr);

// (1 - mean SSIM) / 2 with the shared 11x11 sigma-1.5 kernel; zero for
// identical images. grad is with respect to `rendered`.
double dssim_loss(const ProjectionImage& rendered, const ProjectionImage& target,
                  std::vector<double>* grad = nullptr);

// Anisotropic total variation: sum of |right - left| + |down - up| over all
// in-range neighbor pairs, not normalized by pixel count. The weight is
// applied once by total_loss, never inside this term. grad uses the
// subgradient with sign(0) = 0.
double tv_loss(const ProjectionImage& img, std::vector<double>* grad = nullptr);

// Mean over pixels of log(o) + log(1 - o) on the clamped opacity map. The
// value is negative everywhere and minimized when opacities sit at the
// clamp boundaries; the gradient is zero at clamped pixels.
double beta_loss(const std::vector<double>& opacity_map, std::vector<double>* grad = nullptr);

// Weighted sum of all four terms. d_pixels receives the combined gradient of
// the image terms with respect to rendered pixels; d_opacity the beta
// gradient with respect to the opacity map. Requires rendered.opacity unless
// weights.beta == 0, in which case the beta term is reported as 0.
LossReport total_loss(const ProjectionImage& rendered, const ProjectionImage& target,
                      const LossWeights& weights, std::vector<double>* d_pixels = nullptr,
                      std::vector<double>* d_opacity = nullptr);

}  // namespace ctsplat
