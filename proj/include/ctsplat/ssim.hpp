// ssim.hpp: structural similarity shared by the D-SSIM loss and the SSIM
// metric so both always use the same kernel and constants.
#pragma once

#include <vector>

#include "ctsplat/image.hpp"

namespace ctsplat {

// 11x11 Gaussian window with sigma 1.5, normalized to sum 1; stability
// constants for unit dynamic range.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

// Mean SSIM between two images of equal shape, averaged over all positions
// where the window fits entirely inside the image (valid-window handling).
// When grad_a is non-null it receives d(mean SSIM)/d(a) per pixel of `a`.
// Throws std::invalid_argument on shape mismatch or images smaller than the
// window.
double ssim_mean(const ProjectionImage& a, const ProjectionImage& b,
                 std::vector<double>* grad_a = nullptr);

}  // namespace ctsplat
