// metrics.hpp: image fidelity metrics and held-out evaluation.
#pragma once

#include <cstdint>
#include <vector>

#include "ctsplat/cloud.hpp"
#include "ctsplat/geometry.hpp"
#include "ctsplat/image.hpp"

namespace ctsplat {

// Peak signal-to-noise ratio in dB for unit dynamic range:
// 10 * log10(1 / MSE). Identical images give +infinity (serialized as the
// token "inf" in reports). Throws std::invalid_argument on shape mismatch.
double psnr(const ProjectionImage& a, const ProjectionImage& b);

// Mean SSIM with the same kernel and constants as the D-SSIM loss.
double ssim(const ProjectionImage& a, const ProjectionImage& b);

struct EvalRow {
    double angle_deg = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

// Per-view metrics plus aggregates. stddev uses the sample (n - 1)
// definition and is 0 for a single view. model_bytes / voxel_bytes compare
// the serialized cloud against a dense float32 voxel grid; voxel_bytes is 0
// when the dataset does not record phantom dimensions.
struct EvalReport {
    std::vector<EvalRow> rows;
    double psnr_mean = 0.0, psnr_stddev = 0.0;
    double ssim_mean = 0.0, ssim_stddev = 0.0;
    double train_fraction = 0.0;
    std::size_t n_gaussians = 0;
    std::uint64_t model_bytes = 0;
    std::uint64_t voxel_bytes = 0;
};

// Renders the cloud at each pose (clamped to [0, 1]) and scores it against
// the matching target. Poses and targets pair by index; angles are taken
// from the targets. Throws std::invalid_argument when the test set is empty
// or sizes differ.
EvalReport evaluate(const GaussianCloud& cloud, const std::vector<CameraPose>& poses,
                    const std::vector<ProjectionImage>& targets, double background = 0.0);

}  // namespace ctsplat
