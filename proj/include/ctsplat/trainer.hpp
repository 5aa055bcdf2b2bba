// trainer.hpp: Adam optimization loop with adaptive density control.
//
// Frozen training semantics:
//  - Views are consumed in epoch order: the shuffled train-index list is
//    walked to exhaustion, then reshuffled (the first epoch is shuffled too).
//    One RNG, seeded from TrainConfig::seed, drives both the shuffles and the
//    density-control sampling, so the whole run is a single deterministic
//    draw sequence.
//  - Each iteration: render -> total_loss -> render_backward -> densify-stat
//    accumulation -> Adam update -> quaternion renormalization -> density
//    control (on schedule) -> opacity reset (on schedule).
//  - Adam: beta1 0.9, beta2 0.999, eps 1e-8 added outside the square root
//    denominator sqrt(v_hat) + eps; one global step counter shared by every
//    parameter group. The position rate is scaled by scene_extent and decays
//    exponentially from lr_position to lr_position_final, hitting the initial
//    value exactly at iteration 1 and the final value at the last iteration.
//  - Densify statistic per Gaussian: mean over the views that rendered it of
//    |dL/d mean2d| (pixel units, as reported by render_backward). Above
//    densify_grad_threshold the Gaussian is cloned when its largest world
//    scale is below clone_scale_fraction * scene_extent, split otherwise.
//    A clone keeps the original row and appends a copy nudged down the mean
//    position gradient by a uniform[0,1) sample of clone_offset_fraction *
//    scene_extent. A split removes the parent and appends two children
//    sampled from the parent distribution (position = mean + R * (scale ⊙
//    xi), xi standard normal per axis) with scales divided by
//    split_scale_factor. Candidates are visited in ascending index; appended
//    rows land after the survivors in visit order; new rows get zeroed Adam
//    moments. Pruning then removes rows with opacity below
//    prune_opacity_threshold.
//  - Opacity reset clamps every opacity_logit to at most logit(0.01) and
//    zeroes the opacity Adam moments (stale momentum would undo the reset).
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "ctsplat/cloud.hpp"
#include "ctsplat/geometry.hpp"
#include "ctsplat/image.hpp"
#include "ctsplat/io.hpp"
#include "ctsplat/losses.hpp"
#include "ctsplat/rasterizer.hpp"
#include "ctsplat/rng.hpp"

namespace ctsplat {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct TrainConfig {
    int iterations = 20000;
    LossWeights weights;

    // Per-group learning rates; the position pair is multiplied by the
    // cloud's scene_extent.
    double lr_position = 1.6e-4;
    double lr_position_final = 1.6e-6;
    double lr_log_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 5e-2;
    double lr_intensity = 2.5e-3;

    int densify_from = 500;
    int densify_until = 15000;
    int densify_interval = 100;
    double densify_grad_threshold = 2e-4;
    double prune_opacity_threshold = 0.005;
    int opacity_reset_interval = 3000;
    double split_scale_factor = 1.6;
    double clone_scale_fraction = 0.01;
    double clone_offset_fraction = 0.01;

    double train_fraction = 0.5;
    std::uint64_t seed = 0;
    int checkpoint_interval = 0;  // 0 disables checkpoint callbacks
    double background = 0.0;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

// Moment rows track the cloud row for row through every densify/prune.
struct AdamState {
    std::vector<Eigen::Vector3d> m_position, v_position;
    std::vector<Eigen::Vector3d> m_log_scale, v_log_scale;
    std::vector<Eigen::Vector4d> m_rotation, v_rotation;
    std::vector<double> m_opacity, v_opacity;
    std::vector<double> m_intensity, v_intensity;
    std::int64_t step = 0;

    void resize_zero(std::size_t n);
    std::size_t size() const { return m_position.size(); }
};

// Per-Gaussian screen-space gradient statistics accumulated between density
// control events.
struct DensifyStats {
    std::vector<double> grad_norm_sum;
    std::vector<Eigen::Vector3d> position_grad_sum;
    std::vector<int> hits;

    void resize_zero(std::size_t n);
    void accumulate(const GradientBuffer& grads);
};

struct ViewSplit {
    std::vector<int> train;
    std::vector<int> test;
};

// Deterministic angular split. Fraction 0.5 interleaves (even indices train);
// any other fraction takes round(fraction * n) training views at even stride
// floor(i * n / k). The seed is accepted for signature stability but the
// strided rule does not consume it. Throws std::invalid_argument when the
// fraction is outside (0, 1] or selects zero training views.
ViewSplit split_views(int n_views, double train_fraction, std::uint64_t seed = 0);

struct DensifyReport {
    int cloned = 0;
    int split = 0;
    int pruned = 0;
    bool densify_ran = false;  // the clone/split/prune schedule fired
    bool opacity_reset = false;
};

// Applies the schedule for `iteration` (1-based): clone/split/prune when
// inside [densify_from, densify_until] and iteration % densify_interval == 0,
// opacity reset when iteration % opacity_reset_interval == 0. Consumes draws
// from rng only for clone offsets and split samples, in candidate order.
DensifyReport density_control(GaussianCloud& cloud, AdamState& adam, const DensifyStats& stats,
                              const TrainConfig& config, int iteration, Rng& rng);

struct TrainView {
    CameraPose pose;
    ProjectionImage target;
};

class Trainer {
public:
    // Takes ownership of the initial cloud and the training views. Throws
    // std::invalid_argument for an invalid config, an empty cloud, an empty
    // view list, or view targets whose sizes disagree.
    Trainer(TrainConfig config, GaussianCloud cloud, std::vector<TrainView> views);

    // One optimization iteration. Throws std::runtime_error naming the
    // iteration when the loss goes non-finite or pruning empties the cloud.
    LossReport step();

    // Runs the remaining iterations. Appends one row per step to `log` when
    // non-null; invokes `checkpoint` every checkpoint_interval iterations.
    void run(TrainLogWriter* log = nullptr,
             const std::function<void(int, const GaussianCloud&)>& checkpoint = {});

    const GaussianCloud& cloud() const { return cloud_; }
    const AdamState& adam() const { return adam_; }
    int iteration() const { return iteration_; }

    // Scheduled position rate (already scaled by scene_extent) at a 1-based
    // iteration number.
    double position_lr(int iteration) const;

private:
    void adam_step(const GradientBuffer& grads);

    TrainConfig config_;
    GaussianCloud cloud_;
    std::vector<TrainView> views_;
    AdamState adam_;
    DensifyStats stats_;
    Rng rng_;
    std::vector<int> order_;
    std::size_t order_pos_ = 0;
    int iteration_ = 0;
};

}  // namespace ctsplat
