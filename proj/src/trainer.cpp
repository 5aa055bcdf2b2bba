#include "ctsplat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace ctsplat {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("TrainConfig: ") + what);
}

// One Gaussian's worth of optimizer moments, used while rebuilding the state
// across clone/split/prune.
struct AdamRow {
    Eigen::Vector3d mp = Eigen::Vector3d::Zero(), vp = Eigen::Vector3d::Zero();
    Eigen::Vector3d ms = Eigen::Vector3d::Zero(), vs = Eigen::Vector3d::Zero();
    Eigen::Vector4d mr = Eigen::Vector4d::Zero(), vr = Eigen::Vector4d::Zero();
    double mo = 0.0, vo = 0.0, mi = 0.0, vi = 0.0;
};

AdamRow take_row(const AdamState& a, std::size_t i) {
    AdamRow r;
    r.mp = a.m_position[i];
    r.vp = a.v_position[i];
    r.ms = a.m_log_scale[i];
    r.vs = a.v_log_scale[i];
    r.mr = a.m_rotation[i];
    r.vr = a.v_rotation[i];
    r.mo = a.m_opacity[i];
    r.vo = a.v_opacity[i];
    r.mi = a.m_intensity[i];
    r.vi = a.v_intensity[i];
    return r;
}

void rebuild_state(AdamState& a, const std::vector<AdamRow>& rows) {
    const std::size_t n = rows.size();
    a.resize_zero(n);
    for (std::size_t i = 0; i < n; ++i) {
        a.m_position[i] = rows[i].mp;
        a.v_position[i] = rows[i].vp;
        a.m_log_scale[i] = rows[i].ms;
        a.v_log_scale[i] = rows[i].vs;
        a.m_rotation[i] = rows[i].mr;
        a.v_rotation[i] = rows[i].vr;
        a.m_opacity[i] = rows[i].mo;
        a.v_opacity[i] = rows[i].vo;
        a.m_intensity[i] = rows[i].mi;
        a.v_intensity[i] = rows[i].vi;
    }
}

template <typename Vec>
void adam_update(Vec& m, Vec& v, const Vec& grad, double lr, double bc1, double bc2,
                 Vec& param) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    const Vec denom = (v / bc2).cwiseSqrt() + Vec::Constant(kAdamEps);
    param -= lr * (m / bc1).cwiseQuotient(denom);
}

void adam_update(double& m, double& v, double grad, double lr, double bc1, double bc2,
                 double& param) {
    m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
    v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad * grad;
    param -= lr * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
}

}  // namespace

void TrainConfig::validate() const {
    require(iterations >= 1, "iterations must be at least 1");
    const double lrs[] = {lr_position, lr_position_final, lr_log_scale, lr_rotation,
                          lr_opacity,  lr_intensity};
    for (double lr : lrs) require(std::isfinite(lr) && lr >= 0.0, "learning rates must be finite and non-negative");
    require(densify_from >= 0, "densify_from must be non-negative");
    require(densify_until >= densify_from, "densify_until must not precede densify_from");
    require(densify_interval >= 1, "densify_interval must be at least 1");
    require(std::isfinite(densify_grad_threshold) && densify_grad_threshold > 0.0,
            "densify_grad_threshold must be positive");
    require(std::isfinite(prune_opacity_threshold) && prune_opacity_threshold > 0.0,
            "prune_opacity_threshold must be positive");
    require(opacity_reset_interval >= 0, "opacity_reset_interval must be non-negative");
    require(std::isfinite(split_scale_factor) && split_scale_factor > 0.0,
            "split_scale_factor must be positive");
    require(std::isfinite(clone_scale_fraction) && clone_scale_fraction > 0.0,
            "clone_scale_fraction must be positive");
    require(std::isfinite(clone_offset_fraction) && clone_offset_fraction >= 0.0,
            "clone_offset_fraction must be non-negative");
    require(train_fraction > 0.0 && train_fraction <= 1.0, "train_fraction must lie in (0, 1]");
    require(checkpoint_interval >= 0, "checkpoint_interval must be non-negative");
    const double ws[] = {weights.l1, weights.dssim, weights.beta, weights.tv};
    for (double w : ws) require(std::isfinite(w) && w >= 0.0, "loss weights must be finite and non-negative");
    require(std::isfinite(background) && background >= 0.0, "background must be finite and non-negative");
}

void AdamState::resize_zero(std::size_t n) {
    m_position.assign(n, Eigen::Vector3d::Zero());
    v_position.assign(n, Eigen::Vector3d::Zero());
    m_log_scale.assign(n, Eigen::Vector3d::Zero());
    v_log_scale.assign(n, Eigen::Vector3d::Zero());
    m_rotation.assign(n, Eigen::Vector4d::Zero());
    v_rotation.assign(n, Eigen::Vector4d::Zero());
    m_opacity.assign(n, 0.0);
    v_opacity.assign(n, 0.0);
    m_intensity.assign(n, 0.0);
    v_intensity.assign(n, 0.0);
}

void DensifyStats::resize_zero(std::size_t n) {
    grad_norm_sum.assign(n, 0.0);
    position_grad_sum.assign(n, Eigen::Vector3d::Zero());
    hits.assign(n, 0);
}

void DensifyStats::accumulate(const GradientBuffer& grads) {
    if (grads.hit.size() != hits.size())
        throw std::invalid_argument("DensifyStats: gradient buffer does not match the cloud");
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (!grads.hit[i]) continue;
        grad_norm_sum[i] += grads.mean2d_grad_norm[i];
        position_grad_sum[i] += grads.d_position[i];
        hits[i] += 1;
    }
}

ViewSplit split_views(int n_views, double train_fraction, std::uint64_t /*seed*/) {
    if (n_views < 1) throw std::invalid_argument("split_views: need at least one view");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw std::invalid_argument("split_views: train_fraction must lie in (0, 1]");
    std::vector<char> is_train(static_cast<std::size_t>(n_views), 0);
    if (train_fraction == 0.5) {
        for (int i = 0; i < n_views; i += 2) is_train[static_cast<std::size_t>(i)] = 1;
    } else {
        const long k = std::lround(train_fraction * n_views);
        if (k < 1) throw std::invalid_argument("split_views: train_fraction selects zero training views");
        for (long i = 0; i < k; ++i)
            is_train[static_cast<std::size_t>(i * n_views / k)] = 1;
    }
    ViewSplit split;
    for (int i = 0; i < n_views; ++i)
        (is_train[static_cast<std::size_t>(i)] ? split.train : split.test).push_back(i);
    return split;
}

DensifyReport density_control(GaussianCloud& cloud, AdamState& adam, const DensifyStats& stats,
                              const TrainConfig& config, int iteration, Rng& rng) {
    DensifyReport report;
    const std::size_t n = cloud.gaussians.size();
    if (adam.size() != n)
        throw std::invalid_argument("density_control: moment rows do not match the cloud");

    const bool fire = iteration >= config.densify_from && iteration <= config.densify_until &&
                      iteration % config.densify_interval == 0;
    if (fire) {
        report.densify_ran = true;
        if (stats.hits.size() != n)
            throw std::invalid_argument("density_control: stats do not match the cloud");
        const double extent = cloud.scene_extent;
        const double scale_cut = config.clone_scale_fraction * extent;
        std::vector<Gaussian> survivors;
        std::vector<AdamRow> rows;
        survivors.reserve(n + 16);
        rows.reserve(n + 16);
        std::vector<Gaussian> appended;

        for (std::size_t i = 0; i < n; ++i) {
            const Gaussian& g = cloud.gaussians[i];
            const int hits = stats.hits[i];
            const double mean_grad = hits > 0 ? stats.grad_norm_sum[i] / hits : 0.0;
            if (!(mean_grad > config.densify_grad_threshold)) {
                survivors.push_back(g);
                rows.push_back(take_row(adam, i));
                continue;
            }
            const Eigen::Vector3d scale = g.scale();
            if (scale.maxCoeff() < scale_cut) {
                survivors.push_back(g);
                rows.push_back(take_row(adam, i));
                Gaussian copy = g;
                const double u = rng.uniform();
                const Eigen::Vector3d grad = stats.position_grad_sum[i] / hits;
                const double norm = grad.norm();
                if (norm > 0.0)
                    copy.position -= (u * config.clone_offset_fraction * extent / norm) * grad;
                appended.push_back(std::move(copy));
                ++report.cloned;
            } else {
                const Eigen::Matrix3d rot = quat_to_rotation(g.rotation);
                const Eigen::Vector3d shrink =
                    Eigen::Vector3d::Constant(std::log(config.split_scale_factor));
                for (int c = 0; c < 2; ++c) {
                    Gaussian child = g;
                    const Eigen::Vector3d xi(rng.normal(), rng.normal(), rng.normal());
                    child.position = g.position + rot * scale.cwiseProduct(xi);
                    child.log_scale = g.log_scale - shrink;
                    appended.push_back(std::move(child));
                }
                ++report.split;
            }
        }
        for (Gaussian& g : appended) {
            survivors.push_back(std::move(g));
            rows.emplace_back();
        }

        std::vector<Gaussian> kept;
        std::vector<AdamRow> kept_rows;
        kept.reserve(survivors.size());
        kept_rows.reserve(rows.size());
        for (std::size_t i = 0; i < survivors.size(); ++i) {
            if (survivors[i].opacity() < config.prune_opacity_threshold) {
                ++report.pruned;
                continue;
            }
            kept.push_back(std::move(survivors[i]));
            kept_rows.push_back(rows[i]);
        }
        cloud.gaussians = std::move(kept);
        rebuild_state(adam, kept_rows);
    }

    if (config.opacity_reset_interval > 0 && iteration % config.opacity_reset_interval == 0) {
        report.opacity_reset = true;
        const double cap = std::log(0.01 / 0.99);
        for (Gaussian& g : cloud.gaussians) g.opacity_logit = std::min(g.opacity_logit, cap);
        std::fill(adam.m_opacity.begin(), adam.m_opacity.end(), 0.0);
        std::fill(adam.v_opacity.begin(), adam.v_opacity.end(), 0.0);
    }
    return report;
}

Trainer::Trainer(TrainConfig config, GaussianCloud cloud, std::vector<TrainView> views)
    : config_(std::move(config)),
      cloud_(std::move(cloud)),
      views_(std::move(views)),
      rng_(config_.seed) {
    config_.validate();
    if (cloud_.gaussians.empty()) throw std::invalid_argument("Trainer: initial cloud is empty");
    if (views_.empty()) throw std::invalid_argument("Trainer: no training views");
    for (const TrainView& v : views_) {
        if (v.target.width < 1 || v.target.height < 1 ||
            v.target.pixels.size() != v.target.pixel_count())
            throw std::invalid_argument("Trainer: malformed target image");
    }
    adam_.resize_zero(cloud_.gaussians.size());
    stats_.resize_zero(cloud_.gaussians.size());
    order_.resize(views_.size());
    std::iota(order_.begin(), order_.end(), 0);
    order_pos_ = order_.size();  // forces a shuffle before the first draw
}

double Trainer::position_lr(int iteration) const {
    if (config_.lr_position <= 0.0) return 0.0;
    double progress = 0.0;
    if (config_.iterations > 1) {
        progress = static_cast<double>(iteration - 1) / (config_.iterations - 1);
        progress = std::clamp(progress, 0.0, 1.0);
    }
    const double ratio = config_.lr_position_final / config_.lr_position;
    return config_.lr_position * std::pow(ratio, progress) * cloud_.scene_extent;
}

void Trainer::adam_step(const GradientBuffer& grads) {
    adam_.step += 1;
    const double t = static_cast<double>(adam_.step);
    const double bc1 = 1.0 - std::pow(kAdamBeta1, t);
    const double bc2 = 1.0 - std::pow(kAdamBeta2, t);
    const double lr_pos = position_lr(iteration_);
    for (std::size_t i = 0; i < cloud_.gaussians.size(); ++i) {
        Gaussian& g = cloud_.gaussians[i];
        adam_update(adam_.m_position[i], adam_.v_position[i], grads.d_position[i], lr_pos, bc1,
                    bc2, g.position);
        adam_update(adam_.m_log_scale[i], adam_.v_log_scale[i], grads.d_log_scale[i],
                    config_.lr_log_scale, bc1, bc2, g.log_scale);
        adam_update(adam_.m_rotation[i], adam_.v_rotation[i], grads.d_rotation[i],
                    config_.lr_rotation, bc1, bc2, g.rotation);
        adam_update(adam_.m_opacity[i], adam_.v_opacity[i], grads.d_opacity_logit[i],
                    config_.lr_opacity, bc1, bc2, g.opacity_logit);
        adam_update(adam_.m_intensity[i], adam_.v_intensity[i], grads.d_intensity[i],
                    config_.lr_intensity, bc1, bc2, g.intensity);
    }
}

LossReport Trainer::step() {
    if (order_pos_ >= order_.size()) {
        rng_.shuffle(order_);
        order_pos_ = 0;
    }
    const TrainView& view = views_[static_cast<std::size_t>(order_[order_pos_++])];
    ++iteration_;

    const ProjectionImage rendered =
        render(cloud_, view.pose, view.target.width, view.target.height, config_.background);
    std::vector<double> d_pixels, d_opacity;
    const LossReport report =
        total_loss(rendered, view.target, config_.weights, &d_pixels, &d_opacity);
    if (!std::isfinite(report.total))
        throw std::runtime_error("Trainer: non-finite loss at iteration " +
                                 std::to_string(iteration_));
    const GradientBuffer grads = render_backward(cloud_, view.pose, view.target.width,
                                                 view.target.height, d_pixels, d_opacity,
                                                 config_.background);
    stats_.accumulate(grads);
    adam_step(grads);
    for (Gaussian& g : cloud_.gaussians) {
        const double norm = g.rotation.norm();
        if (norm > 0.0)
            g.rotation /= norm;
        else
            g.rotation = Eigen::Vector4d(1, 0, 0, 0);
    }

    const DensifyReport dc = density_control(cloud_, adam_, stats_, config_, iteration_, rng_);
    if (cloud_.gaussians.empty())
        throw std::runtime_error("Trainer: pruning emptied the cloud at iteration " +
                                 std::to_string(iteration_));
    if (dc.densify_ran) stats_.resize_zero(cloud_.gaussians.size());
    return report;
}

void Trainer::run(TrainLogWriter* log,
                  const std::function<void(int, const GaussianCloud&)>& checkpoint) {
    while (iteration_ < config_.iterations) {
        const auto t0 = std::chrono::steady_clock::now();
        const LossReport report = step();
        const auto t1 = std::chrono::steady_clock::now();
        if (log) {
            TrainLogRow row;
            row.iteration = iteration_;
            row.l1 = report.l1;
            row.dssim = report.dssim;
            row.tv = report.tv;
            row.beta = report.beta;
            row.total = report.total;
            row.n_gaussians = cloud_.gaussians.size();
            row.ms_per_iter = std::chrono::duration<double, std::milli>(t1 - t0).count();
            log->append(row);
        }
        if (checkpoint && config_.checkpoint_interval > 0 &&
            iteration_ % config_.checkpoint_interval == 0)
            checkpoint(iteration_, cloud_);
    }
}

}  // namespace ctsplat
