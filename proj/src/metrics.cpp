#include "ctsplat/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctsplat/rasterizer.hpp"
#include "ctsplat/ssim.hpp"

namespace ctsplat {

double psnr(const ProjectionImage& a, const ProjectionImage& b) {
    if (a.width != b.width || a.height != b.height) {
        throw std::invalid_argument("psnr: image shapes differ");
    }
    if (a.pixel_count() == 0) throw std::invalid_argument("psnr: empty image");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.pixel_count());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

double ssim(const ProjectionImage& a, const ProjectionImage& b) { return ssim_mean(a, b); }

namespace {

struct Moments {
    double mean = 0.0, stddev = 0.0;
};

Moments sample_moments(const std::vector<double>& values) {
    Moments m;
    for (double v : values) m.mean += v;
    m.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - m.mean) * (v - m.mean);
        m.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return m;
}

}  // namespace

EvalReport evaluate(const GaussianCloud& cloud, const std::vector<CameraPose>& poses,
                    const std::vector<ProjectionImage>& targets, double background) {
    if (poses.empty()) throw std::invalid_argument("evaluate: test set is empty");
    if (poses.size() != targets.size()) {
        throw std::invalid_argument("evaluate: pose and target counts differ");
    }

    EvalReport report;
    report.n_gaussians = cloud.size();
    std::vector<double> psnrs, ssims;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        ProjectionImage rendered =
            render(cloud, poses[i], targets[i].width, targets[i].height, background);
        clamp_unit(rendered);
        EvalRow row;
        row.angle_deg = targets[i].view_angle_deg;
        row.psnr_db = psnr(rendered, targets[i]);
        row.ssim = ssim(rendered, targets[i]);
        report.rows.push_back(row);
        psnrs.push_back(row.psnr_db);
        ssims.push_back(row.ssim);
    }
    const Moments pm = sample_moments(psnrs);
    const Moments sm = sample_moments(ssims);
    report.psnr_mean = pm.mean;
    report.psnr_stddev = pm.stddev;
    report.ssim_mean = sm.mean;
    report.ssim_stddev = sm.stddev;
    return report;
}

}  // namespace ctsplat
