#include "ctsplat/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ctsplat/ssim.hpp"

namespace ctsplat {

namespace {

void require_same_shape(const ProjectionImage& a, const ProjectionImage& b, const char* who) {
    if (a.width != b.width || a.height != b.height) {
        throw std::invalid_argument(std::string(who) + ": image shapes differ");
    }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double l1_loss(const ProjectionImage& rendered, const ProjectionImage& target,
               std::vector<double>* grad) {
    require_same_shape(rendered, target, "l1_loss");
    const std::size_t n = rendered.pixel_count();
    if (n == 0) throw std::invalid_argument("l1_loss: empty image");
    if (grad) grad->assign(n, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rendered.pixels[i] - target.pixels[i];
        sum += std::abs(d);
        if (grad) (*grad)[i] = sign(d) / static_cast<double>(n);
    }
    return sum / static_cast<double>(n);
}

double dssim_loss(const ProjectionImage& rendered, const ProjectionImage& target,
                  std::vector<double>* grad) {
    const double ssim = ssim_mean(rendered, target, grad);
    if (grad) {
        for (double& g : *grad) g *= -0.5;
    }
    return (1.0 - ssim) / 2.0;
}

double tv_loss(const ProjectionImage& img, std::vector<double>* grad) {
    if (img.pixel_count() == 0) throw std::invalid_argument("tv_loss: empty image");
    if (grad) grad->assign(img.pixel_count(), 0.0);
    double sum = 0.0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (x + 1 < img.width) {
                const double d = img.at(x + 1, y) - img.at(x, y);
                sum += std::abs(d);
                if (grad) {
                    const double s = sign(d);
                    (*grad)[static_cast<std::size_t>(y) * img.width + x + 1] += s;
                    (*grad)[static_cast<std::size_t>(y) * img.width + x] -= s;
                }
            }
            if (y + 1 < img.height) {
                const double d = img.at(x, y + 1) - img.at(x, y);
                sum += std::abs(d);
                if (grad) {
                    const double s = sign(d);
                    (*grad)[static_cast<std::size_t>(y + 1) * img.width + x] += s;
                    (*grad)[static_cast<std::size_t>(y) * img.width + x] -= s;
                }
            }
        }
    }
    return sum;
}

double beta_loss(const std::vector<double>& opacity_map, std::vector<double>* grad) {
    const std::size_t n = opacity_map.size();
    if (n == 0) throw std::invalid_argument("beta_loss: empty opacity map");
    if (grad) grad->assign(n, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = opacity_map[i];
        const double c = std::clamp(v, kBetaEps, 1.0 - kBetaEps);
        sum += std::log(c) + std::log(1.0 - c);
        if (grad && v > kBetaEps && v < 1.0 - kBetaEps) {
            (*grad)[i] = (1.0 / v - 1.0 / (1.0 - v)) / static_cast<double>(n);
        }
    }
    return sum / static_cast<double>(n);
}

LossReport total_loss(const ProjectionImage& rendered, const ProjectionImage& target,
                      const LossWeights& weights, std::vector<double>* d_pixels,
                      std::vector<double>* d_opacity) {
    require_same_shape(rendered, target, "total_loss");

    std::vector<double> g_l1, g_dssim, g_tv;
    LossReport report;
    report.l1 = l1_loss(rendered, target, d_pixels ? &g_l1 : nullptr);
    report.dssim = dssim_loss(rendered, target, d_pixels ? &g_dssim : nullptr);
    report.tv = tv_loss(rendered, d_pixels ? &g_tv : nullptr);

    if (rendered.opacity) {
        if (rendered.opacity->size() != rendered.pixel_count()) {
            throw std::invalid_argument("total_loss: opacity map size differs from image");
        }
        report.beta = beta_loss(*rendered.opacity, d_opacity);
        if (d_opacity) {
            for (double& g : *d_opacity) g *= weights.beta;
        }
    } else if (weights.beta != 0.0) {
        throw std::invalid_argument(
            "total_loss: beta weight is nonzero but the rendered image has no opacity map");
    } else if (d_opacity) {
        d_opacity->clear();
    }

    report.total = weights.l1 * report.l1 + weights.dssim * report.dssim +
                   weights.beta * report.beta + weights.tv * report.tv;

    if (d_pixels) {
        d_pixels->assign(rendered.pixel_count(), 0.0);
        for (std::size_t i = 0; i < d_pixels->size(); ++i) {
            (*d_pixels)[i] = weights.l1 * g_l1[i] + weights.dssim * g_dssim[i] +
                             weights.tv * g_tv[i];
        }
    }
    return report;
}

}  // namespace ctsplat
