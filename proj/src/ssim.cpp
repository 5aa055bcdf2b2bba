#include "ctsplat/ssim.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace ctsplat {

namespace {

std::array<double, kSsimWindow * kSsimWindow> make_kernel() {
    std::array<double, kSsimWindow> g;
    const int half = kSsimWindow / 2;
    double norm = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        norm += g[i];
    }
    for (double& v : g) v /= norm;
    std::array<double, kSsimWindow * kSsimWindow> k;
    for (int y = 0; y < kSsimWindow; ++y) {
        for (int x = 0; x < kSsimWindow; ++x) k[y * kSsimWindow + x] = g[y] * g[x];
    }
    return k;
}

}  // namespace

double ssim_mean(const ProjectionImage& a, const ProjectionImage& b,
                 std::vector<double>* grad_a) {
    if (a.width != b.width || a.height != b.height) {
        throw std::invalid_argument("ssim_mean: image shapes differ");
    }
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        throw std::invalid_argument("ssim_mean: images must be at least 11x11");
    }
    static const auto kernel = make_kernel();

    const int wx = a.width - kSsimWindow + 1;
    const int wy = a.height - kSsimWindow + 1;
    const double n_windows = static_cast<double>(wx) * wy;
    if (grad_a) {
        grad_a->assign(a.pixel_count(), 0.0);
    }

    double total = 0.0;
    for (int oy = 0; oy < wy; ++oy) {
        for (int ox = 0; ox < wx; ++ox) {
            double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
            for (int ky = 0; ky < kSsimWindow; ++ky) {
                for (int kx = 0; kx < kSsimWindow; ++kx) {
                    const double w = kernel[ky * kSsimWindow + kx];
                    const double va = a.at(ox + kx, oy + ky);
                    const double vb = b.at(ox + kx, oy + ky);
                    mu_a += w * va;
                    mu_b += w * vb;
                    aa += w * va * va;
                    bb += w * vb * vb;
                    ab += w * va * vb;
                }
            }
            const double var_a = aa - mu_a * mu_a;
            const double var_b = bb - mu_b * mu_b;
            const double cov = ab - mu_a * mu_b;

            const double l_num = 2.0 * mu_a * mu_b + kSsimC1;
            const double l_den = mu_a * mu_a + mu_b * mu_b + kSsimC1;
            const double c_num = 2.0 * cov + kSsimC2;
            const double c_den = var_a + var_b + kSsimC2;
            const double ssim = (l_num * c_num) / (l_den * c_den);
            total += ssim;

            if (grad_a) {
                // d ssim / d a_k for each pixel k of the window, through the
                // weighted moments. Writes accumulate because windows overlap.
                const double inv = 1.0 / (l_den * c_den);
                for (int ky = 0; ky < kSsimWindow; ++ky) {
                    for (int kx = 0; kx < kSsimWindow; ++kx) {
                        const double w = kernel[ky * kSsimWindow + kx];
                        const double va = a.at(ox + kx, oy + ky);
                        const double vb = b.at(ox + kx, oy + ky);
                        const double d_l_num = 2.0 * w * mu_b;
                        const double d_l_den = 2.0 * w * mu_a;
                        const double d_c_num = 2.0 * w * (vb - mu_b);
                        const double d_c_den = 2.0 * w * (va - mu_a);
                        const double d_ssim =
                            (d_l_num * c_num + l_num * d_c_num) * inv -
                            ssim * (d_l_den * c_den + l_den * d_c_den) * inv;
                        (*grad_a)[static_cast<std::size_t>(oy + ky) * a.width + (ox + kx)] +=
                            d_ssim / n_windows;
                    }
                }
            }
        }
    }
    return total / n_windows;
}

}  // namespace ctsplat
