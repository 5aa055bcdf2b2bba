#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ctsplat/image.hpp"
#include "ctsplat/losses.hpp"
#include "ctsplat/rng.hpp"
#include "ctsplat/ssim.hpp"

using namespace ctsplat;

namespace {

ProjectionImage random_image(int w, int h, Rng& rng) {
    ProjectionImage img(w, h);
    for (double& v : img.pixels) v = rng.uniform(0.0, 1.0);
    return img;
}

// Central-difference check of an analytic gradient at `checks` random pixels.
void check_gradient(const std::function<double(const std::vector<double>&)>& f,
                    std::vector<double> x, const std::vector<double>& analytic, Rng& rng,
                    int checks, double h, double tol) {
    REQUIRE(analytic.size() == x.size());
    for (int c = 0; c < checks; ++c) {
        const std::size_t i = rng.index(x.size());
        const double saved = x[i];
        x[i] = saved + h;
        const double up = f(x);
        x[i] = saved - h;
        const double down = f(x);
        x[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
        CHECK(std::abs(fd - analytic[i]) / denom < tol);
    }
}

double min_neighbor_gap(const ProjectionImage& img) {
    double gap = 1e9;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (x + 1 < img.width) gap = std::min(gap, std::abs(img.at(x + 1, y) - img.at(x, y)));
            if (y + 1 < img.height) gap = std::min(gap, std::abs(img.at(x, y + 1) - img.at(x, y)));
        }
    return gap;
}

}  // namespace

TEST_CASE("l1 loss value and gradient") {
    ProjectionImage r(3, 2), t(3, 2);
    for (int i = 0; i < 6; ++i) {
        r.pixels[i] = 0.5;
        t.pixels[i] = (i % 2 == 0) ? 0.25 : 0.75;
    }
    std::vector<double> grad;
    CHECK(l1_loss(r, t, &grad) == doctest::Approx(0.25).epsilon(1e-15));
    for (int i = 0; i < 6; ++i) {
        CHECK(grad[i] == doctest::Approx((i % 2 == 0 ? 1.0 : -1.0) / 6.0));
    }

    // Identical images: zero loss, zero subgradient.
    CHECK(l1_loss(r, r, &grad) == 0.0);
    for (double g : grad) CHECK(g == 0.0);

    ProjectionImage wrong(2, 2);
    CHECK_THROWS_AS(l1_loss(r, wrong), std::invalid_argument);
}

TEST_CASE("l1 gradient matches finite differences away from ties") {
    Rng rng(21);
    ProjectionImage r = random_image(13, 12, rng);
    ProjectionImage t = r;
    // Keep |r - t| well above the FD step so the sign never flips.
    for (double& v : t.pixels) v += (rng.uniform(0.0, 1.0) < 0.5 ? -1 : 1) * rng.uniform(0.1, 0.3);

    std::vector<double> analytic;
    l1_loss(r, t, &analytic);
    check_gradient(
        [&](const std::vector<double>& x) {
            ProjectionImage img = r;
            img.pixels = x;
            return l1_loss(img, t);
        },
        r.pixels, analytic, rng, 40, 1e-6, 1e-6);
}

TEST_CASE("dssim is zero for identical images and matches finite differences") {
    Rng rng(22);
    const ProjectionImage a = random_image(13, 12, rng);
    CHECK(dssim_loss(a, a) == 0.0);

    // Constant images with maximal mean difference: SSIM reduces to the
    // luminance term C1 / (1 + C1).
    ProjectionImage zeros(12, 11), ones(12, 11, 1.0);
    const double expected_ssim = kSsimC1 / (1.0 + kSsimC1);
    CHECK(dssim_loss(zeros, ones) == doctest::Approx((1.0 - expected_ssim) / 2.0).epsilon(1e-12));

    ProjectionImage b = random_image(13, 12, rng);
    std::vector<double> analytic;
    const double loss = dssim_loss(a, b, &analytic);
    CHECK(loss > 0.0);
    CHECK(loss <= 1.0);
    check_gradient(
        [&](const std::vector<double>& x) {
            ProjectionImage img = a;
            img.pixels = x;
            return dssim_loss(img, b);
        },
        a.pixels, analytic, rng, 35, 1e-6, 1e-4);

    ProjectionImage tiny(10, 11);
    CHECK_THROWS_AS(dssim_loss(tiny, tiny), std::invalid_argument);
}

TEST_CASE("ssim agrees with hand-computed constant-image cases") {
    ProjectionImage a(11, 11, 0.5), b(11, 11, 0.5);
    CHECK(ssim_mean(a, b) == 1.0);

    // mu_a = 0.5, mu_b = 0.25, zero variances: pure luminance comparison.
    for (double& v : b.pixels) v = 0.25;
    const double l = (2 * 0.5 * 0.25 + kSsimC1) / (0.5 * 0.5 + 0.25 * 0.25 + kSsimC1);
    CHECK(ssim_mean(a, b) == doctest::Approx(l).epsilon(1e-12));
    // Symmetric in its arguments.
    CHECK(ssim_mean(b, a) == doctest::Approx(ssim_mean(a, b)).epsilon(1e-15));
}

TEST_CASE("tv loss equals the textbook value on the canonical grid") {
    ProjectionImage img(2, 2);
    img.at(0, 0) = 0.0;
    img.at(1, 0) = 1.0;
    img.at(0, 1) = 0.0;
    img.at(1, 1) = 1.0;
    std::vector<double> grad;
    CHECK(tv_loss(img, &grad) == 2.0);
    CHECK(grad[0] == -1.0);
    CHECK(grad[1] == 1.0);
    CHECK(grad[2] == -1.0);
    CHECK(grad[3] == 1.0);

    // Constant image: zero variation, zero subgradient.
    ProjectionImage flat(5, 4, 0.7);
    CHECK(tv_loss(flat, &grad) == 0.0);
    for (double g : grad) CHECK(g == 0.0);

    // Single pixel has no neighbor pairs.
    ProjectionImage one(1, 1, 0.3);
    CHECK(tv_loss(one) == 0.0);
}

TEST_CASE("tv gradient matches finite differences away from ties") {
    Rng rng(23);
    ProjectionImage img = random_image(9, 8, rng);
    REQUIRE(min_neighbor_gap(img) > 1e-4);

    std::vector<double> analytic;
    tv_loss(img, &analytic);
    check_gradient(
        [&](const std::vector<double>& x) {
            ProjectionImage im = img;
            im.pixels = x;
            return tv_loss(im);
        },
        img.pixels, analytic, rng, 40, 1e-5, 1e-6);
}

TEST_CASE("beta loss pushes opacity toward 0 or 1") {
    std::vector<double> grad;
    CHECK(beta_loss({0.5}) == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));

    // Clamped endpoints: the value uses the clamped opacity, the gradient
    // vanishes there.
    const double edge = std::log(kBetaEps) + std::log(1.0 - kBetaEps);
    CHECK(beta_loss({0.0}, &grad) == doctest::Approx(edge).epsilon(1e-12));
    CHECK(grad[0] == 0.0);
    CHECK(beta_loss({1.0}, &grad) == doctest::Approx(edge).epsilon(1e-12));
    CHECK(grad[0] == 0.0);

    // Interior gradient formula and monotonic preference for the extremes.
    std::vector<double> map = {0.2, 0.5, 0.9};
    const double loss = beta_loss(map, &grad);
    CHECK(loss < 0.0);
    for (int i = 0; i < 3; ++i) {
        CHECK(grad[i] ==
              doctest::Approx((1.0 / map[i] - 1.0 / (1.0 - map[i])) / 3.0).epsilon(1e-12));
    }
    CHECK(grad[0] > 0.0);   // below 1/2, pushed down by gradient descent on +grad
    CHECK(grad[1] == doctest::Approx(0.0));
    CHECK(grad[2] < 0.0);

    Rng rng(24);
    std::vector<double> big;
    for (int i = 0; i < 60; ++i) big.push_back(rng.uniform(0.05, 0.95));
    std::vector<double> analytic;
    beta_loss(big, &analytic);
    check_gradient([&](const std::vector<double>& x) { return beta_loss(x); }, big, analytic,
                   rng, 30, 1e-7, 1e-5);

    CHECK_THROWS_AS(beta_loss({}), std::invalid_argument);
}

TEST_CASE("total loss combines the four weighted terms") {
    Rng rng(25);
    ProjectionImage rendered = random_image(13, 12, rng);
    const ProjectionImage target = random_image(13, 12, rng);
    rendered.opacity.emplace();
    for (std::size_t i = 0; i < rendered.pixel_count(); ++i) {
        rendered.opacity->push_back(rng.uniform(0.05, 0.95));
    }

    LossWeights w;
    w.l1 = 0.8;
    w.dssim = 0.2;
    w.tv = 1e-4;
    w.beta = 1e-3;

    std::vector<double> d_pixels, d_opacity;
    const LossReport report = total_loss(rendered, target, w, &d_pixels, &d_opacity);

    CHECK(report.l1 == l1_loss(rendered, target));
    CHECK(report.dssim == dssim_loss(rendered, target));
    CHECK(report.tv == tv_loss(rendered));
    CHECK(report.beta == beta_loss(*rendered.opacity));
    CHECK(report.total == w.l1 * report.l1 + w.dssim * report.dssim + w.beta * report.beta +
                              w.tv * report.tv);

    // Component gradients combine linearly with the weights.
    std::vector<double> g_l1, g_dssim, g_tv, g_beta;
    l1_loss(rendered, target, &g_l1);
    dssim_loss(rendered, target, &g_dssim);
    tv_loss(rendered, &g_tv);
    beta_loss(*rendered.opacity, &g_beta);
    REQUIRE(d_pixels.size() == rendered.pixel_count());
    REQUIRE(d_opacity.size() == rendered.pixel_count());
    for (std::size_t i = 0; i < d_pixels.size(); ++i) {
        CHECK(d_pixels[i] ==
              doctest::Approx(w.l1 * g_l1[i] + w.dssim * g_dssim[i] + w.tv * g_tv[i])
                  .epsilon(1e-15));
        CHECK(d_opacity[i] == w.beta * g_beta[i]);
    }

    // Doubling every weight doubles the total and all gradients exactly.
    LossWeights w2 = w;
    w2.l1 *= 2;
    w2.dssim *= 2;
    w2.tv *= 2;
    w2.beta *= 2;
    std::vector<double> d_pixels2, d_opacity2;
    const LossReport r2 = total_loss(rendered, target, w2, &d_pixels2, &d_opacity2);
    CHECK(r2.total == 2.0 * report.total);
    for (std::size_t i = 0; i < d_pixels.size(); ++i) {
        CHECK(d_pixels2[i] == 2.0 * d_pixels[i]);
        CHECK(d_opacity2[i] == 2.0 * d_opacity[i]);
    }
}

TEST_CASE("total loss requires an opacity map only when beta is active") {
    Rng rng(26);
    const ProjectionImage rendered = random_image(12, 11, rng);
    const ProjectionImage target = random_image(12, 11, rng);

    LossWeights w;
    w.beta = 1e-3;
    CHECK_THROWS_WITH_AS(total_loss(rendered, target, w), doctest::Contains("opacity"),
                         std::invalid_argument);

    w.beta = 0.0;
    std::vector<double> d_opacity = {1.0, 2.0};
    const LossReport report = total_loss(rendered, target, w, nullptr, &d_opacity);
    CHECK(report.beta == 0.0);
    CHECK(d_opacity.empty());

    // Opacity map of the wrong size is rejected.
    ProjectionImage bad = rendered;
    bad.opacity.emplace(3, 0.5);
    w.beta = 1e-3;
    CHECK_THROWS_AS(total_loss(bad, target, w), std::invalid_argument);
}
