#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctsplat/metrics.hpp"
#include "ctsplat/rasterizer.hpp"
#include "ctsplat/rng.hpp"
#include "test_support.hpp"

using namespace ctsplat;

TEST_CASE("psnr follows the unit-range formula") {
    ProjectionImage a(4, 4, 0.0);
    ProjectionImage b(4, 4, 0.5);
    CHECK(psnr(a, b) == doctest::Approx(-10.0 * std::log10(0.25)).epsilon(1e-12));

    b = ProjectionImage(4, 4, 0.0);
    b.at(1, 2) = 1.0;  // mse = 1/16
    CHECK(psnr(a, b) == doctest::Approx(-10.0 * std::log10(1.0 / 16.0)).epsilon(1e-12));

    CHECK(std::isinf(psnr(a, a)));
    CHECK(psnr(a, a) > 0.0);

    CHECK_THROWS_AS(psnr(a, ProjectionImage(4, 5, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(psnr(ProjectionImage(), ProjectionImage()), std::invalid_argument);
}

TEST_CASE("ssim metric equals one only for identical images") {
    Rng rng(501);
    ProjectionImage a(16, 16);
    for (double& p : a.pixels) p = rng.uniform(0.0, 1.0);
    CHECK(ssim(a, a) == 1.0);

    ProjectionImage b = a;
    for (double& p : b.pixels) p = std::min(1.0, p + 0.05);
    const double s = ssim(a, b);
    CHECK(s < 1.0);
    CHECK(s > 0.0);
    CHECK(ssim(b, a) == s);  // symmetric
}

TEST_CASE("evaluate scores clamped renders per view with sample aggregates") {
    Rng rng(502);
    const GaussianCloud cloud = testkit::random_scene(rng, 25, 16, 16, 120.0);

    std::vector<CameraPose> poses;
    std::vector<ProjectionImage> targets;
    const double angles[2] = {12.5, 80.0};
    for (int v = 0; v < 2; ++v) {
        CameraPose pose = testkit::axis_pose(16, 16, 120.0);
        pose.camera_center = Eigen::Vector3d(0.02 * v, -0.03 * v, 0.0);
        poses.push_back(pose);
        ProjectionImage target = render(cloud, pose, 16, 16);
        clamp_unit(target);
        // Offset by 0.1 where headroom allows, so the MSE is known per pixel.
        for (double& p : target.pixels) p = p <= 0.9 ? p + 0.1 : p - 0.1;
        target.view_angle_deg = angles[v];
        target.opacity.reset();
        targets.push_back(target);
    }

    const EvalReport report = evaluate(cloud, poses, targets);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.n_gaussians == cloud.size());
    CHECK(report.model_bytes == 0);  // footprint fields are the caller's job
    CHECK(report.voxel_bytes == 0);

    // Every pixel differs by exactly 0.1 after clamping, so each view's PSNR
    // is 20 dB and SSIM matches a direct recomputation.
    for (int v = 0; v < 2; ++v) {
        const EvalRow& row = report.rows[static_cast<std::size_t>(v)];
        CHECK(row.angle_deg == angles[v]);
        CHECK(row.psnr_db == doctest::Approx(20.0).epsilon(1e-9));
        ProjectionImage rendered = render(cloud, poses[static_cast<std::size_t>(v)], 16, 16);
        clamp_unit(rendered);
        CHECK(row.ssim == ssim(rendered, targets[static_cast<std::size_t>(v)]));
        CHECK(row.ssim < 1.0);
    }

    // Aggregates use the sample (n - 1) standard deviation.
    const double pm = 0.5 * (report.rows[0].psnr_db + report.rows[1].psnr_db);
    const double ps = std::sqrt((report.rows[0].psnr_db - pm) * (report.rows[0].psnr_db - pm) +
                                (report.rows[1].psnr_db - pm) * (report.rows[1].psnr_db - pm));
    CHECK(report.psnr_mean == doctest::Approx(pm).epsilon(1e-12));
    CHECK(report.psnr_stddev == doctest::Approx(ps).epsilon(1e-9));
    const double sm = 0.5 * (report.rows[0].ssim + report.rows[1].ssim);
    CHECK(report.ssim_mean == doctest::Approx(sm).epsilon(1e-12));
}

TEST_CASE("evaluate with a single view reports zero spread") {
    GaussianCloud cloud;
    Gaussian g;
    g.position = Eigen::Vector3d(0, 0, 10);
    g.opacity_logit = 0.0;
    g.intensity = 0.5;
    cloud.gaussians.push_back(g);
    const CameraPose pose = testkit::axis_pose(16, 16, 40.0);
    ProjectionImage target(16, 16, 0.25);

    const EvalReport report = evaluate(cloud, {pose}, {target});
    REQUIRE(report.rows.size() == 1);
    CHECK(report.psnr_stddev == 0.0);
    CHECK(report.ssim_stddev == 0.0);
    CHECK(report.psnr_mean == report.rows[0].psnr_db);
}

TEST_CASE("evaluate validates its inputs") {
    GaussianCloud cloud;
    cloud.gaussians.emplace_back();
    const CameraPose pose = testkit::axis_pose(16, 16, 40.0);
    CHECK_THROWS_WITH_AS(evaluate(cloud, {}, {}), doctest::Contains("empty"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(evaluate(cloud, {pose}, {}), doctest::Contains("differ"),
                         std::invalid_argument);
}
