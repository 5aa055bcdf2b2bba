// ctsplat: dataset generation, training, rendering, and evaluation commands.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "ctsplat/cloud.hpp"
#include "ctsplat/dataset.hpp"
#include "ctsplat/geometry.hpp"
#include "ctsplat/io.hpp"
#include "ctsplat/metrics.hpp"
#include "ctsplat/phantom.hpp"
#include "ctsplat/rasterizer.hpp"
#include "ctsplat/threading.hpp"
#include "ctsplat/trainer.hpp"

namespace fs = std::filesystem;
using namespace ctsplat;

namespace {

// "%g" of the percentage: 0.25 -> "25", 0.05 -> "5".
std::string fraction_tag(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", fraction * 100.0);
    return buf;
}

std::string angle_name(const char* prefix, double angle_deg) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%07.3f.png", prefix, angle_deg);
    return buf;
}

struct GenerateParams {
    std::string out_dir;
    int dims = 128;
    std::uint64_t seed = 0;
    bool raw_sidecars = false;
    ScanGeometry geom;
};

struct TrainParams {
    std::string manifest;
    std::string out_dir;
    TrainConfig config;
    int n_init = 10000;
    double init_opacity = 0.1;
    double init_intensity = 0.5;
    bool compat_ply = false;
    double lr_all = -1.0;  // >= 0 overrides every group rate
};

struct RenderParams {
    std::string model;
    std::string manifest;
    std::string out_dir;
    std::vector<double> angles;
    bool all_test = false;
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
    double background = 0.0;
};

struct EvaluateParams {
    std::string model;
    std::string manifest;
    std::string out_csv;
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
    double background = 0.0;
};

struct SweepParams {
    TrainParams train;
    std::vector<double> fractions = {0.5, 0.25, 0.10, 0.05};
};

GaussianCloud make_init_cloud(const ScanGeometry& geom, const TrainParams& p) {
    Ellipsoid region;
    region.center = Eigen::Vector3d::Zero();
    region.semi_axes = Eigen::Vector3d(0.4, 0.4, 0.5) * geom.fov_side;
    return init_ellipsoid_cloud(region, p.n_init, p.config.seed, p.init_opacity,
                                p.init_intensity);
}

TrainConfig resolve_config(const TrainParams& p) {
    TrainConfig config = p.config;
    if (p.lr_all >= 0.0) {
        config.lr_position = p.lr_all;
        config.lr_position_final = p.lr_all;
        config.lr_log_scale = p.lr_all;
        config.lr_rotation = p.lr_all;
        config.lr_opacity = p.lr_all;
        config.lr_intensity = p.lr_all;
    }
    return config;
}

std::vector<TrainView> gather_train_views(const Dataset& ds, const ViewSplit& split) {
    std::vector<TrainView> views;
    views.reserve(split.train.size());
    for (int i : split.train)
        views.push_back(TrainView{ds.poses[static_cast<std::size_t>(i)],
                                  ds.images[static_cast<std::size_t>(i)]});
    return views;
}

// Trains one cloud and writes model.ply plus the log under out_dir. Returns
// the trained cloud and the serialized model size.
std::pair<GaussianCloud, std::uint64_t> run_training(const Dataset& ds, const TrainParams& p,
                                                     const TrainConfig& config,
                                                     const fs::path& out_dir) {
    const ViewSplit split =
        split_views(static_cast<int>(ds.images.size()), config.train_fraction, config.seed);
    std::cout << "training views: " << split.train.size() << " of " << ds.images.size() << " ("
              << split.test.size() << " held out)\n";

    fs::create_directories(out_dir);
    GaussianCloud cloud = make_init_cloud(ds.manifest.geometry, p);
    Trainer trainer(config, std::move(cloud), gather_train_views(ds, split));

    TrainLogWriter log(out_dir / "train_log.csv");
    const auto checkpoint = [&out_dir](int iteration, const GaussianCloud& snapshot) {
        char name[64];
        std::snprintf(name, sizeof(name), "checkpoint_%06d.ply", iteration);
        write_cloud_ply(snapshot, out_dir / name);
    };
    trainer.run(&log, checkpoint);

    const std::uint64_t bytes = write_cloud_ply(trainer.cloud(), out_dir / "model.ply");
    if (p.compat_ply) write_cloud_ply_compat(trainer.cloud(), out_dir / "model_compat.ply");
    std::cout << "model.ply: " << trainer.cloud().gaussians.size() << " gaussians, " << bytes
              << " bytes\n";
    return {trainer.cloud(), bytes};
}

EvalReport evaluate_on_split(const GaussianCloud& cloud, const Dataset& ds, double fraction,
                             std::uint64_t seed, double background, std::uint64_t model_bytes) {
    const ViewSplit split = split_views(static_cast<int>(ds.images.size()), fraction, seed);
    std::vector<CameraPose> poses;
    std::vector<ProjectionImage> targets;
    poses.reserve(split.test.size());
    targets.reserve(split.test.size());
    for (int i : split.test) {
        poses.push_back(ds.poses[static_cast<std::size_t>(i)]);
        targets.push_back(ds.images[static_cast<std::size_t>(i)]);
    }
    EvalReport report = evaluate(cloud, poses, targets, background);
    report.train_fraction = fraction;
    report.model_bytes = model_bytes;
    if (ds.manifest.phantom) {
        const Eigen::Vector3i d = ds.manifest.phantom->dims;
        report.voxel_bytes = 4ull * static_cast<std::uint64_t>(d.x()) *
                             static_cast<std::uint64_t>(d.y()) * static_cast<std::uint64_t>(d.z());
    }
    return report;
}

void cmd_generate(const GenerateParams& p) {
    ScanGeometry geom = p.geom;  // --image-size / --detector-size set square shapes
    geom.image_height = geom.image_width;
    geom.detector_height = geom.detector_width;
    const Eigen::Vector3i dims = Eigen::Vector3i::Constant(p.dims);
    const VoxelPhantom phantom = make_head_phantom(dims, geom.fov_side, p.seed);
    GenerateOptions options;
    options.raw_sidecars = p.raw_sidecars;
    const SceneManifest manifest =
        generate_dataset(phantom, geom, p.out_dir, PhantomInfo{dims, p.seed}, options);
    std::cout << "wrote " << manifest.views.size() << " views ("
              << geom.image_width << "x" << geom.image_height << ") and scene.json to "
              << p.out_dir << "\n";
}

void cmd_train(const TrainParams& p) {
    const Dataset ds = load_dataset(p.manifest);
    run_training(ds, p, resolve_config(p), p.out_dir);
}

void cmd_render(const RenderParams& p) {
    const GaussianCloud cloud = read_cloud_ply(p.model);
    const SceneManifest manifest = read_manifest(p.manifest);
    const ScanGeometry& geom = manifest.geometry;
    fs::create_directories(p.out_dir);

    int written = 0;
    const auto emit = [&](const char* prefix, double angle) {
        const CameraPose pose = pose_for_angle(geom, angle);
        ProjectionImage img =
            render(cloud, pose, geom.image_width, geom.image_height, p.background);
        clamp_unit(img);
        write_image(img, fs::path(p.out_dir) / angle_name(prefix, angle));
        ++written;
    };
    for (double angle : p.angles) emit("render", angle);
    if (p.all_test) {
        const ViewSplit split =
            split_views(static_cast<int>(manifest.views.size()), p.train_fraction, p.seed);
        for (int i : split.test)
            emit("test", manifest.views[static_cast<std::size_t>(i)].angle_deg);
    }
    std::cout << "wrote " << written << " images to " << p.out_dir << "\n";
}

void cmd_evaluate(const EvaluateParams& p) {
    const GaussianCloud cloud = read_cloud_ply(p.model);
    const Dataset ds = load_dataset(p.manifest);
    const EvalReport report = evaluate_on_split(cloud, ds, p.train_fraction, p.seed,
                                                p.background, fs::file_size(p.model));
    print_eval_report(report, std::cout);
    if (!p.out_csv.empty()) write_eval_csv(report, p.out_csv);
}

void cmd_sweep(const SweepParams& p) {
    const Dataset ds = load_dataset(p.train.manifest);
    const fs::path out_root(p.train.out_dir);
    std::vector<EvalReport> reports;
    for (double fraction : p.fractions) {
        const std::string tag = fraction_tag(fraction);
        std::cout << "== train fraction " << fraction << " ==\n";
        TrainConfig config = resolve_config(p.train);
        config.train_fraction = fraction;
        const fs::path out_dir = out_root / ("f" + tag);
        const auto [cloud, bytes] = run_training(ds, p.train, config, out_dir);
        EvalReport report =
            evaluate_on_split(cloud, ds, fraction, config.seed, config.background, bytes);
        write_eval_csv(report, out_dir / "eval.csv");
        reports.push_back(std::move(report));
    }
    std::cout << "\nfraction  psnr_mean  ssim_mean  gaussians\n";
    for (const EvalReport& r : reports) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-8g  %9.3f  %9.4f  %9zu\n", r.train_fraction,
                      r.psnr_mean, r.ssim_mean, r.n_gaussians);
        std::cout << line;
    }
}

void add_train_flags(CLI::App* cmd, TrainParams& p) {
    cmd->add_option("--manifest", p.manifest, "Scene manifest JSON")->required();
    cmd->add_option("--out", p.out_dir, "Output directory")->required();
    TrainConfig& c = p.config;
    cmd->add_option("--iterations", c.iterations, "Optimization steps");
    cmd->add_option("--train-fraction", c.train_fraction, "Fraction of views used for training");
    cmd->add_option("--seed", c.seed, "RNG seed for init, view order, and density control");
    cmd->add_option("--n-init", p.n_init, "Initial Gaussian count");
    cmd->add_option("--init-opacity", p.init_opacity, "Initial opacity in (0, 1)");
    cmd->add_option("--init-intensity", p.init_intensity, "Initial intensity");
    cmd->add_option("--background", c.background, "Background value composited behind splats");
    cmd->add_option("--w-l1", c.weights.l1, "L1 weight");
    cmd->add_option("--w-dssim", c.weights.dssim, "D-SSIM weight");
    cmd->add_option("--w-beta", c.weights.beta, "Beta sparsity weight");
    cmd->add_option("--w-tv", c.weights.tv, "Total-variation weight");
    cmd->add_option("--lr-position", c.lr_position, "Initial position rate (x scene extent)");
    cmd->add_option("--lr-position-final", c.lr_position_final,
                    "Final position rate (x scene extent)");
    cmd->add_option("--lr-scale", c.lr_log_scale, "Log-scale rate");
    cmd->add_option("--lr-rotation", c.lr_rotation, "Rotation rate");
    cmd->add_option("--lr-opacity", c.lr_opacity, "Opacity-logit rate");
    cmd->add_option("--lr-intensity", c.lr_intensity, "Intensity rate");
    cmd->add_option("--lr-all", p.lr_all, "Override every learning rate with one value");
    cmd->add_option("--densify-from", c.densify_from, "First density-control iteration");
    cmd->add_option("--densify-until", c.densify_until, "Last density-control iteration");
    cmd->add_option("--densify-interval", c.densify_interval, "Iterations between control events");
    cmd->add_option("--densify-grad-threshold", c.densify_grad_threshold,
                    "Mean screen-space gradient that triggers clone/split");
    cmd->add_option("--prune-opacity", c.prune_opacity_threshold, "Opacity below which to prune");
    cmd->add_option("--opacity-reset-interval", c.opacity_reset_interval,
                    "Iterations between opacity resets (0 disables)");
    cmd->add_option("--split-factor", c.split_scale_factor, "Scale divisor for split children");
    cmd->add_option("--checkpoint-interval", c.checkpoint_interval,
                    "Iterations between checkpoints (0 disables)");
    cmd->add_flag("--compat-ply", p.compat_ply, "Also write a splat-viewer layout PLY");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-splat CT: DRR dataset generation, fitting, and evaluation"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "INI config file; command-line flags take precedence");

    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: all cores)")
        ->check(CLI::PositiveNumber);

    GenerateParams gen;
    CLI::App* cmd_gen = app.add_subcommand("generate", "Synthesize a phantom DRR dataset");
    cmd_gen->add_option("--out", gen.out_dir, "Output directory")->required();
    cmd_gen->add_option("--dims", gen.dims, "Phantom voxels per side")->check(CLI::PositiveNumber);
    cmd_gen->add_option("--seed", gen.seed, "Phantom inclusion seed");
    cmd_gen->add_option("--n-views", gen.geom.n_views, "Views on the orbit")
        ->check(CLI::PositiveNumber);
    cmd_gen->add_option("--start", gen.geom.angular_start_deg, "First view angle, degrees");
    cmd_gen->add_option("--step", gen.geom.angular_step_deg, "Angular step, degrees");
    cmd_gen->add_option("--image-size", gen.geom.image_width, "Detector pixels per side")
        ->check(CLI::PositiveNumber);
    cmd_gen->add_option("--detector-size", gen.geom.detector_width, "Detector side, mm");
    cmd_gen->add_option("--sid", gen.geom.source_to_isocenter, "Source-isocenter distance, mm");
    cmd_gen->add_option("--sdd", gen.geom.source_to_detector, "Source-detector distance, mm");
    cmd_gen->add_option("--fov", gen.geom.fov_side, "Cubic field-of-view side, mm");
    cmd_gen->add_flag("--raw-sidecars", gen.raw_sidecars, "Write float64 sidecars next to PNGs");

    TrainParams tr;
    CLI::App* cmd_tr = app.add_subcommand("train", "Fit a Gaussian cloud to a dataset");
    add_train_flags(cmd_tr, tr);

    RenderParams rn;
    CLI::App* cmd_rn = app.add_subcommand("render", "Render views from a trained model");
    cmd_rn->add_option("--model", rn.model, "Model PLY")->required();
    cmd_rn->add_option("--manifest", rn.manifest, "Scene manifest (geometry source)")->required();
    cmd_rn->add_option("--out", rn.out_dir, "Output directory")->required();
    const CLI::Validator half_open_angle(
        [](std::string& s) -> std::string {
            try {
                const double v = std::stod(s);
                if (!(v >= 0.0 && v < 360.0)) return "angle must lie in [0, 360): " + s;
            } catch (const std::exception&) {
                return "not an angle: " + s;
            }
            return {};
        },
        "ANGLE in [0, 360)");
    cmd_rn
        ->add_option("--angles", rn.angles,
                     "View angles in degrees, each in [0, 360)")
        ->delimiter(',')
        ->check(half_open_angle);
    cmd_rn->add_flag("--all-test", rn.all_test, "Render every held-out view");
    cmd_rn->add_option("--train-fraction", rn.train_fraction, "Split used by --all-test");
    cmd_rn->add_option("--seed", rn.seed, "Split seed used by --all-test");
    cmd_rn->add_option("--background", rn.background, "Background value");

    EvaluateParams ev;
    CLI::App* cmd_ev = app.add_subcommand("evaluate", "Score a model on held-out views");
    cmd_ev->add_option("--model", ev.model, "Model PLY")->required();
    cmd_ev->add_option("--manifest", ev.manifest, "Scene manifest JSON")->required();
    cmd_ev->add_option("--train-fraction", ev.train_fraction, "Training split to exclude");
    cmd_ev->add_option("--seed", ev.seed, "Split seed");
    cmd_ev->add_option("--background", ev.background, "Background value");
    cmd_ev->add_option("--out", ev.out_csv, "Also write the report as CSV");

    SweepParams sw;
    CLI::App* cmd_sw = app.add_subcommand("sweep", "Train and evaluate across view fractions");
    add_train_flags(cmd_sw, sw.train);
    cmd_sw->add_option("--fractions", sw.fractions, "Training fractions to sweep")
        ->delimiter(',');

    cmd_gen->callback([&] { cmd_generate(gen); });
    cmd_tr->callback([&] { cmd_train(tr); });
    cmd_rn->callback([&] {
        if (rn.angles.empty() && !rn.all_test)
            throw CLI::ValidationError("render: pass --angles and/or --all-test");
        cmd_render(rn);
    });
    cmd_ev->callback([&] { cmd_evaluate(ev); });
    cmd_sw->callback([&] { cmd_sweep(sw); });

    // Subcommand callbacks run inside parse(); apply the thread cap first.
    app.parse_complete_callback([&] {
        if (threads > 0) set_thread_count(threads);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
