#include "ctsplat/dataset.hpp"

#include <cstdio>
#include <stdexcept>
#include <utility>

namespace ctsplat {

namespace {

std::string view_basename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "view_%04d", index);
    return buf;
}

}  // namespace

SceneManifest generate_dataset(const VoxelPhantom& phantom, const ScanGeometry& geom,
                               const std::filesystem::path& out_dir,
                               std::optional<PhantomInfo> phantom_info,
                               const GenerateOptions& options) {
    geom.validate();
    std::filesystem::create_directories(out_dir);

    const std::vector<CameraPose> poses = orbit_poses(geom);
    std::vector<ProjectionImage> raw;
    raw.reserve(poses.size());
    double peak = 0.0;
    for (const CameraPose& pose : poses) {
        raw.push_back(drr_project_raw(phantom, pose, geom));
        for (double v : raw.back().pixels) peak = std::max(peak, v);
    }
    if (!(peak > 0.0)) throw std::runtime_error("dataset: phantom projects to an all-zero scan");

    SceneManifest manifest;
    manifest.geometry = geom;
    manifest.normalization_constant = peak;
    manifest.phantom = std::move(phantom_info);
    manifest.views.reserve(poses.size());
    for (size_t i = 0; i < poses.size(); ++i) {
        ProjectionImage& img = raw[i];
        for (double& v : img.pixels) v = std::min(v / peak, 1.0);
        const std::string base = view_basename(static_cast<int>(i));
        write_image(img, out_dir / (base + ".png"));
        if (options.raw_sidecars) write_image_raw(img, out_dir / (base + ".f64"));

        ManifestView view;
        view.angle_deg = poses[i].view_angle_deg;
        view.image_path = base + ".png";
        manifest.views.push_back(std::move(view));
    }

    write_manifest(manifest, out_dir / "scene.json");
    return manifest;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    Dataset ds;
    ds.manifest = read_manifest(manifest_path);
    const std::filesystem::path dir = manifest_path.parent_path();
    ds.poses.reserve(ds.manifest.views.size());
    ds.images.reserve(ds.manifest.views.size());
    for (const ManifestView& view : ds.manifest.views) {
        ds.poses.push_back(pose_for_angle(ds.manifest.geometry, view.angle_deg));
        ProjectionImage img = read_image(dir / view.image_path);
        if (img.width != ds.manifest.geometry.image_width ||
            img.height != ds.manifest.geometry.image_height) {
            throw std::runtime_error("dataset: image " + view.image_path +
                                     " does not match the manifest geometry");
        }
        img.view_angle_deg = view.angle_deg;
        ds.images.push_back(std::move(img));
    }
    return ds;
}

}  // namespace ctsplat
