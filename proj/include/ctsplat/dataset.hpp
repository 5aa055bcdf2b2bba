// dataset.hpp: ties the phantom projector to the on-disk dataset layout.
#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "ctsplat/geometry.hpp"
#include "ctsplat/image.hpp"
#include "ctsplat/io.hpp"
#include "ctsplat/phantom.hpp"

namespace ctsplat {

struct GenerateOptions {
    // Also write lossless float64 sidecars next to each PNG.
    bool raw_sidecars = false;
};

// Projects the phantom at every orbit pose, normalizes the whole scan by its
// largest line integral, and writes view_NNNN.png images plus a scene.json
// manifest into out_dir (created if missing). Regenerating with identical
// inputs produces bit-identical files. Returns the written manifest.
SceneManifest generate_dataset(const VoxelPhantom& phantom, const ScanGeometry& geom,
                               const std::filesystem::path& out_dir,
                               std::optional<PhantomInfo> phantom_info = std::nullopt,
                               const GenerateOptions& options = {});

// A manifest with its images loaded and per-view poses reconstructed from
// the recorded geometry. Image paths resolve relative to the manifest.
struct Dataset {
    SceneManifest manifest;
    std::vector<CameraPose> poses;
    std::vector<ProjectionImage> images;
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace ctsplat
