// io.hpp: persistence formats.
//
//  - Native cloud files: binary little-endian PLY, 12 float32 properties per
//    vertex (x, y, z, log_scale_0..2, rot_w, rot_x, rot_y, rot_z,
//    opacity_logit, intensity); the file is exactly header + 48 * N bytes.
//    Parameters are persisted at float32 precision, so one save/load cycle
//    canonicalizes a cloud and is byte-stable afterwards.
//  - Compatibility cloud files: the splat-viewer PLY layout (positions, zero
//    normals, spherical-harmonic slots with the intensity folded into the DC
//    terms, opacity logit, log scales, quaternion).
//  - Images: 16-bit grayscale PNG, value v stored as round(v * 65535), plus
//    an optional raw float64 sidecar for lossless exchange.
//  - Scene manifests: JSON with the scan geometry, view table, and the DRR
//    normalization constant; unknown top-level fields survive a round-trip.
//  - Training log and evaluation reports: CSV.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctsplat/cloud.hpp"
#include "ctsplat/geometry.hpp"
#include "ctsplat/image.hpp"
#include "ctsplat/losses.hpp"
#include "ctsplat/metrics.hpp"

namespace ctsplat {

// ---- Cloud PLY ----

// Writes the native layout. Returns the total file size in bytes
// (header + 48 * N).
std::uint64_t write_cloud_ply(const GaussianCloud& cloud, const std::filesystem::path& path);

// Reads a native-layout file. Throws std::runtime_error naming the byte
// offset for malformed headers, unknown format versions, property-layout
// mismatches, and truncated or oversized bodies.
GaussianCloud read_cloud_ply(const std::filesystem::path& path);

// Writes the third-party splat-viewer layout. Intensity i maps to the DC
// color slots as (i - 0.5) / 0.28209479177387814 so viewers display the
// intended gray level; higher-order harmonic slots are zero.
std::uint64_t write_cloud_ply_compat(const GaussianCloud& cloud,
                                     const std::filesystem::path& path);

// ---- Images ----

// 16-bit grayscale PNG. Requires all pixels in [0, 1]; round-trip error is
// at most 1/131070 per pixel. Throws std::invalid_argument for out-of-range
// or non-finite pixels and std::runtime_error for filesystem/encoding
// failures.
void write_image(const ProjectionImage& img, const std::filesystem::path& path);

// Reads a 16-bit grayscale PNG written by write_image. Throws
// std::runtime_error for unreadable files and unsupported bit depths or
// color types. view_angle_deg is not stored in PNG; callers stamp it.
ProjectionImage read_image(const std::filesystem::path& path);

// Lossless raw sidecar (little-endian float64), used where PNG quantization
// would disturb oracle comparisons.
void write_image_raw(const ProjectionImage& img, const std::filesystem::path& path);
ProjectionImage read_image_raw(const std::filesystem::path& path);

// ---- Scene manifest ----

struct ManifestView {
    double angle_deg = 0.0;
    std::string image_path;  // relative paths resolve against the manifest directory
    std::optional<std::string> split_hint;
};

struct PhantomInfo {
    Eigen::Vector3i dims = Eigen::Vector3i::Zero();
    std::uint64_t seed = 0;
};

struct SceneManifest {
    int format_version = 1;
    ScanGeometry geometry;
    double normalization_constant = 1.0;
    std::optional<PhantomInfo> phantom;
    std::vector<ManifestView> views;
    // Unknown top-level fields from a parsed file, preserved on write.
    nlohmann::ordered_json extras = nlohmann::ordered_json::object();
};

// Parses and validates a manifest. Throws std::runtime_error naming the
// missing or malformed field, for unsupported format versions, and for
// duplicate view angles.
SceneManifest read_manifest(const std::filesystem::path& path);

// Writes the canonical form (fixed key order, two-space indent). Writing
// the result of read_manifest reproduces the file byte for byte.
void write_manifest(const SceneManifest& manifest, const std::filesystem::path& path);

// ---- Training log ----

struct TrainLogRow {
    int iteration = 0;
    double l1 = 0.0, dssim = 0.0, tv = 0.0, beta = 0.0, total = 0.0;
    std::size_t n_gaussians = 0;
    double ms_per_iter = 0.0;
};

// Streams CSV rows; the header is written on construction.
class TrainLogWriter {
public:
    explicit TrainLogWriter(const std::filesystem::path& path);
    ~TrainLogWriter();
    TrainLogWriter(const TrainLogWriter&) = delete;
    TrainLogWriter& operator=(const TrainLogWriter&) = delete;
    void append(const TrainLogRow& row);

private:
    std::FILE* file_;
};

// ---- Evaluation report ----

// Per-view rows, aggregate rows, and the footprint fields, as CSV. Infinite
// PSNR serializes as the token "inf".
void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);

// Human-readable table of the same report.
void print_eval_report(const EvalReport& report, std::ostream& out);

}  // namespace ctsplat
