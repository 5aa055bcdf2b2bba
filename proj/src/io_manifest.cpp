#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ctsplat/io.hpp"

namespace ctsplat {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void manifest_error(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error("manifest " + path.string() + ": " + what);
}

const json& require_field(const json& obj, const char* key, const char* scope,
                          const std::filesystem::path& path) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        manifest_error(path, std::string("missing field ") + scope + key);
    }
    return *it;
}

double require_number(const json& obj, const char* key, const char* scope,
                      const std::filesystem::path& path) {
    const json& v = require_field(obj, key, scope, path);
    if (!v.is_number()) {
        manifest_error(path, std::string("field ") + scope + key + " must be a number");
    }
    return v.get<double>();
}

int require_int(const json& obj, const char* key, const char* scope,
                const std::filesystem::path& path) {
    const json& v = require_field(obj, key, scope, path);
    if (!v.is_number_integer()) {
        manifest_error(path, std::string("field ") + scope + key + " must be an integer");
    }
    return v.get<int>();
}

constexpr const char* kKnownKeys[] = {"format_version", "geometry", "normalization_constant",
                                      "phantom", "views"};

bool is_known_key(const std::string& key) {
    for (const char* k : kKnownKeys) {
        if (key == k) return true;
    }
    return false;
}

}  // namespace

SceneManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        manifest_error(path, std::string("parse error: ") + e.what());
    }
    if (!root.is_object()) manifest_error(path, "top level must be an object");

    SceneManifest m;
    m.format_version = require_int(root, "format_version", "", path);
    if (m.format_version != 1) {
        manifest_error(path,
                       "unsupported format_version " + std::to_string(m.format_version));
    }

    const json& g = require_field(root, "geometry", "", path);
    if (!g.is_object()) manifest_error(path, "field geometry must be an object");
    m.geometry.source_to_isocenter = require_number(g, "source_to_isocenter", "geometry.", path);
    m.geometry.source_to_detector = require_number(g, "source_to_detector", "geometry.", path);
    m.geometry.detector_width = require_number(g, "detector_width", "geometry.", path);
    m.geometry.detector_height = require_number(g, "detector_height", "geometry.", path);
    m.geometry.image_width = require_int(g, "image_width", "geometry.", path);
    m.geometry.image_height = require_int(g, "image_height", "geometry.", path);
    m.geometry.n_views = require_int(g, "n_views", "geometry.", path);
    m.geometry.angular_start_deg = require_number(g, "angular_start_deg", "geometry.", path);
    m.geometry.angular_step_deg = require_number(g, "angular_step_deg", "geometry.", path);
    m.geometry.fov_side = require_number(g, "fov_side", "geometry.", path);
    m.geometry.validate();

    m.normalization_constant = require_number(root, "normalization_constant", "", path);
    if (!(m.normalization_constant > 0.0)) {
        manifest_error(path, "normalization_constant must be positive");
    }

    if (auto it = root.find("phantom"); it != root.end()) {
        const json& ph = *it;
        PhantomInfo info;
        const json& dims = require_field(ph, "dims", "phantom.", path);
        if (!dims.is_array() || dims.size() != 3) {
            manifest_error(path, "field phantom.dims must be an array of 3 integers");
        }
        for (int k = 0; k < 3; ++k) info.dims[k] = dims[k].get<int>();
        info.seed = require_field(ph, "seed", "phantom.", path).get<std::uint64_t>();
        m.phantom = info;
    }

    const json& views = require_field(root, "views", "", path);
    if (!views.is_array()) manifest_error(path, "field views must be an array");
    std::set<double> seen_angles;
    for (const json& v : views) {
        ManifestView view;
        view.angle_deg = require_number(v, "angle_deg", "views[].", path);
        const json& p = require_field(v, "image_path", "views[].", path);
        if (!p.is_string()) manifest_error(path, "field views[].image_path must be a string");
        view.image_path = p.get<std::string>();
        if (auto hint = v.find("split_hint"); hint != v.end()) {
            view.split_hint = hint->get<std::string>();
        }
        if (!seen_angles.insert(view.angle_deg).second) {
            manifest_error(path, "duplicate view angle " + std::to_string(view.angle_deg));
        }
        m.views.push_back(std::move(view));
    }

    m.extras = json::object();
    for (const auto& [key, value] : root.items()) {
        if (!is_known_key(key)) m.extras[key] = value;
    }
    return m;
}

void write_manifest(const SceneManifest& manifest, const std::filesystem::path& path) {
    json root;
    root["format_version"] = manifest.format_version;
    json g;
    g["source_to_isocenter"] = manifest.geometry.source_to_isocenter;
    g["source_to_detector"] = manifest.geometry.source_to_detector;
    g["detector_width"] = manifest.geometry.detector_width;
    g["detector_height"] = manifest.geometry.detector_height;
    g["image_width"] = manifest.geometry.image_width;
    g["image_height"] = manifest.geometry.image_height;
    g["n_views"] = manifest.geometry.n_views;
    g["angular_start_deg"] = manifest.geometry.angular_start_deg;
    g["angular_step_deg"] = manifest.geometry.angular_step_deg;
    g["fov_side"] = manifest.geometry.fov_side;
    root["geometry"] = std::move(g);
    root["normalization_constant"] = manifest.normalization_constant;
    if (manifest.phantom) {
        json ph;
        ph["dims"] = {manifest.phantom->dims.x(), manifest.phantom->dims.y(),
                      manifest.phantom->dims.z()};
        ph["seed"] = manifest.phantom->seed;
        root["phantom"] = std::move(ph);
    }
    json views = json::array();
    for (const ManifestView& v : manifest.views) {
        json jv;
        jv["angle_deg"] = v.angle_deg;
        jv["image_path"] = v.image_path;
        if (v.split_hint) jv["split_hint"] = *v.split_hint;
        views.push_back(std::move(jv));
    }
    root["views"] = std::move(views);
    for (const auto& [key, value] : manifest.extras.items()) {
        root[key] = value;
    }

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << root.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace ctsplat
