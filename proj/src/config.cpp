#include "iabev/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "iabev/util.hpp"

namespace iabev::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& context, const std::string& message) {
    throw std::runtime_error("config: " + context + ": " + message);
}

/// Tracks which keys of a JSON object were consumed; leftover keys are
/// rejected so typos fail fast.
class StrictObject {
  public:
    StrictObject(const json& j, std::string context) : j_(j), context_(std::move(context)) {
        if (!j_.is_object()) fail(context_, "expected an object");
    }

    ~StrictObject() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key)) fail(context_, "unknown field '" + key + "'");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& at(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    void read(const std::string& key, T& target) {
        if (!has(key)) return;
        try {
            target = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            fail(context_ + "." + key, e.what());
        }
    }

    const std::string& context() const { return context_; }

  private:
    const json& j_;
    std::string context_;
    std::set<std::string> seen_;
};

void parse_camera(const json& j, scene::SceneGenConfig& scene) {
    StrictObject o(j, "camera");
    o.read("width", scene.intrinsics.width);
    o.read("height", scene.intrinsics.height);
    o.read("fx", scene.intrinsics.fx);
    o.read("fy", scene.intrinsics.fy);
    o.read("cx", scene.intrinsics.cx);
    o.read("cy", scene.intrinsics.cy);
    o.read("height_above_ground", scene.camera_height);
    o.read("yaws", scene.camera_yaws);
}

void parse_ego(const json& j, scene::SceneGenConfig& scene) {
    StrictObject o(j, "ego_motion");
    if (o.has("translation")) {
        const auto t = o.at("translation").get<std::vector<double>>();
        if (t.size() != 3) fail("ego_motion.translation", "expected 3 components");
        scene.ego_translation = {t[0], t[1], t[2]};
    }
    o.read("yaw", scene.ego_yaw);
}

void parse_objects(const json& j, scene::SceneGenConfig& scene) {
    if (!j.is_object()) fail("objects", "expected an object of category counts");
    scene.object_counts.clear();
    for (const auto& [key, value] : j.items()) {
        scene::Category cat;
        try {
            cat = scene::category_from_name(key);
        } catch (const std::domain_error& e) {
            fail("objects", e.what());
        }
        scene.object_counts[cat] = value.get<int>();
    }
}

void parse_placement(const json& j, scene::SceneGenConfig& scene) {
    StrictObject o(j, "placement");
    o.read("depth_min", scene.depth_min);
    o.read("depth_max", scene.depth_max);
    o.read("lateral_min", scene.lateral_min);
    o.read("lateral_max", scene.lateral_max);
    o.read("yaw_range", scene.yaw_range);
    o.read("min_bearing_gap", scene.min_bearing_gap);
    o.read("max_retries", scene.max_retries);
}

void parse_bins(const json& j, BinsConfig& bins) {
    StrictObject o(j, "bins");
    o.read("min", bins.d_min);
    o.read("max", bins.d_max);
    o.read("count", bins.count);
}

void parse_features(const json& j, scene::FeatureConfig& f) {
    StrictObject o(j, "features");
    o.read("channels", f.channels);
    o.read("quantization", f.quantization);
    o.read("noise_sigma", f.noise_sigma);
    o.read("scale", f.scale);
}

void parse_lidar(const json& j, LidarConfig& l) {
    StrictObject o(j, "lidar");
    o.read("density", l.density);
    o.read("outlier_rate", l.outlier_rate);
    o.read("outlier_shift", l.outlier_shift);
}

void parse_sbl(const json& j, RunConfig& cfg) {
    StrictObject o(j, "sbl");
    o.read("enabled", cfg.sbl_enabled);
    o.read("schedule", cfg.sbl.schedule);
    o.read("sigma_t", cfg.sbl.sigma_t);
    o.read("temperature", cfg.sbl.temperature);
}

void parse_spm(const json& j, RunConfig& cfg) {
    StrictObject o(j, "spm");
    if (o.has("spreads")) {
        const auto s = o.at("spreads").get<std::vector<double>>();
        if (s.size() != mono::kNumGroups) fail("spm.spreads", "expected 6 group spreads");
        std::copy(s.begin(), s.end(), cfg.spreads.spread.begin());
    }
}

void parse_weights(const json& j, mono::LossWeights& w) {
    StrictObject o(j, "loss_weights");
    o.read("det", w.det);
    o.read("ce", w.ce);
    o.read("abs", w.abs);
    o.read("rel", w.rel);
}

void parse_bev(const json& j, RunConfig& cfg) {
    StrictObject o(j, "bev");
    o.read("extent_x", cfg.bev.extent_x);
    o.read("extent_y", cfg.bev.extent_y);
    o.read("cell", cfg.bev.cell);
    if (o.has("kernel")) {
        const auto k = o.at("kernel").get<std::string>();
        if (k == "nearest")
            cfg.bev.bilinear = false;
        else if (k == "bilinear")
            cfg.bev.bilinear = true;
        else
            fail("bev.kernel", "expected 'nearest' or 'bilinear'");
    }
}

}  // namespace

RunConfig::RunConfig() {
    scene.intrinsics = {610.0, 610.0, 159.5, 95.5, 320, 192};
    scene.ego_translation = {0.3, 0.0, 0.0};
    scene.object_counts = {{scene::Category::kCar, 2}, {scene::Category::kPedestrian, 1}};
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: parse error: ") + e.what());
    }

    RunConfig cfg;
    cfg.digest = fnv1a({text.data(), text.size()});
    {
        StrictObject root(j, "root");
        if (!root.has("version")) fail("root", "missing required field 'version'");
        root.at("version").get_to(cfg.version);
        if (cfg.version != 1) fail("root.version", "unsupported schema version");

        if (root.has("camera")) parse_camera(root.at("camera"), cfg.scene);
        if (root.has("ego_motion")) parse_ego(root.at("ego_motion"), cfg.scene);
        if (root.has("objects")) parse_objects(root.at("objects"), cfg.scene);
        if (root.has("placement")) parse_placement(root.at("placement"), cfg.scene);
        if (root.has("bins")) parse_bins(root.at("bins"), cfg.bins);
        if (root.has("features")) parse_features(root.at("features"), cfg.features);
        if (root.has("lidar")) parse_lidar(root.at("lidar"), cfg.lidar);
        if (root.has("sbl")) parse_sbl(root.at("sbl"), cfg);
        if (root.has("spm")) parse_spm(root.at("spm"), cfg);
        if (root.has("loss_weights")) parse_weights(root.at("loss_weights"), cfg.weights);
        if (root.has("detection_loss")) root.at("detection_loss").get_to(cfg.detection_loss);
        if (root.has("bev")) parse_bev(root.at("bev"), cfg);
        if (root.has("fusion")) {
            const auto f = root.at("fusion").get<std::string>();
            if (f == "prob")
                cfg.fusion = bev::FusionMode::kProbability;
            else if (f == "logit")
                cfg.fusion = bev::FusionMode::kLogit;
            else
                fail("root.fusion", "expected 'prob' or 'logit'");
        }
    }
    cfg.scene.intrinsics.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace iabev::config
