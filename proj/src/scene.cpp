#include "iabev/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "iabev/util.hpp"

namespace iabev::scene {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Matrix3d yaw_rotation(double yaw) {
    return Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

// World (X right, Y forward, Z up) -> camera (x right, y down, z forward),
// for a camera at `center` rotated by `yaw` about world Z.
geometry::RigidTransform camera_pose(const Eigen::Vector3d& center, double yaw) {
    Eigen::Matrix3d axes;  // rows: camera axes expressed in world coordinates
    axes << 1, 0, 0,
            0, 0, -1,
            0, 1, 0;
    const Eigen::Matrix3d r = axes * yaw_rotation(yaw).transpose();
    return {r, -(r * center)};
}

// Angular half-extent of an object silhouette as seen from the origin,
// conservative (uses the horizontal circumscribed radius).
struct Bearing {
    double angle;
    double half_width;
};

Bearing object_bearing(const SceneObject& obj) {
    const double range = std::hypot(obj.center.x(), obj.center.y());
    const double radius = 0.5 * std::hypot(obj.size.x(), obj.size.y());
    return {std::atan2(obj.center.x(), obj.center.y()), std::asin(std::min(radius / range, 1.0))};
}

}  // namespace

const std::array<std::string, kNumCategories>& category_names() {
    static const std::array<std::string, kNumCategories> names = {
        "car",           "truck",      "construction_vehicle", "bus",
        "trailer",       "barrier",    "motorcycle",           "bicycle",
        "pedestrian",    "traffic_cone"};
    return names;
}

Category category_from_name(const std::string& name) {
    const auto& names = category_names();
    for (int i = 0; i < kNumCategories; ++i)
        if (names[i] == name) return static_cast<Category>(i);
    throw std::domain_error("unknown object category: " + name);
}

const std::string& to_string(Category c) { return category_names()[static_cast<int>(c)]; }

CategorySizeTable CategorySizeTable::defaults() {
    CategorySizeTable t;
    auto set = [&](Category c, double l, double w, double h) {
        t.size[static_cast<int>(c)] = {l, w, h};
    };
    set(Category::kCar, 4.6, 1.9, 1.5);
    set(Category::kTruck, 7.0, 2.5, 3.0);
    set(Category::kConstructionVehicle, 6.5, 2.8, 3.2);
    set(Category::kBus, 11.0, 2.9, 3.3);
    set(Category::kTrailer, 12.5, 2.9, 3.9);
    set(Category::kBarrier, 2.0, 0.5, 1.0);
    set(Category::kMotorcycle, 2.1, 0.8, 1.4);
    set(Category::kBicycle, 1.7, 0.6, 1.3);
    set(Category::kPedestrian, 0.7, 0.7, 1.75);
    set(Category::kTrafficCone, 0.4, 0.4, 0.8);
    return t;
}

Scene generate_scene(const SceneGenConfig& config, std::uint64_t seed) {
    config.intrinsics.validate();
    if (!(config.depth_min > 0.0) || !(config.depth_max > config.depth_min))
        throw std::invalid_argument("generate_scene: invalid depth band");
    for (const auto& [cat, count] : config.object_counts)
        if (count < 0) throw std::invalid_argument("generate_scene: negative object count");

    Scene scene;
    scene.seed = seed;
    std::mt19937_64 rng(splitmix64(seed ^ 0x5ce9e5a9a1d3c111ULL));
    auto unit = [&rng] { return to_unit_double(rng()); };

    std::vector<Bearing> bearings;
    for (const auto& [cat, count] : config.object_counts) {
        const Eigen::Vector3d size = config.sizes.size[static_cast<int>(cat)];
        for (int n = 0; n < count; ++n) {
            bool placed = false;
            for (int attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
                SceneObject obj;
                obj.category = cat;
                obj.size = size;
                obj.yaw = (2.0 * unit() - 1.0) * config.yaw_range;
                const double depth =
                    config.depth_min + unit() * (config.depth_max - config.depth_min);
                const double lateral =
                    config.lateral_min + unit() * (config.lateral_max - config.lateral_min);
                obj.center = {lateral, depth, 0.5 * size.z()};

                const Bearing b = object_bearing(obj);
                const bool clear = std::ranges::all_of(bearings, [&](const Bearing& other) {
                    return std::abs(b.angle - other.angle) >=
                           b.half_width + other.half_width + config.min_bearing_gap;
                });
                if (clear) {
                    scene.objects.push_back(obj);
                    bearings.push_back(b);
                    placed = true;
                }
            }
            if (!placed)
                throw std::runtime_error(
                    "generate_scene: could not place object within retry budget");
        }
    }

    const Eigen::Vector3d cam_center(0.0, 0.0, config.camera_height);
    geometry::RigidTransform ego;
    ego.rotation = Eigen::AngleAxisd(config.ego_yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
    ego.translation = config.ego_translation;
    for (double yaw : config.camera_yaws) {
        CameraRig rig;
        rig.intrinsics = config.intrinsics;
        rig.pose_T = camera_pose(cam_center, yaw);
        rig.ego_motion = ego;
        scene.rigs.push_back(rig);
    }
    return scene;
}

geometry::RigidTransform frame_pose(const CameraRig& rig, FrameId frame) {
    if (frame == FrameId::kT) return rig.pose_T;
    return rig.ego_motion.compose(rig.pose_T);
}

std::optional<double> intersect_object(const SceneObject& obj,
                                       const Eigen::Vector3d& origin_world,
                                       const Eigen::Vector3d& dir_world) {
    const Eigen::Matrix3d r = yaw_rotation(obj.yaw).transpose();
    const Eigen::Vector3d o = r * (origin_world - obj.center);
    const Eigen::Vector3d d = r * dir_world;
    const Eigen::Vector3d half = 0.5 * obj.size;

    double t_near = 0.0;
    double t_far = kInf;
    for (int axis = 0; axis < 3; ++axis) {
        if (std::abs(d[axis]) < 1e-15) {
            if (std::abs(o[axis]) > half[axis]) return std::nullopt;
            continue;
        }
        double t0 = (-half[axis] - o[axis]) / d[axis];
        double t1 = (half[axis] - o[axis]) / d[axis];
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
    }
    if (t_near > t_far || t_near <= 0.0) return std::nullopt;
    return t_near;
}

RenderResult render(const Scene& scene, const CameraRig& rig, FrameId frame) {
    const geometry::Intrinsics& k = rig.intrinsics;
    k.validate();
    const geometry::RigidTransform pose = frame_pose(rig, frame);
    const geometry::RigidTransform cam_to_world = pose.inverse();
    const Eigen::Vector3d origin = cam_to_world.translation;

    RenderResult out;
    out.width = k.width;
    out.height = k.height;
    out.depth.assign(static_cast<std::size_t>(k.width) * k.height, kInf);
    out.instance.assign(static_cast<std::size_t>(k.width) * k.height, -1);

    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            // Camera-frame direction with unit forward component, so the ray
            // parameter equals camera-frame Z.
            const Eigen::Vector3d dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
            const Eigen::Vector3d dir_world = cam_to_world.rotation * dir_cam;
            double best = kInf;
            int best_id = -1;
            for (std::size_t i = 0; i < scene.objects.size(); ++i) {
                if (auto t = intersect_object(scene.objects[i], origin, dir_world);
                    t && *t < best) {
                    best = *t;
                    best_id = static_cast<int>(i);
                }
            }
            const std::size_t idx = static_cast<std::size_t>(v) * k.width + u;
            out.depth[idx] = best;
            out.instance[idx] = best_id;
        }
    }

    std::vector<InstanceMask> masks(scene.objects.size());
    std::vector<std::array<int, 4>> bounds(scene.objects.size(), {k.width, -1, k.height, -1});
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            const int id = out.instance_at(u, v);
            if (id < 0) continue;
            masks[id].pixels.emplace_back(u, v);
            auto& b = bounds[id];
            b[0] = std::min(b[0], u);
            b[1] = std::max(b[1], u);
            b[2] = std::min(b[2], v);
            b[3] = std::max(b[3], v);
        }
    }
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i].pixels.empty()) continue;
        masks[i].instance_id = static_cast<int>(i);
        masks[i].category = scene.objects[i].category;
        masks[i].box_w_norm = static_cast<double>(bounds[i][1] - bounds[i][0] + 1) / k.width;
        masks[i].box_h_norm = static_cast<double>(bounds[i][3] - bounds[i][2] + 1) / k.height;
        out.masks.push_back(std::move(masks[i]));
    }
    return out;
}

std::vector<float> world_point_feature(const Eigen::Vector3d& point_world,
                                       const FeatureConfig& config) {
    const double q = config.quantization;
    const std::int64_t cx = static_cast<std::int64_t>(std::floor(point_world.x() / q));
    const std::int64_t cy = static_cast<std::int64_t>(std::floor(point_world.y() / q));
    const std::int64_t cz = static_cast<std::int64_t>(std::floor(point_world.z() / q));
    std::uint64_t h = 0x8f3a91c7b64d2e05ULL;
    h = hash_combine(h, static_cast<std::uint64_t>(cx));
    h = hash_combine(h, static_cast<std::uint64_t>(cy));
    h = hash_combine(h, static_cast<std::uint64_t>(cz));

    std::vector<float> f(config.channels);
    for (int c = 0; c < config.channels; ++c) {
        const std::uint64_t bit = splitmix64(h ^ static_cast<std::uint64_t>(c)) & 1ULL;
        f[c] = static_cast<float>(bit ? config.scale : -config.scale);
    }
    return f;
}

std::vector<float> background_feature(const FeatureConfig& config) {
    std::vector<float> f(config.channels);
    for (int c = 0; c < config.channels; ++c) {
        const std::uint64_t bit =
            splitmix64(0xbad0bad0bad0bad0ULL ^ static_cast<std::uint64_t>(c)) & 1ULL;
        f[c] = static_cast<float>(bit ? config.scale : -config.scale);
    }
    return f;
}

FeatureMap synth_features(const Scene& scene, const CameraRig& rig, FrameId frame,
                          const FeatureConfig& config, std::uint64_t seed) {
    if (config.channels < 1) throw std::invalid_argument("synth_features: channels must be >= 1");
    const geometry::Intrinsics& k = rig.intrinsics;
    const RenderResult rendered = render(scene, rig, frame);
    const geometry::RigidTransform cam_to_world = frame_pose(rig, frame).inverse();

    FeatureMap map;
    map.width = k.width;
    map.height = k.height;
    map.channels = config.channels;
    map.data.resize(static_cast<std::size_t>(k.width) * k.height * config.channels);

    const std::vector<float> bg = background_feature(config);
    std::mt19937_64 rng(splitmix64(seed ^ 0x00feedfacecafeULL ^
                                   (frame == FrameId::kT ? 0x1ULL : 0x2ULL)));
    std::normal_distribution<double> noise(0.0, 1.0);

    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            auto dst = map.at(u, v);
            const double depth = rendered.depth_at(u, v);
            if (!std::isfinite(depth)) {
                std::copy(bg.begin(), bg.end(), dst.begin());
            } else {
                const Eigen::Vector3d point =
                    cam_to_world.apply(geometry::unproject({double(u), double(v)}, depth, k));
                const std::vector<float> f = world_point_feature(point, config);
                std::copy(f.begin(), f.end(), dst.begin());
            }
            if (config.noise_sigma > 0.0)
                for (float& x : dst) x += static_cast<float>(config.noise_sigma * noise(rng));
        }
    }
    return map;
}

SparseGroundTruth sample_lidar(const RenderResult& rendered, double density,
                               double outlier_rate, double outlier_shift,
                               std::uint64_t seed) {
    if (!(density > 0.0) || density > 1.0)
        throw std::invalid_argument("sample_lidar: density must be in (0,1]");
    if (outlier_rate < 0.0 || outlier_rate >= 1.0)
        throw std::invalid_argument("sample_lidar: outlier_rate must be in [0,1)");

    SparseGroundTruth gt;
    for (const InstanceMask& mask : rendered.masks) {
        const std::size_t total = mask.pixels.size();
        if (total == 0) continue;
        const std::size_t n =
            std::min<std::size_t>(total, static_cast<std::size_t>(std::ceil(density * total)));

        std::mt19937_64 rng(hash_combine(splitmix64(seed ^ 0x11da2ULL),
                                         static_cast<std::uint64_t>(mask.instance_id)));
        std::vector<std::size_t> order(total);
        for (std::size_t i = 0; i < total; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);

        SparseGroundTruth::Instance inst;
        inst.instance_id = mask.instance_id;
        inst.category = mask.category;
        for (std::size_t i = 0; i < n; ++i) {
            const auto [u, v] = mask.pixels[order[i]];
            inst.samples.push_back({{double(u), double(v)}, rendered.depth_at(u, v), false});
        }
        const std::size_t n_outliers =
            outlier_rate > 0.0 ? static_cast<std::size_t>(std::ceil(outlier_rate * n)) : 0;
        for (std::size_t i = 0; i < n_outliers && i < inst.samples.size(); ++i) {
            const double sign = (rng() & 1ULL) ? 1.0 : -1.0;
            inst.samples[i].depth += sign * outlier_shift;
            inst.samples[i].outlier = true;
        }
        gt.instances.push_back(std::move(inst));
    }
    return gt;
}

}  // namespace iabev::scene
