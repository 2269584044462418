#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iabev/geometry.hpp"

namespace iabev::scene {

enum class Category : int {
    kCar = 0,
    kTruck,
    kConstructionVehicle,
    kBus,
    kTrailer,
    kBarrier,
    kMotorcycle,
    kBicycle,
    kPedestrian,
    kTrafficCone,
};

inline constexpr int kNumCategories = 10;

const std::array<std::string, kNumCategories>& category_names();
Category category_from_name(const std::string& name);  // throws on unknown
const std::string& to_string(Category c);

/// Physical size templates (length, width, height) in meters. Heights drive
/// both generation and the monocular scale prior.
struct CategorySizeTable {
    std::array<Eigen::Vector3d, kNumCategories> size;
    static CategorySizeTable defaults();
    double height(Category c) const { return size[static_cast<int>(c)].z(); }
};

/// World frame: X right, Y forward, Z up; ground plane at Z = 0.
/// Box local frame: x along length, y along width, z up; yaw about world Z.
struct SceneObject {
    Category category = Category::kCar;
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d size = Eigen::Vector3d::Zero();  // (length, width, height)
    double yaw = 0.0;
};

/// One camera over two timestamps: pose_T maps world -> camera at frame T,
/// ego_motion maps camera-at-T -> camera-at-(T-1).
struct CameraRig {
    geometry::Intrinsics intrinsics;
    geometry::RigidTransform pose_T;
    geometry::RigidTransform ego_motion;
};

struct Scene {
    std::vector<SceneObject> objects;
    std::vector<CameraRig> rigs;
    std::uint64_t seed = 0;
};

struct SceneGenConfig {
    std::map<Category, int> object_counts;
    double depth_min = 20.0;  // forward (Y) placement band, meters
    double depth_max = 40.0;
    double lateral_min = -8.0;
    double lateral_max = 8.0;
    double yaw_range = 0.5;        // yaw sampled uniform in [-yaw_range, yaw_range]
    double min_bearing_gap = 0.03; // angular gap between object silhouettes
    int max_retries = 200;
    CategorySizeTable sizes = CategorySizeTable::defaults();

    geometry::Intrinsics intrinsics;
    double camera_height = 1.5;
    Eigen::Vector3d ego_translation = Eigen::Vector3d::Zero();  // camera-frame shift T -> T-1
    double ego_yaw = 0.0;                                       // rotation about camera y
    std::vector<double> camera_yaws = {0.0};                    // one rig per entry, about world Z
};

struct InstanceMask {
    int instance_id = -1;
    Category category = Category::kCar;
    std::vector<std::pair<int, int>> pixels;  // (u, v), row-major order
    double box_h_norm = 0.0;                  // bbox extents normalized by image size
    double box_w_norm = 0.0;
};

enum class FrameId { kT, kTm1 };

/// Per-pixel render output. `depth[v*width+u]` is the camera-frame Z of the
/// nearest surface, +inf for background; `instance` holds the front-most
/// object id or -1.
struct RenderResult {
    int width = 0;
    int height = 0;
    std::vector<double> depth;
    std::vector<int> instance;
    std::vector<InstanceMask> masks;

    double depth_at(int u, int v) const { return depth[static_cast<std::size_t>(v) * width + u]; }
    int instance_at(int u, int v) const { return instance[static_cast<std::size_t>(v) * width + u]; }
};

struct FeatureMap {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;  // (v, u, c) layout

    std::span<const float> at(int u, int v) const {
        return {data.data() + (static_cast<std::size_t>(v) * width + u) * channels,
                static_cast<std::size_t>(channels)};
    }
    std::span<float> at(int u, int v) {
        return {data.data() + (static_cast<std::size_t>(v) * width + u) * channels,
                static_cast<std::size_t>(channels)};
    }
};

struct LidarSample {
    geometry::Pixel pixel;
    double depth = 0.0;
    bool outlier = false;
};

struct SparseGroundTruth {
    struct Instance {
        int instance_id = -1;
        Category category = Category::kCar;
        std::vector<LidarSample> samples;
    };
    std::vector<Instance> instances;
};

/// Deterministic procedural placement; throws std::runtime_error when the
/// bearing-separation constraint cannot be met within the retry budget.
Scene generate_scene(const SceneGenConfig& config, std::uint64_t seed);

/// Camera pose of the requested frame (pose_T or ego_motion ∘ pose_T).
geometry::RigidTransform frame_pose(const CameraRig& rig, FrameId frame);

/// Analytic ray-box rendering; exact nearest-surface depths.
RenderResult render(const Scene& scene, const CameraRig& rig, FrameId frame);

/// Ray-box intersection against a single object. Returns camera-frame Z of
/// the nearest hit, if any. Exposed for oracle-style checks.
std::optional<double> intersect_object(const SceneObject& obj,
                                       const Eigen::Vector3d& origin_world,
                                       const Eigen::Vector3d& dir_world);

struct FeatureConfig {
    int channels = 32;
    double quantization = 0.1;  // world-space hash cell, meters
    double noise_sigma = 0.0;
    double scale = 1.0;  // channel magnitude; sets match/mismatch contrast
};

/// Deterministic hash embedding of each pixel's world-space surface point.
/// True cross-frame correspondences share features up to noise, which makes
/// plane-sweep matching well-posed without a learned encoder.
FeatureMap synth_features(const Scene& scene, const CameraRig& rig, FrameId frame,
                          const FeatureConfig& config, std::uint64_t seed);

/// Embedding assigned to background pixels.
std::vector<float> background_feature(const FeatureConfig& config);

/// Hash embedding of an arbitrary world point (before noise). Exposed for
/// collision/correspondence checks.
std::vector<float> world_point_feature(const Eigen::Vector3d& point_world,
                                       const FeatureConfig& config);

/// Simulated sparse LiDAR supervision over the frame-T render. A fraction
/// outlier_rate of each instance's samples is shifted by +-outlier_shift.
SparseGroundTruth sample_lidar(const RenderResult& rendered, double density,
                               double outlier_rate, double outlier_shift,
                               std::uint64_t seed);

}  // namespace iabev::scene
