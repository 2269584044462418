#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "iabev/scene.hpp"

using namespace iabev;
using namespace iabev::scene;

namespace {

SceneGenConfig small_config() {
    SceneGenConfig cfg;
    cfg.intrinsics = {120.0, 120.0, 47.5, 47.5, 96, 96};
    cfg.object_counts = {{Category::kCar, 2}, {Category::kPedestrian, 1}};
    cfg.depth_min = 12.0;
    cfg.depth_max = 30.0;
    cfg.lateral_min = -5.0;
    cfg.lateral_max = 5.0;
    cfg.ego_translation = {0.25, 0.0, 0.0};
    return cfg;
}

}  // namespace

TEST_CASE("generate_scene is deterministic and honors counts") {
    const SceneGenConfig cfg = small_config();
    const Scene a = generate_scene(cfg, 7);
    const Scene b = generate_scene(cfg, 7);
    REQUIRE(a.objects.size() == 3);
    REQUIRE(a.objects.size() == b.objects.size());
    for (std::size_t i = 0; i < a.objects.size(); ++i) {
        CHECK(a.objects[i].category == b.objects[i].category);
        CHECK(a.objects[i].center == b.objects[i].center);
        CHECK(a.objects[i].yaw == b.objects[i].yaw);
    }
    const Scene c = generate_scene(cfg, 8);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.objects.size(); ++i)
        if (a.objects[i].center != c.objects[i].center) any_diff = true;
    CHECK(any_diff);

    int cars = 0, peds = 0;
    for (const auto& obj : a.objects) {
        if (obj.category == Category::kCar) ++cars;
        if (obj.category == Category::kPedestrian) ++peds;
        CHECK(obj.center.y() >= cfg.depth_min);
        CHECK(obj.center.y() <= cfg.depth_max);
        CHECK(obj.size.z() == cfg.sizes.height(obj.category));
    }
    CHECK(cars == 2);
    CHECK(peds == 1);
}

TEST_CASE("generate_scene with zero objects") {
    SceneGenConfig cfg = small_config();
    cfg.object_counts.clear();
    const Scene sc = generate_scene(cfg, 1);
    CHECK(sc.objects.empty());
    REQUIRE(sc.rigs.size() == 1);
    const RenderResult r = render(sc, sc.rigs[0], FrameId::kT);
    for (double d : r.depth) CHECK(std::isinf(d));
    CHECK(r.masks.empty());
}

TEST_CASE("generation error when placement is impossible") {
    SceneGenConfig cfg = small_config();
    cfg.object_counts = {{Category::kBus, 30}};
    cfg.min_bearing_gap = 0.5;
    cfg.max_retries = 20;
    CHECK_THROWS_AS(generate_scene(cfg, 3), std::runtime_error);
}

TEST_CASE("axis-aligned box front face depth") {
    // A 2x2x2 box 10 m down the optical axis: depth at the principal point
    // must be the front-face distance 9.
    Scene sc;
    SceneObject obj;
    obj.category = Category::kCar;
    obj.size = {2.0, 2.0, 2.0};
    obj.center = {0.0, 10.0, 0.0};  // world: 10 m forward, centered on Z=0
    obj.yaw = 0.0;
    sc.objects.push_back(obj);

    CameraRig rig;
    rig.intrinsics = {100.0, 100.0, 47.5, 47.5, 96, 96};
    // Camera at the world origin looking down +Y, level with the box center.
    Eigen::Matrix3d axes;
    axes << 1, 0, 0, 0, 0, -1, 0, 1, 0;
    rig.pose_T.rotation = axes;
    rig.pose_T.translation = Eigen::Vector3d::Zero();
    sc.rigs.push_back(rig);

    const RenderResult r = render(sc, rig, FrameId::kT);
    CHECK(r.depth_at(47, 47) == doctest::Approx(9.0).epsilon(1e-9));
}

TEST_CASE("rendered depths match the brute-force intersection oracle") {
    const Scene sc = generate_scene(small_config(), 21);
    const CameraRig& rig = sc.rigs[0];
    const RenderResult r = render(sc, rig, FrameId::kT);
    const geometry::RigidTransform cam_to_world = rig.pose_T.inverse();

    int checked = 0;
    for (int v = 0; v < r.height; v += 7) {
        for (int u = 0; u < r.width; u += 7) {
            Eigen::Vector3d dir_cam{(u - rig.intrinsics.cx) / rig.intrinsics.fx,
                                    (v - rig.intrinsics.cy) / rig.intrinsics.fy, 1.0};
            const Eigen::Vector3d origin = cam_to_world.translation;
            const Eigen::Vector3d dir_world = cam_to_world.rotation * dir_cam;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& obj : sc.objects) {
                const auto hit = intersect_object(obj, origin, dir_world);
                if (hit && *hit < best) best = *hit;
            }
            if (std::isinf(best)) {
                CHECK(std::isinf(r.depth_at(u, v)));
            } else {
                CHECK(r.depth_at(u, v) == doctest::Approx(best).epsilon(1e-6));
                ++checked;
            }
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("occlusion resolves to the nearer instance") {
    Scene sc;
    SceneObject near_box;
    near_box.size = {2.0, 2.0, 2.0};
    near_box.center = {0.0, 8.0, 0.0};
    SceneObject far_box;
    far_box.size = {4.0, 4.0, 4.0};
    far_box.center = {0.0, 16.0, 0.0};
    sc.objects = {near_box, far_box};

    CameraRig rig;
    rig.intrinsics = {100.0, 100.0, 47.5, 47.5, 96, 96};
    Eigen::Matrix3d axes;
    axes << 1, 0, 0, 0, 0, -1, 0, 1, 0;
    rig.pose_T.rotation = axes;
    sc.rigs.push_back(rig);

    const RenderResult r = render(sc, rig, FrameId::kT);
    CHECK(r.instance_at(47, 47) == 0);
    CHECK(r.depth_at(47, 47) == doctest::Approx(7.0));
}

TEST_CASE("masks bound their pixels and carry normalized box extents") {
    const Scene sc = generate_scene(small_config(), 4);
    const RenderResult r = render(sc, sc.rigs[0], FrameId::kT);
    REQUIRE_FALSE(r.masks.empty());
    for (const auto& mask : r.masks) {
        REQUIRE_FALSE(mask.pixels.empty());
        int min_u = r.width, max_u = -1, min_v = r.height, max_v = -1;
        for (const auto& [u, v] : mask.pixels) {
            CHECK(r.instance_at(u, v) == mask.instance_id);
            min_u = std::min(min_u, u);
            max_u = std::max(max_u, u);
            min_v = std::min(min_v, v);
            max_v = std::max(max_v, v);
        }
        CHECK(mask.box_h_norm == doctest::Approx((max_v - min_v + 1) /
                                                 static_cast<double>(r.height)));
        CHECK(mask.box_w_norm == doctest::Approx((max_u - min_u + 1) /
                                                 static_cast<double>(r.width)));
        CHECK(mask.box_h_norm > 0.0);
        CHECK(mask.box_h_norm <= 1.0);
    }
}

TEST_CASE("static-scene reprojection within half a pixel") {
    const Scene sc = generate_scene(small_config(), 13);
    const CameraRig& rig = sc.rigs[0];
    const RenderResult rt = render(sc, rig, FrameId::kT);
    const geometry::RigidTransform pose_tm1 = frame_pose(rig, FrameId::kTm1);
    const geometry::RigidTransform cam_to_world = rig.pose_T.inverse();

    int checked = 0;
    for (const auto& mask : rt.masks) {
        for (std::size_t i = 0; i < mask.pixels.size(); i += 9) {
            const auto [u, v] = mask.pixels[i];
            const double d = rt.depth_at(u, v);
            const Eigen::Vector3d world =
                cam_to_world.apply(geometry::unproject({double(u), double(v)}, d, rig.intrinsics));
            const Eigen::Vector3d in_prev = pose_tm1.apply(world);
            if (in_prev.z() <= 0.0) continue;
            const auto direct = geometry::project(in_prev, rig.intrinsics);
            const auto warped =
                geometry::homo_warp({double(u), double(v)}, d, rig.intrinsics, rig.ego_motion);
            if (!warped) continue;
            CHECK(std::abs(warped->u - direct.pixel.u) < 0.5);
            CHECK(std::abs(warped->v - direct.pixel.v) < 0.5);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("synth_features: correspondence, distinctness, background") {
    const Scene sc = generate_scene(small_config(), 5);
    const CameraRig& rig = sc.rigs[0];
    FeatureConfig fc;
    const FeatureMap ft = synth_features(sc, rig, FrameId::kT, fc, 5);
    const FeatureMap ftm1 = synth_features(sc, rig, FrameId::kTm1, fc, 5);
    const RenderResult rt = render(sc, rig, FrameId::kT);
    const geometry::RigidTransform cam_to_world = rig.pose_T.inverse();

    const auto bg = background_feature(fc);

    // Noiseless static scene: a world point visible in both frames hashes to
    // the same feature vector.
    int matched = 0;
    for (const auto& mask : rt.masks) {
        for (std::size_t i = 0; i < mask.pixels.size(); i += 17) {
            const auto [u, v] = mask.pixels[i];
            const double d = rt.depth_at(u, v);
            const auto warped =
                geometry::homo_warp({double(u), double(v)}, d, rig.intrinsics, rig.ego_motion);
            if (!warped) continue;
            const int wu = static_cast<int>(std::lround(warped->u));
            const int wv = static_cast<int>(std::lround(warped->v));
            if (!rig.intrinsics.in_frame(wu, wv)) continue;
            const Eigen::Vector3d world =
                cam_to_world.apply(geometry::unproject({double(u), double(v)}, d, rig.intrinsics));
            const auto expected = world_point_feature(world, fc);
            const auto got = ft.at(u, v);
            for (int c = 0; c < fc.channels; ++c) CHECK(got[c] == expected[c]);
            ++matched;
        }
    }
    CHECK(matched > 0);

    // Distinctness: pixels imaging world points in different hash cells get
    // different features.
    int distinct_checked = 0;
    const auto& mask0 = rt.masks[0];
    const auto [u0, v0] = mask0.pixels.front();
    for (std::size_t i = 16; i < mask0.pixels.size(); i += 16) {
        const auto [u1, v1] = mask0.pixels[i];
        bool equal = true;
        for (int c = 0; c < fc.channels; ++c)
            if (ft.at(u0, v0)[c] != ft.at(u1, v1)[c]) equal = false;
        const Eigen::Vector3d p0 = cam_to_world.apply(geometry::unproject(
            {double(u0), double(v0)}, rt.depth_at(u0, v0), rig.intrinsics));
        const Eigen::Vector3d p1 = cam_to_world.apply(geometry::unproject(
            {double(u1), double(v1)}, rt.depth_at(u1, v1), rig.intrinsics));
        if ((p0 - p1).norm() >= 2.0 * fc.quantization) {
            CHECK_FALSE(equal);
            ++distinct_checked;
        }
    }
    CHECK(distinct_checked > 0);

    // Background pixels carry the designated embedding.
    for (int v = 0; v < rt.height && v < 4; ++v) {
        const int u = 0;
        if (rt.instance_at(u, v) != -1) continue;
        const auto got = ft.at(u, v);
        for (int c = 0; c < fc.channels; ++c) CHECK(got[c] == bg[c]);
    }
    (void)ftm1;
}

TEST_CASE("sample_lidar counts, exactness, determinism") {
    const Scene sc = generate_scene(small_config(), 9);
    const CameraRig& rig = sc.rigs[0];
    const RenderResult rt = render(sc, rig, FrameId::kT);

    const SparseGroundTruth full = sample_lidar(rt, 1.0, 0.0, 5.0, 42);
    REQUIRE(full.instances.size() == rt.masks.size());
    for (std::size_t i = 0; i < full.instances.size(); ++i) {
        const auto& inst = full.instances[i];
        const auto& mask = rt.masks[i];
        CHECK(inst.samples.size() == mask.pixels.size());
        for (const auto& s : inst.samples) {
            CHECK_FALSE(s.outlier);
            CHECK(s.depth ==
                  doctest::Approx(rt.depth_at(static_cast<int>(s.pixel.u),
                                              static_cast<int>(s.pixel.v))));
        }
    }

    const SparseGroundTruth a = sample_lidar(rt, 0.3, 0.2, 5.0, 42);
    const SparseGroundTruth b = sample_lidar(rt, 0.3, 0.2, 5.0, 42);
    REQUIRE(a.instances.size() == b.instances.size());
    for (std::size_t i = 0; i < a.instances.size(); ++i) {
        const auto& mask = rt.masks[i];
        const std::size_t expect_n =
            static_cast<std::size_t>(std::ceil(0.3 * mask.pixels.size()));
        CHECK(a.instances[i].samples.size() == expect_n);
        std::size_t outliers = 0;
        for (std::size_t s = 0; s < a.instances[i].samples.size(); ++s) {
            CHECK(a.instances[i].samples[s].depth == b.instances[i].samples[s].depth);
            CHECK(a.instances[i].samples[s].pixel.u == b.instances[i].samples[s].pixel.u);
            if (a.instances[i].samples[s].outlier) ++outliers;
        }
        CHECK(outliers == static_cast<std::size_t>(std::ceil(0.2 * expect_n)));
    }
}

TEST_CASE("lidar density below one pixel still yields a sample") {
    const Scene sc = generate_scene(small_config(), 9);
    const RenderResult rt = render(sc, sc.rigs[0], FrameId::kT);
    const SparseGroundTruth g = sample_lidar(rt, 1e-6, 0.0, 5.0, 1);
    for (const auto& inst : g.instances) CHECK(inst.samples.size() == 1);
}

TEST_CASE("inlier lidar depths stay within the object depth span") {
    const Scene sc = generate_scene(small_config(), 16);
    const RenderResult rt = render(sc, sc.rigs[0], FrameId::kT);
    const SparseGroundTruth g = sample_lidar(rt, 0.5, 0.0, 5.0, 2);
    for (const auto& inst : g.instances) {
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        const auto mask_it =
            std::find_if(rt.masks.begin(), rt.masks.end(),
                         [&](const auto& m) { return m.instance_id == inst.instance_id; });
        REQUIRE(mask_it != rt.masks.end());
        for (const auto& [u, v] : mask_it->pixels) {
            lo = std::min(lo, rt.depth_at(u, v));
            hi = std::max(hi, rt.depth_at(u, v));
        }
        for (const auto& s : inst.samples) {
            CHECK(s.depth >= lo - 1e-9);
            CHECK(s.depth <= hi + 1e-9);
        }
    }
}

TEST_CASE("category name round-trip and unknown rejection") {
    for (const auto& name : category_names())
        CHECK(to_string(category_from_name(name)) == name);
    CHECK_THROWS_AS(category_from_name("boat"), std::domain_error);
}
