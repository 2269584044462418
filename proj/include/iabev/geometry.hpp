#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace iabev::geometry {

/// Pinhole intrinsics. Pixel (u,v) addresses the sample at continuous
/// coordinates (u,v); the valid image domain is [0,width) x [0,height).
struct Intrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    void validate() const;  // throws std::invalid_argument on violation
    bool in_frame(double u, double v) const {
        return u >= 0.0 && u < static_cast<double>(width) && v >= 0.0 &&
               v < static_cast<double>(height);
    }
};

/// Rigid motion p' = R*p + t, translation in meters.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidTransform identity() { return {}; }
    static RigidTransform from_rt(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
        return rotation * p + translation;
    }
    RigidTransform compose(const RigidTransform& inner) const;  // this ∘ inner
    RigidTransform inverse() const;
    void validate(double tol = 1e-9) const;  // orthonormal, det = +1
};

/// Uniform discretization of [d_min, d_max) into `count` bins, addressed by
/// their center depths.
struct DepthBins {
    double d_min = 0.0;
    double d_max = 0.0;
    int count = 0;
    std::vector<double> centers;

    double bin_width() const { return (d_max - d_min) / count; }
};

struct Pixel {
    double u = 0.0;
    double v = 0.0;
};

/// Back-project pixel p at the given depth to a camera-frame point
/// (X, Y, Z) with Z = depth. Throws std::domain_error for depth <= 0.
Eigen::Vector3d unproject(const Pixel& p, double depth, const Intrinsics& k);

struct Projection {
    Pixel pixel;
    double depth = 0.0;
};

/// Forward pinhole projection. Throws std::domain_error for Z <= 0.
Projection project(const Eigen::Vector3d& point, const Intrinsics& k);

/// Warp pixel p, assumed at depth d_hyp in the current frame, into the
/// previous frame via m (camera-at-T -> camera-at-T-1). Returns nullopt when
/// the transformed point lands behind the camera or outside the image;
/// clamping would fabricate false correspondences.
std::optional<Pixel> homo_warp(const Pixel& p, double d_hyp, const Intrinsics& k,
                               const RigidTransform& m);

/// Uniform bins over [d_min, d_max). Throws std::domain_error on an empty
/// range or non-positive count.
DepthBins make_bins(double d_min, double d_max, int count);

/// Bin containing `depth`, or nullopt for depths outside [d_min, d_max).
std::optional<int> bin_index(double depth, const DepthBins& bins);

}  // namespace iabev::geometry
