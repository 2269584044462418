#include "iabev/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace iabev::geometry {

void Intrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
        throw std::invalid_argument("Intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("Intrinsics: image size must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
        throw std::invalid_argument("Intrinsics: principal point outside image");
}

RigidTransform RigidTransform::from_rt(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    RigidTransform m{r, t};
    m.validate();
    return m;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
    return {rotation * inner.rotation, rotation * inner.translation + translation};
}

RigidTransform RigidTransform::inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
}

void RigidTransform::validate(double tol) const {
    const Eigen::Matrix3d err =
        rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > tol)
        throw std::invalid_argument("RigidTransform: rotation not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > tol)
        throw std::invalid_argument("RigidTransform: rotation determinant != 1");
}

Eigen::Vector3d unproject(const Pixel& p, double depth, const Intrinsics& k) {
    if (!(depth > 0.0)) throw std::domain_error("unproject: depth must be positive");
    return {(p.u - k.cx) / k.fx * depth, (p.v - k.cy) / k.fy * depth, depth};
}

Projection project(const Eigen::Vector3d& point, const Intrinsics& k) {
    if (!(point.z() > 0.0)) throw std::domain_error("project: point behind camera");
    return {{k.fx * point.x() / point.z() + k.cx,
             k.fy * point.y() / point.z() + k.cy},
            point.z()};
}

std::optional<Pixel> homo_warp(const Pixel& p, double d_hyp, const Intrinsics& k,
                               const RigidTransform& m) {
    if (!(d_hyp > 0.0)) throw std::domain_error("homo_warp: depth hypothesis must be positive");
    const Eigen::Vector3d q = m.apply(unproject(p, d_hyp, k));
    if (!(q.z() > 0.0)) return std::nullopt;
    const Projection proj = project(q, k);
    if (!k.in_frame(proj.pixel.u, proj.pixel.v)) return std::nullopt;
    return proj.pixel;
}

DepthBins make_bins(double d_min, double d_max, int count) {
    if (!(d_min > 0.0) || !(d_max > d_min))
        throw std::domain_error("make_bins: need 0 < d_min < d_max");
    if (count < 1) throw std::domain_error("make_bins: need at least one bin");
    DepthBins bins{d_min, d_max, count, {}};
    bins.centers.resize(count);
    const double w = (d_max - d_min) / count;
    for (int i = 0; i < count; ++i) bins.centers[i] = d_min + (i + 0.5) * w;
    return bins;
}

std::optional<int> bin_index(double depth, const DepthBins& bins) {
    if (!(depth >= bins.d_min) || !(depth < bins.d_max)) return std::nullopt;
    const int idx = static_cast<int>(std::floor((depth - bins.d_min) / bins.bin_width()));
    return std::min(std::max(idx, 0), bins.count - 1);
}

}  // namespace iabev::geometry
