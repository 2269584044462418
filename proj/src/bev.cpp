#include "iabev/bev.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace iabev::bev {

namespace {

Eigen::VectorXd renormalize(Eigen::VectorXd v) {
    const double s = v.sum();
    if (!(s > 0.0)) throw std::domain_error("fuse: degenerate distribution");
    return v / s;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

}  // namespace

FusedDepth fuse(std::span<const PixelDistribution> mono,
                std::span<const PixelDistribution> stereo, FusionMode mode) {
    std::map<std::pair<int, int>, const Eigen::VectorXd*> stereo_by_pixel;
    for (const PixelDistribution& s : stereo) stereo_by_pixel[s.pixel] = &s.dist;

    FusedDepth out;
    out.pixels.reserve(mono.size());
    Eigen::Index bins = -1;
    std::vector<Eigen::VectorXd> columns;
    for (const PixelDistribution& m : mono) {
        if (bins < 0) bins = m.dist.size();
        if (m.dist.size() != bins) throw std::domain_error("fuse: bin count mismatch");
        const auto it = stereo_by_pixel.find(m.pixel);
        Eigen::VectorXd fused;
        if (it == stereo_by_pixel.end()) {
            fused = m.dist;
        } else if (it->second->size() != bins) {
            throw std::domain_error("fuse: bin count mismatch");
        } else if (mode == FusionMode::kProbability) {
            fused = renormalize(m.dist + *it->second);
        } else {
            // Logit-space sum; zero probabilities floor at a tiny constant to
            // keep the logarithm finite.
            const double eps = 1e-300;
            const Eigen::VectorXd lm = m.dist.array().max(eps).log();
            const Eigen::VectorXd ls = it->second->array().max(eps).log();
            fused = softmax(lm + ls);
        }
        out.pixels.push_back(m.pixel);
        columns.push_back(std::move(fused));
    }
    out.dist.resize(bins < 0 ? 0 : bins, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < columns.size(); ++i)
        out.dist.col(static_cast<Eigen::Index>(i)) = columns[i];
    return out;
}

std::optional<std::pair<int, int>> BevGrid::locate(double x, double y) const {
    const int ix = static_cast<int>(std::floor((x + 0.5 * config.extent_x) / config.cell));
    const int iy = static_cast<int>(std::floor((y + 0.5 * config.extent_y) / config.cell));
    if (ix < 0 || iy < 0 || ix >= nx || iy >= ny) return std::nullopt;
    return std::make_pair(ix, iy);
}

BevGrid lift_splat(const FusedDepth& fused, const scene::FeatureMap& feats,
                   const scene::CameraRig& rig, const geometry::DepthBins& bins,
                   const BevGridConfig& config) {
    if (fused.dist.rows() != 0 && fused.dist.rows() != bins.count)
        throw std::domain_error("lift_splat: bin count mismatch");

    BevGrid grid;
    grid.config = config;
    grid.nx = static_cast<int>(std::round(config.extent_x / config.cell));
    grid.ny = static_cast<int>(std::round(config.extent_y / config.cell));
    grid.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.nx) * grid.ny,
                                          feats.channels);
    grid.weight = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.nx) * grid.ny);

    const geometry::RigidTransform cam_to_world = rig.pose_T.inverse();

    for (std::size_t i = 0; i < fused.pixels.size(); ++i) {
        const auto [u, v] = fused.pixels[i];
        const auto feature = feats.at(u, v);
        Eigen::VectorXd f(feats.channels);
        for (int c = 0; c < feats.channels; ++c) f[c] = feature[c];

        for (int k = 0; k < bins.count; ++k) {
            const double p = fused.dist(k, static_cast<Eigen::Index>(i));
            if (p == 0.0) continue;
            const Eigen::Vector3d world = cam_to_world.apply(
                geometry::unproject({double(u), double(v)}, bins.centers[k], rig.intrinsics));

            if (!config.bilinear) {
                if (auto cell = grid.locate(world.x(), world.y())) {
                    const int idx = grid.cell_index(cell->first, cell->second);
                    grid.weight[idx] += p;
                    grid.features.row(idx) += p * f.transpose();
                } else {
                    grid.dropped_mass += p;
                }
                continue;
            }

            // Bilinear kernel over the four surrounding cell centers.
            const double gx = (world.x() + 0.5 * config.extent_x) / config.cell - 0.5;
            const double gy = (world.y() + 0.5 * config.extent_y) / config.cell - 0.5;
            const int ix0 = static_cast<int>(std::floor(gx));
            const int iy0 = static_cast<int>(std::floor(gy));
            const double fx = gx - ix0;
            const double fy = gy - iy0;
            const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
            const int cx[4] = {ix0, ix0 + 1, ix0, ix0 + 1};
            const int cy[4] = {iy0, iy0, iy0 + 1, iy0 + 1};
            for (int t = 0; t < 4; ++t) {
                if (w[t] == 0.0) continue;
                if (cx[t] < 0 || cy[t] < 0 || cx[t] >= grid.nx || cy[t] >= grid.ny) {
                    grid.dropped_mass += p * w[t];
                    continue;
                }
                const int idx = grid.cell_index(cx[t], cy[t]);
                grid.weight[idx] += p * w[t];
                grid.features.row(idx) += p * w[t] * f.transpose();
            }
        }
    }
    return grid;
}

}  // namespace iabev::bev
