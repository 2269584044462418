#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "iabev/geometry.hpp"
#include "iabev/scene.hpp"

namespace iabev::bev {

enum class FusionMode { kProbability, kLogit };

/// Per-pixel fused depth distribution over the predefined bins.
struct FusedDepth {
    std::vector<std::pair<int, int>> pixels;
    Eigen::MatrixXd dist;  // B x |pixels|, columns sum to 1
};

struct PixelDistribution {
    std::pair<int, int> pixel;
    Eigen::VectorXd dist;
};

/// Merge monocular and stereo bin distributions. Pixels present in both get
/// the elementwise sum renormalized (probability mode) or summed logits
/// softmaxed (logit mode); mono-only pixels pass through.
FusedDepth fuse(std::span<const PixelDistribution> mono,
                std::span<const PixelDistribution> stereo, FusionMode mode);

struct BevGridConfig {
    double extent_x = 102.4;  // meters, centered on ego
    double extent_y = 102.4;
    double cell = 0.8;
    bool bilinear = false;  // nearest-cell splat by default
};

struct BevGrid {
    BevGridConfig config;
    int nx = 0;
    int ny = 0;
    Eigen::MatrixXd features;  // (nx*ny) x C
    Eigen::VectorXd weight;    // nx*ny
    double dropped_mass = 0.0;

    int cell_index(int ix, int iy) const { return iy * nx + ix; }
    /// Cell containing a world-frame (X, Y); nullopt outside the grid.
    std::optional<std::pair<int, int>> locate(double x, double y) const;
};

/// Lift each (pixel, bin) to its bin-center 3D point, transform to the world
/// frame, and accumulate probability-weighted features into the grid.
BevGrid lift_splat(const FusedDepth& fused, const scene::FeatureMap& feats,
                   const scene::CameraRig& rig, const geometry::DepthBins& bins,
                   const BevGridConfig& config);

}  // namespace iabev::bev
