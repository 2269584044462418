#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <span>
#include <vector>

#include "iabev/geometry.hpp"
#include "iabev/scene.hpp"

namespace iabev::mono {

inline constexpr int kNumGroups = 6;

/// Semantic group of a category. The six groups partition the ten base
/// classes: {car}, {truck, construction vehicle}, {bus, trailer}, {barrier},
/// {motorcycle, bicycle}, {pedestrian, traffic cone}.
int group_of(scene::Category category);

/// Member categories of a group.
std::span<const scene::Category> group_members(int group);

/// Representative physical height of a group: arithmetic mean of its member
/// category heights.
double group_height(int group, const scene::CategorySizeTable& sizes);

/// Per-group spread (meters) of the monocular depth bump. Defaults: 1.0 for
/// vehicle groups, 0.5 for barrier and pedestrian/cone, 0.75 for two-wheelers.
struct GroupSpreads {
    std::array<double, kNumGroups> spread = {1.0, 1.0, 1.0, 0.5, 0.75, 0.5};
};

/// Categorical depth prediction for one instance: logits are bins x pixels;
/// probabilities are the per-column softmax.
struct DepthDistribution {
    Eigen::MatrixXd logits;  // B x M

    Eigen::MatrixXd probabilities() const;
};

/// Scale-to-depth prior: fy * H_group / h_px, clamped to the bin range.
/// h_px is the instance's bounding-box height in pixels.
double prior_depth(const scene::InstanceMask& mask, const geometry::Intrinsics& k,
                   int group, const scene::CategorySizeTable& sizes,
                   const geometry::DepthBins& bins);

/// Gaussian bump in bin space centered at the prior, identical across the
/// instance's pixels.
DepthDistribution mono_logits(const scene::InstanceMask& mask, double prior,
                              const geometry::DepthBins& bins, double spread);

/// Per-pixel expectation over bin centers (softmax-weighted sum).
Eigen::VectorXd expected_depth(const DepthDistribution& dist, const geometry::DepthBins& bins);

/// Expectation of a single already-normalized bin distribution.
double expected_depth(const Eigen::VectorXd& distribution, const geometry::DepthBins& bins);

/// Robust instance-level target: histogram the samples into bins and average
/// the samples of the most-voted bin. Ties break toward the lower-depth bin.
/// Samples outside [d_min, d_max) are excluded first; nullopt when none
/// remain (the instance then drops out of the supervised set).
std::optional<double> vote_gt_depth(std::span<const scene::LidarSample> samples,
                                    const geometry::DepthBins& bins);

/// One instance carrying both predicted and ground-truth depths. `pred` and
/// `gt` are aligned with the instance's supervised pixels.
struct SupervisedInstance {
    int instance_id = -1;
    int group = 0;
    Eigen::VectorXd pred;   // expected depths at supervised pixels
    Eigen::VectorXd gt;     // sparse ground-truth depths at the same pixels
    double voted_depth = 0.0;
};

struct LossResult {
    double value = 0.0;
    std::vector<Eigen::VectorXd> grads;  // d(value)/d(pred), per instance
};

/// Instance-mean of pixel-mean squared error against the voted depth.
LossResult abs_depth_loss(std::span<const SupervisedInstance> instances);

/// Instance-mean of pixel-mean squared error of relative-depth residuals,
/// evaluated exactly as written (the voted depth cancels algebraically).
LossResult rel_depth_loss(std::span<const SupervisedInstance> instances);

struct CeLossResult {
    double value = 0.0;
    Eigen::MatrixXd grad;  // d(value)/d(logits), B x M
    int supervised_pixels = 0;
};

/// Pixel-wise cross-entropy against the ground-truth bin. `pixel_gt` maps a
/// column of `dist` to its ground-truth depth; out-of-range depths are
/// skipped. Throws when no pixel remains.
CeLossResult ce_depth_loss(const DepthDistribution& dist,
                           std::span<const std::pair<int, double>> pixel_gt,
                           const geometry::DepthBins& bins);

struct LossWeights {
    double det = 1.0;
    double ce = 3.0;
    double abs = 0.5;
    double rel = 2.0;
};

double total_loss(double l_det, double l_ce, double l_abs, double l_rel,
                  const LossWeights& w);

}  // namespace iabev::mono
