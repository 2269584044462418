#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "iabev/geometry.hpp"
#include "iabev/scene.hpp"

namespace iabev::stereo {

/// Uniform initial hypotheses: midpoints of L0 equal sub-ranges of
/// [d_min, d_max]. Throws for L0 < 2.
std::vector<double> propose_initial(const geometry::DepthBins& bins, int l0);

/// Midpoints of `count` equal sub-ranges of [lo, hi].
std::vector<double> sample_range(double lo, double hi, int count);

/// One (pixel, hypothesis) record: the reference feature and the feature
/// sampled at the warped location. `valid` is false for out-of-frustum or
/// out-of-frame warps; such entries are excluded from score normalization.
struct CostEntry {
    bool valid = false;
    std::vector<float> ref;
    std::vector<float> src;
};

struct SparseCostVolume {
    int channels = 0;
    std::vector<std::vector<CostEntry>> entries;  // [pixel][hypothesis]

    std::size_t valid_count() const;
    std::size_t total_count() const;
};

/// Bilinear sample of a feature map; nullopt when any of the four neighbor
/// taps falls outside the image.
std::optional<std::vector<float>> bilinear_sample(const scene::FeatureMap& map,
                                                  double u, double v);

/// Warp every (pixel, hypothesis) into the previous frame and pair features.
/// `hypotheses` holds one strictly-increasing list per pixel.
SparseCostVolume build_cost_volume(std::span<const std::pair<int, int>> pixels,
                                   std::span<const std::vector<double>> hypotheses,
                                   const scene::FeatureMap& feat_t,
                                   const scene::FeatureMap& feat_tm1,
                                   const scene::CameraRig& rig);

/// Per-pixel matching scores: softmax over hypotheses of
/// -||f_T - f_{T-1}||^2 / (temperature * C_f). Invalid entries score zero
/// mass. Pixels with no valid entry yield nullopt.
std::vector<std::optional<Eigen::VectorXd>> match_scores(const SparseCostVolume& vol,
                                                          double temperature);

struct MatchStats {
    double mu = 0.0;
    double sigma = 0.0;
    Eigen::VectorXd scores;
    std::vector<double> hypotheses;
};

/// Score-weighted mean and standard deviation along the depth channel.
MatchStats stats(const Eigen::VectorXd& scores, std::span<const double> hypotheses);

struct Partition {
    std::vector<std::size_t> settled;  // sigma < sigma_t
    std::vector<std::size_t> boosted;  // strict boundary: sigma == sigma_t boosts
};

Partition partition(std::span<const MatchStats> stats_per_pixel, double sigma_t);

struct RangeUpdate {
    double lo = 0.0;
    double hi = 0.0;
    bool empty = false;  // intersection with the bin range vanished
};

/// [mu - 3 sigma, mu + 3 sigma] intersected with the bin range; sigma = 0
/// widens to one bin width around mu.
RangeUpdate refine_range(const MatchStats& ms, const geometry::DepthBins& bins);

/// Piecewise-linear interpolation of the score density from hypothesis
/// positions onto bin centers, zero outside [H_0, H_{L-1}], renormalized.
Eigen::VectorXd fill_bins(const Eigen::VectorXd& scores,
                          std::span<const double> hypotheses,
                          const geometry::DepthBins& bins);

struct IterationCounters {
    int iteration = 0;
    int hypotheses = 0;
    std::size_t pixels = 0;
    std::size_t entries_total = 0;
    std::size_t entries_valid = 0;
    std::size_t settled = 0;
    std::size_t dropped = 0;
};

struct SblConfig {
    std::vector<int> schedule = {12, 20};
    double sigma_t = 1.0;
    double temperature = 1.0;
};

struct SblResult {
    // Parallel to the input pixel list; entries without a result (no valid
    // warp in their first iteration) are nullopt.
    struct PixelResult {
        MatchStats final_stats;
        int final_iteration = 0;
        Eigen::VectorXd bin_distribution;
    };
    std::vector<std::pair<int, int>> pixels;
    std::vector<std::optional<PixelResult>> per_pixel;
    std::vector<IterationCounters> counters;
};

/// Full self-boosting loop: settled pixels keep the statistics of their last
/// participating iteration; boosted pixels re-match with denser hypotheses
/// inside the refined range.
SblResult run_sbl(std::span<const std::pair<int, int>> pixels,
                  const scene::FeatureMap& feat_t, const scene::FeatureMap& feat_tm1,
                  const scene::CameraRig& rig, const geometry::DepthBins& bins,
                  const SblConfig& config);

}  // namespace iabev::stereo
