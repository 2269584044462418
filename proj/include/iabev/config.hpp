#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "iabev/bev.hpp"
#include "iabev/geometry.hpp"
#include "iabev/mono.hpp"
#include "iabev/scene.hpp"
#include "iabev/stereo.hpp"

namespace iabev::config {

struct LidarConfig {
    double density = 0.2;
    double outlier_rate = 0.0;
    double outlier_shift = 5.0;
};

struct BinsConfig {
    double d_min = 2.0;
    double d_max = 58.0;
    int count = 112;

    geometry::DepthBins make() const { return geometry::make_bins(d_min, d_max, count); }
};

/// Everything one experiment needs. Defaults reproduce the reference
/// configuration: two SBL rounds with 12/20 hypotheses, loss weights
/// (1.0, 3.0, 0.5, 2.0), six semantic groups.
struct RunConfig {
    int version = 1;
    scene::SceneGenConfig scene;
    BinsConfig bins;
    scene::FeatureConfig features;
    LidarConfig lidar;
    stereo::SblConfig sbl;
    bool sbl_enabled = true;
    mono::GroupSpreads spreads;
    mono::LossWeights weights;
    double detection_loss = 0.0;  // external scalar fed into the total loss
    bev::BevGridConfig bev;
    bev::FusionMode fusion = bev::FusionMode::kProbability;
    std::uint64_t digest = 0;  // FNV-1a of the config bytes

    RunConfig();
};

/// Parse a versioned JSON config. Unknown fields are rejected with the
/// offending field path; schema violations report field context.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace iabev::config
