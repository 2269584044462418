#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iabev/bev.hpp"
#include "iabev/config.hpp"
#include "iabev/metrics.hpp"
#include "iabev/mono.hpp"
#include "iabev/stereo.hpp"

namespace iabev::pipeline {

struct InstanceLossRecord {
    int instance_id = -1;
    int group = 0;
    double voted_depth = 0.0;
    double abs_loss = 0.0;  // this instance's pixel-mean squared error
    double rel_loss = 0.0;
};

struct RunReport {
    std::uint64_t config_digest = 0;
    std::uint64_t seed = 0;
    double loss_det = 0.0;
    double loss_ce = 0.0;
    double loss_abs = 0.0;
    double loss_rel = 0.0;
    double loss_total = 0.0;
    int supervised_instances = 0;
    std::optional<metrics::DepthMetrics> fused_metrics;
    std::optional<metrics::DepthMetrics> stereo_metrics;
    std::vector<stereo::IterationCounters> sbl_counters;  // summed over rigs
    std::vector<InstanceLossRecord> instance_losses;
    double bev_total_weight = 0.0;
    double bev_dropped_mass = 0.0;
    std::size_t foreground_pixels = 0;
    double timing_ms = 0.0;
};

/// Intermediate products kept around for tests and artifact export.
struct RunProducts {
    scene::Scene scene;
    std::vector<scene::RenderResult> rendered_t;    // per rig
    std::vector<scene::RenderResult> rendered_tm1;  // per rig
    std::vector<stereo::SblResult> sbl;             // per rig (empty when disabled)
    std::vector<bev::FusedDepth> fused;             // per rig
    bev::BevGrid grid;                              // merged over rigs
    RunReport report;
};

/// Full pipeline: generate -> render -> monocular stage -> self-boosting
/// stereo -> fuse -> splat -> losses and metrics.
RunProducts run_experiment(const config::RunConfig& cfg, std::uint64_t seed);

/// Write report.json, losses.csv, counters.csv and graymap renders.
void write_artifacts(const RunProducts& products, const config::RunConfig& cfg,
                     const std::filesystem::path& out_dir);

std::string report_to_json(const RunReport& report);

/// Schedule for an iteration-count sweep entry: 0 disables stereo, n >= 1
/// uses the first n entries of 12, 20, 28, 36, ...
std::vector<int> sweep_schedule(int rounds);

}  // namespace iabev::pipeline
