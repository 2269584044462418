#pragma once

#include <span>

namespace iabev::metrics {

/// Standard monocular depth-quality metrics (Eigen-style convention).
/// SILog is reported x100.
struct DepthMetrics {
    double silog = 0.0;
    double abs_rel = 0.0;
    double sq_rel = 0.0;
    double log10 = 0.0;
    double rmse = 0.0;
};

/// Evaluate over paired predictions/ground truth (already masked). Throws on
/// an empty mask or non-positive depths.
DepthMetrics depth_metrics(std::span<const double> pred, std::span<const double> gt);

}  // namespace iabev::metrics
