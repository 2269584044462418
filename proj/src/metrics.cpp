#include "iabev/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "iabev/util.hpp"

namespace iabev::metrics {

DepthMetrics depth_metrics(std::span<const double> pred, std::span<const double> gt) {
    if (pred.size() != gt.size()) throw std::domain_error("depth_metrics: size mismatch");
    if (pred.empty()) throw std::domain_error("depth_metrics: no evaluated pixels");
    const std::size_t n = pred.size();

    std::vector<double> abs_rel(n), sq_rel(n), sq(n), log10e(n), e(n), e2(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(pred[i] > 0.0) || !(gt[i] > 0.0))
            throw std::domain_error("depth_metrics: non-positive depth in mask");
        const double diff = pred[i] - gt[i];
        abs_rel[i] = std::abs(diff) / gt[i];
        sq_rel[i] = diff * diff / gt[i];
        sq[i] = diff * diff;
        log10e[i] = std::abs(std::log10(pred[i]) - std::log10(gt[i]));
        e[i] = std::log(pred[i]) - std::log(gt[i]);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    DepthMetrics m;
    m.abs_rel = pairwise_sum(abs_rel) * inv_n;
    m.sq_rel = pairwise_sum(sq_rel) * inv_n;
    m.rmse = std::sqrt(pairwise_sum(sq) * inv_n);
    m.log10 = pairwise_sum(log10e) * inv_n;
    // Variance of e via the centered form: algebraically mean(e^2) - mean(e)^2
    // but without the catastrophic cancellation that form has when e is
    // nearly constant (global-scale errors must report SILog ~ 0).
    const double mean_e = pairwise_sum(e) * inv_n;
    for (std::size_t i = 0; i < n; ++i) e2[i] = (e[i] - mean_e) * (e[i] - mean_e);
    m.silog = 100.0 * std::sqrt(pairwise_sum(e2) * inv_n);
    return m;
}

}  // namespace iabev::metrics
