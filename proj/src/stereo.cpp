#include "iabev/stereo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iabev/util.hpp"

namespace iabev::stereo {

std::vector<double> sample_range(double lo, double hi, int count) {
    if (count < 1) throw std::domain_error("sample_range: need at least one sample");
    if (!(hi > lo)) throw std::domain_error("sample_range: empty range");
    std::vector<double> out(count);
    const double w = (hi - lo) / count;
    for (int i = 0; i < count; ++i) out[i] = lo + (i + 0.5) * w;
    return out;
}

std::vector<double> propose_initial(const geometry::DepthBins& bins, int l0) {
    if (l0 < 2) throw std::domain_error("propose_initial: need at least two hypotheses");
    return sample_range(bins.d_min, bins.d_max, l0);
}

std::size_t SparseCostVolume::valid_count() const {
    std::size_t n = 0;
    for (const auto& px : entries)
        for (const CostEntry& e : px) n += e.valid ? 1 : 0;
    return n;
}

std::size_t SparseCostVolume::total_count() const {
    std::size_t n = 0;
    for (const auto& px : entries) n += px.size();
    return n;
}

std::optional<std::vector<float>> bilinear_sample(const scene::FeatureMap& map,
                                                  double u, double v) {
    const int u0 = static_cast<int>(std::floor(u));
    const int v0 = static_cast<int>(std::floor(v));
    if (u0 < 0 || v0 < 0 || u0 + 1 >= map.width || v0 + 1 >= map.height) return std::nullopt;
    const double fu = u - u0;
    const double fv = v - v0;
    const double w00 = (1.0 - fu) * (1.0 - fv);
    const double w10 = fu * (1.0 - fv);
    const double w01 = (1.0 - fu) * fv;
    const double w11 = fu * fv;
    const auto f00 = map.at(u0, v0);
    const auto f10 = map.at(u0 + 1, v0);
    const auto f01 = map.at(u0, v0 + 1);
    const auto f11 = map.at(u0 + 1, v0 + 1);
    std::vector<float> out(map.channels);
    for (int c = 0; c < map.channels; ++c)
        out[c] = static_cast<float>(w00 * f00[c] + w10 * f10[c] + w01 * f01[c] + w11 * f11[c]);
    return out;
}

SparseCostVolume build_cost_volume(std::span<const std::pair<int, int>> pixels,
                                   std::span<const std::vector<double>> hypotheses,
                                   const scene::FeatureMap& feat_t,
                                   const scene::FeatureMap& feat_tm1,
                                   const scene::CameraRig& rig) {
    if (feat_t.channels != feat_tm1.channels)
        throw std::domain_error("build_cost_volume: feature dimension mismatch");
    if (pixels.size() != hypotheses.size())
        throw std::domain_error("build_cost_volume: pixels/hypotheses size mismatch");

    SparseCostVolume vol;
    vol.channels = feat_t.channels;
    vol.entries.resize(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const auto [u, v] = pixels[i];
        const auto ref = feat_t.at(u, v);
        auto& row = vol.entries[i];
        row.resize(hypotheses[i].size());
        for (std::size_t j = 0; j < hypotheses[i].size(); ++j) {
            CostEntry& e = row[j];
            const auto warped = geometry::homo_warp({double(u), double(v)}, hypotheses[i][j],
                                                    rig.intrinsics, rig.ego_motion);
            if (!warped) continue;
            auto src = bilinear_sample(feat_tm1, warped->u, warped->v);
            if (!src) continue;
            e.valid = true;
            e.ref.assign(ref.begin(), ref.end());
            e.src = std::move(*src);
        }
    }
    return vol;
}

std::vector<std::optional<Eigen::VectorXd>> match_scores(const SparseCostVolume& vol,
                                                          double temperature) {
    if (!(temperature > 0.0)) throw std::domain_error("match_scores: temperature must be positive");
    std::vector<std::optional<Eigen::VectorXd>> out(vol.entries.size());
    for (std::size_t i = 0; i < vol.entries.size(); ++i) {
        const auto& row = vol.entries[i];
        Eigen::VectorXd sim(row.size());
        bool any = false;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (!row[j].valid) {
                sim[static_cast<Eigen::Index>(j)] = -std::numeric_limits<double>::infinity();
                continue;
            }
            double d2 = 0.0;
            for (int c = 0; c < vol.channels; ++c) {
                const double diff = static_cast<double>(row[j].ref[c]) - row[j].src[c];
                d2 += diff * diff;
            }
            const double s = -d2 / (temperature * vol.channels);
            sim[static_cast<Eigen::Index>(j)] = s;
            best = std::max(best, s);
            any = true;
        }
        if (!any) continue;
        Eigen::VectorXd scores(row.size());
        double z = 0.0;
        for (Eigen::Index j = 0; j < sim.size(); ++j) {
            scores[j] = std::isfinite(sim[j]) ? std::exp(sim[j] - best) : 0.0;
            z += scores[j];
        }
        out[i] = scores / z;
    }
    return out;
}

MatchStats stats(const Eigen::VectorXd& scores, std::span<const double> hypotheses) {
    if (static_cast<std::size_t>(scores.size()) != hypotheses.size())
        throw std::domain_error("stats: score/hypothesis size mismatch");
    MatchStats ms;
    ms.scores = scores;
    ms.hypotheses.assign(hypotheses.begin(), hypotheses.end());
    double mu = 0.0;
    for (Eigen::Index j = 0; j < scores.size(); ++j) mu += hypotheses[j] * scores[j];
    double var = 0.0;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
        const double d = hypotheses[j] - mu;
        var += d * d * scores[j];
    }
    ms.mu = mu;
    ms.sigma = std::sqrt(std::max(var, 0.0));
    return ms;
}

Partition partition(std::span<const MatchStats> stats_per_pixel, double sigma_t) {
    if (!(sigma_t > 0.0)) throw std::domain_error("partition: sigma_t must be positive");
    Partition p;
    for (std::size_t i = 0; i < stats_per_pixel.size(); ++i) {
        if (stats_per_pixel[i].sigma < sigma_t)
            p.settled.push_back(i);
        else
            p.boosted.push_back(i);
    }
    return p;
}

RangeUpdate refine_range(const MatchStats& ms, const geometry::DepthBins& bins) {
    if (!(ms.sigma >= 0.0)) throw std::domain_error("refine_range: negative sigma");
    double lo, hi;
    if (ms.sigma == 0.0) {
        lo = ms.mu - 0.5 * bins.bin_width();
        hi = ms.mu + 0.5 * bins.bin_width();
    } else {
        lo = ms.mu - 3.0 * ms.sigma;
        hi = ms.mu + 3.0 * ms.sigma;
    }
    lo = std::max(lo, bins.d_min);
    hi = std::min(hi, bins.d_max);
    if (!(hi > lo)) return {std::clamp(ms.mu, bins.d_min, bins.d_max), 0.0, true};
    return {lo, hi, false};
}

Eigen::VectorXd fill_bins(const Eigen::VectorXd& scores,
                          std::span<const double> hypotheses,
                          const geometry::DepthBins& bins) {
    if (static_cast<std::size_t>(scores.size()) != hypotheses.size())
        throw std::domain_error("fill_bins: score/hypothesis size mismatch");
    if (hypotheses.empty()) throw std::domain_error("fill_bins: empty hypothesis set");
    for (std::size_t j = 1; j < hypotheses.size(); ++j)
        if (!(hypotheses[j] > hypotheses[j - 1]))
            throw std::domain_error("fill_bins: hypotheses must be strictly increasing");

    Eigen::VectorXd out = Eigen::VectorXd::Zero(bins.count);
    auto clamped_bin = [&](double depth) {
        if (auto k = geometry::bin_index(depth, bins)) return *k;
        return depth < bins.d_min ? 0 : bins.count - 1;
    };

    if (hypotheses.size() == 1) {
        out[clamped_bin(hypotheses[0])] = 1.0;
        return out;
    }

    for (int k = 0; k < bins.count; ++k) {
        const double c = bins.centers[k];
        if (c < hypotheses.front() || c > hypotheses.back()) continue;
        const auto it = std::upper_bound(hypotheses.begin(), hypotheses.end(), c);
        const std::size_t hi = std::min<std::size_t>(
            static_cast<std::size_t>(it - hypotheses.begin()), hypotheses.size() - 1);
        const std::size_t lo = hi - 1;
        const double t = (c - hypotheses[lo]) / (hypotheses[hi] - hypotheses[lo]);
        out[k] = (1.0 - t) * scores[static_cast<Eigen::Index>(lo)] +
                 t * scores[static_cast<Eigen::Index>(hi)];
    }
    const double total = out.sum();
    if (total <= 0.0) {
        // Window narrower than the bin pitch: collapse onto the bin holding
        // the score-weighted mean.
        double mu = 0.0;
        for (Eigen::Index j = 0; j < scores.size(); ++j) mu += hypotheses[j] * scores[j];
        out.setZero();
        out[clamped_bin(mu)] = 1.0;
        return out;
    }
    return out / total;
}

SblResult run_sbl(std::span<const std::pair<int, int>> pixels,
                  const scene::FeatureMap& feat_t, const scene::FeatureMap& feat_tm1,
                  const scene::CameraRig& rig, const geometry::DepthBins& bins,
                  const SblConfig& config) {
    if (config.schedule.empty()) throw std::domain_error("run_sbl: empty schedule");
    for (std::size_t i = 1; i < config.schedule.size(); ++i)
        if (config.schedule[i] <= config.schedule[i - 1])
            throw std::domain_error("run_sbl: schedule must be strictly increasing");

    SblResult result;
    result.pixels.assign(pixels.begin(), pixels.end());
    result.per_pixel.resize(pixels.size());

    std::vector<std::size_t> active(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) active[i] = i;

    for (std::size_t round = 0; round < config.schedule.size() && !active.empty(); ++round) {
        const int l = config.schedule[round];
        IterationCounters counters;
        counters.iteration = static_cast<int>(round);
        counters.hypotheses = l;

        // Hypothesis proposal for this round's active pixels.
        std::vector<std::size_t> participants;
        std::vector<std::vector<double>> hyps;
        if (round == 0) {
            const std::vector<double> initial = propose_initial(bins, l);
            participants = active;
            hyps.assign(active.size(), initial);
        } else {
            for (std::size_t idx : active) {
                const auto& prev = result.per_pixel[idx];
                const RangeUpdate range = refine_range(prev->final_stats, bins);
                if (range.empty) continue;  // settled at the clamped mean, keeps prev stats
                participants.push_back(idx);
                hyps.push_back(sample_range(range.lo, range.hi, l));
            }
        }

        std::vector<std::pair<int, int>> coords;
        coords.reserve(participants.size());
        for (std::size_t idx : participants) coords.push_back(result.pixels[idx]);

        const SparseCostVolume vol = build_cost_volume(coords, hyps, feat_t, feat_tm1, rig);
        const auto scores = match_scores(vol, config.temperature);

        counters.pixels = participants.size();
        counters.entries_total = vol.total_count();
        counters.entries_valid = vol.valid_count();

        std::vector<std::size_t> scored;
        std::vector<MatchStats> round_stats;
        for (std::size_t i = 0; i < participants.size(); ++i) {
            if (!scores[i]) {
                ++counters.dropped;  // pixel keeps its previous result, if any
                continue;
            }
            MatchStats ms = stats(*scores[i], hyps[i]);
            const std::size_t idx = participants[i];
            result.per_pixel[idx] =
                SblResult::PixelResult{std::move(ms), static_cast<int>(round), {}};
            scored.push_back(idx);
            round_stats.push_back(result.per_pixel[idx]->final_stats);
        }

        const Partition part = partition(round_stats, config.sigma_t);
        counters.settled = part.settled.size();
        result.counters.push_back(counters);

        std::vector<std::size_t> next;
        for (std::size_t j : part.boosted) next.push_back(scored[j]);
        active = std::move(next);
    }

    for (auto& pr : result.per_pixel)
        if (pr)
            pr->bin_distribution = fill_bins(pr->final_stats.scores,
                                             pr->final_stats.hypotheses, bins);
    return result;
}

}  // namespace iabev::stereo
