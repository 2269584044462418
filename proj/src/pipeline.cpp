#include "iabev/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "iabev/pgm.hpp"
#include "iabev/util.hpp"

namespace iabev::pipeline {

namespace {

[[noreturn]] void stage_fail(const char* stage, const std::exception& e) {
    throw std::runtime_error(std::string("stage '") + stage + "' failed: " + e.what());
}

struct MonoStage {
    std::vector<bev::PixelDistribution> pixel_dists;
    std::vector<mono::SupervisedInstance> supervised;
    std::vector<InstanceLossRecord> records;
    double ce_value = 0.0;
    int ce_pixels = 0;
    // Per-instance distributions, retained for the cross-entropy term.
    std::vector<mono::DepthDistribution> dists;
    std::vector<const scene::InstanceMask*> masks;
};

MonoStage run_mono(const scene::RenderResult& rendered, const scene::SparseGroundTruth& gt,
                   const config::RunConfig& cfg, const geometry::DepthBins& bins) {
    MonoStage out;
    std::map<int, const scene::SparseGroundTruth::Instance*> gt_by_id;
    for (const auto& inst : gt.instances) gt_by_id[inst.instance_id] = &inst;

    std::vector<double> ce_weighted;
    for (const scene::InstanceMask& mask : rendered.masks) {
        const int group = mono::group_of(mask.category);
        const double prior =
            mono::prior_depth(mask, cfg.scene.intrinsics, group, cfg.scene.sizes, bins);
        mono::DepthDistribution dist =
            mono::mono_logits(mask, prior, bins, cfg.spreads.spread[group]);
        const Eigen::VectorXd expected = mono::expected_depth(dist, bins);
        const Eigen::MatrixXd probs = dist.probabilities();

        std::map<std::pair<int, int>, int> column_of;
        for (std::size_t i = 0; i < mask.pixels.size(); ++i)
            column_of[mask.pixels[i]] = static_cast<int>(i);
        for (std::size_t i = 0; i < mask.pixels.size(); ++i)
            out.pixel_dists.push_back({mask.pixels[i], probs.col(static_cast<Eigen::Index>(i))});

        const auto it = gt_by_id.find(mask.instance_id);
        if (it == gt_by_id.end() || it->second->samples.empty()) continue;
        const auto& samples = it->second->samples;
        const auto voted = mono::vote_gt_depth(samples, bins);
        if (!voted) continue;  // every sample fell outside the bin range

        mono::SupervisedInstance sup;
        sup.instance_id = mask.instance_id;
        sup.group = group;
        sup.voted_depth = *voted;
        sup.pred.resize(static_cast<Eigen::Index>(samples.size()));
        sup.gt.resize(static_cast<Eigen::Index>(samples.size()));
        std::vector<std::pair<int, double>> pixel_gt;
        for (std::size_t s = 0; s < samples.size(); ++s) {
            const auto key = std::make_pair(static_cast<int>(samples[s].pixel.u),
                                            static_cast<int>(samples[s].pixel.v));
            const int col = column_of.at(key);
            sup.pred[static_cast<Eigen::Index>(s)] = expected[col];
            sup.gt[static_cast<Eigen::Index>(s)] = samples[s].depth;
            pixel_gt.emplace_back(col, samples[s].depth);
        }
        try {
            const mono::CeLossResult ce = mono::ce_depth_loss(dist, pixel_gt, bins);
            ce_weighted.push_back(ce.value * ce.supervised_pixels);
            out.ce_pixels += ce.supervised_pixels;
        } catch (const std::domain_error&) {
            // no in-range ground truth for this instance
        }
        out.supervised.push_back(std::move(sup));
        out.dists.push_back(std::move(dist));
        out.masks.push_back(&mask);
    }
    if (out.ce_pixels > 0)
        out.ce_value = pairwise_sum(ce_weighted) / static_cast<double>(out.ce_pixels);
    return out;
}

}  // namespace

std::vector<int> sweep_schedule(int rounds) {
    if (rounds < 0) throw std::domain_error("sweep_schedule: negative round count");
    std::vector<int> schedule;
    for (int i = 0; i < rounds; ++i) schedule.push_back(12 + 8 * i);
    return schedule;
}

RunProducts run_experiment(const config::RunConfig& cfg, std::uint64_t seed) {
    const auto t_start = std::chrono::steady_clock::now();
    RunProducts out;
    out.report.config_digest = cfg.digest;
    out.report.seed = seed;
    out.report.loss_det = cfg.detection_loss;

    const geometry::DepthBins bins = cfg.bins.make();

    try {
        out.scene = scene::generate_scene(cfg.scene, seed);
    } catch (const std::exception& e) {
        stage_fail("generate", e);
    }

    std::vector<mono::SupervisedInstance> all_supervised;
    std::vector<double> ce_weighted;
    int ce_pixels = 0;
    std::vector<double> fused_pred, fused_gt, stereo_pred, stereo_gt;
    std::vector<bev::BevGrid> grids;

    for (std::size_t rig_idx = 0; rig_idx < out.scene.rigs.size(); ++rig_idx) {
        const scene::CameraRig& rig = out.scene.rigs[rig_idx];

        scene::RenderResult rendered_t, rendered_tm1;
        scene::FeatureMap feat_t, feat_tm1;
        try {
            rendered_t = scene::render(out.scene, rig, scene::FrameId::kT);
            rendered_tm1 = scene::render(out.scene, rig, scene::FrameId::kTm1);
            feat_t = scene::synth_features(out.scene, rig, scene::FrameId::kT, cfg.features,
                                           seed + rig_idx);
            feat_tm1 = scene::synth_features(out.scene, rig, scene::FrameId::kTm1, cfg.features,
                                             seed + rig_idx);
        } catch (const std::exception& e) {
            stage_fail("render", e);
        }

        scene::SparseGroundTruth gt;
        MonoStage mono_stage;
        try {
            gt = scene::sample_lidar(rendered_t, cfg.lidar.density, cfg.lidar.outlier_rate,
                                     cfg.lidar.outlier_shift, seed * 1000003 + rig_idx);
            mono_stage = run_mono(rendered_t, gt, cfg, bins);
        } catch (const std::exception& e) {
            stage_fail("mono", e);
        }
        for (auto& sup : mono_stage.supervised) {
            InstanceLossRecord rec;
            rec.instance_id = sup.instance_id;
            rec.group = sup.group;
            rec.voted_depth = sup.voted_depth;
            rec.abs_loss = (sup.pred.array() - sup.voted_depth).square().mean();
            rec.rel_loss = (sup.pred - sup.gt).array().square().mean();
            out.report.instance_losses.push_back(rec);
            all_supervised.push_back(std::move(sup));
        }
        if (mono_stage.ce_pixels > 0) {
            ce_weighted.push_back(mono_stage.ce_value * mono_stage.ce_pixels);
            ce_pixels += mono_stage.ce_pixels;
        }

        std::vector<bev::PixelDistribution> stereo_dists;
        if (cfg.sbl_enabled && !cfg.sbl.schedule.empty()) {
            std::vector<std::pair<int, int>> foreground;
            for (const auto& mask : rendered_t.masks)
                foreground.insert(foreground.end(), mask.pixels.begin(), mask.pixels.end());
            out.report.foreground_pixels += foreground.size();
            try {
                stereo::SblResult sbl =
                    stereo::run_sbl(foreground, feat_t, feat_tm1, rig, bins, cfg.sbl);
                for (std::size_t i = 0; i < sbl.pixels.size(); ++i) {
                    if (!sbl.per_pixel[i]) continue;
                    stereo_dists.push_back({sbl.pixels[i], sbl.per_pixel[i]->bin_distribution});
                    const auto [u, v] = sbl.pixels[i];
                    stereo_pred.push_back(
                        mono::expected_depth(sbl.per_pixel[i]->bin_distribution, bins));
                    stereo_gt.push_back(rendered_t.depth_at(u, v));
                }
                // Merge counters across rigs round by round.
                for (const auto& c : sbl.counters) {
                    if (out.report.sbl_counters.size() <= static_cast<std::size_t>(c.iteration))
                        out.report.sbl_counters.push_back(c);
                    else {
                        auto& acc = out.report.sbl_counters[c.iteration];
                        acc.pixels += c.pixels;
                        acc.entries_total += c.entries_total;
                        acc.entries_valid += c.entries_valid;
                        acc.settled += c.settled;
                        acc.dropped += c.dropped;
                    }
                }
                out.sbl.push_back(std::move(sbl));
            } catch (const std::exception& e) {
                stage_fail("sbl", e);
            }
        } else {
            for (const auto& mask : rendered_t.masks)
                out.report.foreground_pixels += mask.pixels.size();
        }

        try {
            bev::FusedDepth fused =
                bev::fuse(mono_stage.pixel_dists, stereo_dists, cfg.fusion);
            for (std::size_t i = 0; i < fused.pixels.size(); ++i) {
                const auto [u, v] = fused.pixels[i];
                fused_pred.push_back(mono::expected_depth(
                    Eigen::VectorXd(fused.dist.col(static_cast<Eigen::Index>(i))), bins));
                fused_gt.push_back(rendered_t.depth_at(u, v));
            }
            grids.push_back(bev::lift_splat(fused, feat_t, rig, bins, cfg.bev));
            out.fused.push_back(std::move(fused));
        } catch (const std::exception& e) {
            stage_fail("bev", e);
        }

        out.rendered_t.push_back(std::move(rendered_t));
        out.rendered_tm1.push_back(std::move(rendered_tm1));
    }

    try {
        if (!all_supervised.empty()) {
            out.report.loss_abs = mono::abs_depth_loss(all_supervised).value;
            out.report.loss_rel = mono::rel_depth_loss(all_supervised).value;
        }
        if (ce_pixels > 0)
            out.report.loss_ce = pairwise_sum(ce_weighted) / static_cast<double>(ce_pixels);
        out.report.supervised_instances = static_cast<int>(all_supervised.size());
        out.report.loss_total = mono::total_loss(out.report.loss_det, out.report.loss_ce,
                                                 out.report.loss_abs, out.report.loss_rel,
                                                 cfg.weights);
        if (!fused_pred.empty())
            out.report.fused_metrics = metrics::depth_metrics(fused_pred, fused_gt);
        if (!stereo_pred.empty())
            out.report.stereo_metrics = metrics::depth_metrics(stereo_pred, stereo_gt);
    } catch (const std::exception& e) {
        stage_fail("metrics", e);
    }

    // Merge per-rig grids in rig order.
    if (!grids.empty()) {
        out.grid = std::move(grids.front());
        for (std::size_t i = 1; i < grids.size(); ++i) {
            out.grid.features += grids[i].features;
            out.grid.weight += grids[i].weight;
            out.grid.dropped_mass += grids[i].dropped_mass;
        }
    }
    out.report.bev_total_weight = out.grid.weight.size() ? out.grid.weight.sum() : 0.0;
    out.report.bev_dropped_mass = out.grid.dropped_mass;

    out.report.timing_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
            .count();
    return out;
}

std::string report_to_json(const RunReport& report) {
    nlohmann::json j;
    j["config_digest"] = report.config_digest;
    j["seed"] = report.seed;
    j["losses"] = {{"det", report.loss_det},
                   {"ce", report.loss_ce},
                   {"abs", report.loss_abs},
                   {"rel", report.loss_rel},
                   {"total", report.loss_total}};
    j["supervised_instances"] = report.supervised_instances;
    j["foreground_pixels"] = report.foreground_pixels;
    auto metrics_json = [](const metrics::DepthMetrics& m) {
        return nlohmann::json{{"silog", m.silog},
                              {"abs_rel", m.abs_rel},
                              {"sq_rel", m.sq_rel},
                              {"log10", m.log10},
                              {"rmse", m.rmse}};
    };
    // Metric formulas (Eigen-style convention), kept in the report header for
    // auditability:
    j["metric_formulas"] = {
        {"abs_rel", "mean(|p-g|/g)"},
        {"sq_rel", "mean((p-g)^2/g)"},
        {"rmse", "sqrt(mean((p-g)^2))"},
        {"log10", "mean(|log10 p - log10 g|)"},
        {"silog", "100*sqrt(mean(e^2)-mean(e)^2), e=ln p-ln g"}};
    if (report.fused_metrics) j["fused_metrics"] = metrics_json(*report.fused_metrics);
    if (report.stereo_metrics) j["stereo_metrics"] = metrics_json(*report.stereo_metrics);
    j["sbl_iterations"] = nlohmann::json::array();
    for (const auto& c : report.sbl_counters)
        j["sbl_iterations"].push_back({{"iteration", c.iteration},
                                       {"hypotheses", c.hypotheses},
                                       {"pixels", c.pixels},
                                       {"entries_total", c.entries_total},
                                       {"entries_valid", c.entries_valid},
                                       {"settled", c.settled},
                                       {"dropped", c.dropped}});
    j["bev"] = {{"total_weight", report.bev_total_weight},
                {"dropped_mass", report.bev_dropped_mass}};
    j["timing_ms"] = report.timing_ms;
    return j.dump(2) + "\n";
}

void write_artifacts(const RunProducts& products, const config::RunConfig& cfg,
                     const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    {
        std::ofstream report(out_dir / "report.json");
        report << report_to_json(products.report);
    }
    {
        std::ofstream losses(out_dir / "losses.csv");
        losses << "instance_id,group,voted_depth,abs_loss,rel_loss\n";
        for (const auto& rec : products.report.instance_losses)
            losses << rec.instance_id << "," << rec.group << "," << rec.voted_depth << ","
                   << rec.abs_loss << "," << rec.rel_loss << "\n";
    }
    {
        std::ofstream counters(out_dir / "counters.csv");
        counters << "iteration,hypotheses,pixels,entries_total,entries_valid,settled,dropped\n";
        for (const auto& c : products.report.sbl_counters)
            counters << c.iteration << "," << c.hypotheses << "," << c.pixels << ","
                     << c.entries_total << "," << c.entries_valid << "," << c.settled << ","
                     << c.dropped << "\n";
    }

    for (std::size_t r = 0; r < products.rendered_t.size(); ++r) {
        const auto& rt = products.rendered_t[r];
        const std::string tag = "cam" + std::to_string(r);
        pgm::write(out_dir / (tag + "_depth_t.pgm"),
                   pgm::encode_depth(rt.depth, rt.width, rt.height));
        const auto& rp = products.rendered_tm1[r];
        pgm::write(out_dir / (tag + "_depth_tm1.pgm"),
                   pgm::encode_depth(rp.depth, rp.width, rp.height));

        pgm::Image8 mask_img;
        mask_img.width = rt.width;
        mask_img.height = rt.height;
        mask_img.pixels.resize(rt.instance.size());
        for (std::size_t i = 0; i < rt.instance.size(); ++i)
            mask_img.pixels[i] = static_cast<std::uint8_t>(rt.instance[i] + 1);
        pgm::write(out_dir / (tag + "_mask_t.pgm"), mask_img);

        // Fused per-pixel expected depth rendered into the frame.
        if (r < products.fused.size()) {
            const geometry::DepthBins bins = cfg.bins.make();
            std::vector<double> pred(rt.depth.size(),
                                     std::numeric_limits<double>::infinity());
            const auto& fused = products.fused[r];
            for (std::size_t i = 0; i < fused.pixels.size(); ++i) {
                const auto [u, v] = fused.pixels[i];
                pred[static_cast<std::size_t>(v) * rt.width + u] = mono::expected_depth(
                    Eigen::VectorXd(fused.dist.col(static_cast<Eigen::Index>(i))), bins);
            }
            pgm::write(out_dir / (tag + "_depth_pred.pgm"),
                       pgm::encode_depth(pred, rt.width, rt.height));
        }
    }

    if (products.grid.weight.size() > 0) {
        const auto& grid = products.grid;
        pgm::Image16 img;
        img.width = grid.nx;
        img.height = grid.ny;
        img.pixels.resize(static_cast<std::size_t>(grid.nx) * grid.ny);
        const double max_w = grid.weight.maxCoeff();
        for (Eigen::Index i = 0; i < grid.weight.size(); ++i)
            img.pixels[static_cast<std::size_t>(i)] =
                max_w > 0.0 ? static_cast<std::uint16_t>(
                                  std::round(grid.weight[i] / max_w * 65535.0))
                            : 0;
        pgm::write(out_dir / "bev_weight.pgm", img);
    }
}

}  // namespace iabev::pipeline
