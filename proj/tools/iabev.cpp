#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "iabev/config.hpp"
#include "iabev/metrics.hpp"
#include "iabev/mono.hpp"
#include "iabev/pgm.hpp"
#include "iabev/pipeline.hpp"

namespace {

using namespace iabev;

struct CommonOpts {
    std::uint64_t seed = 1;
    std::string config_path;
    std::string out_dir = "out";
    double sigma_t = -1.0;       // <0 means "leave config default"
    std::string schedule;        // "12,20"
    std::string bins;            // "2:58:112"
    std::string fusion;          // "prob" | "logit"
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--seed", o.seed, "experiment seed");
    cmd->add_option("--config", o.config_path, "JSON config path");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--sigma-t", o.sigma_t, "settle threshold in meters");
    cmd->add_option("--schedule", o.schedule, "hypothesis counts, e.g. 12,20");
    cmd->add_option("--bins", o.bins, "depth bins as min:max:count, e.g. 2:58:112");
    cmd->add_option("--fusion", o.fusion, "fusion mode: prob or logit");
}

config::RunConfig make_config(const CommonOpts& o) {
    config::RunConfig cfg;
    if (!o.config_path.empty()) cfg = config::load_config(o.config_path);
    if (o.sigma_t >= 0.0) cfg.sbl.sigma_t = o.sigma_t;
    if (!o.schedule.empty()) {
        std::vector<int> sched;
        std::stringstream ss(o.schedule);
        std::string tok;
        while (std::getline(ss, tok, ',')) sched.push_back(std::stoi(tok));
        if (sched.empty()) throw std::runtime_error("config: empty --schedule");
        cfg.sbl.schedule = sched;
    }
    if (!o.bins.empty()) {
        double lo, hi;
        int count;
        char c1, c2;
        std::stringstream ss(o.bins);
        if (!(ss >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':')
            throw std::runtime_error("config: --bins expects min:max:count");
        cfg.bins = {lo, hi, count};
    }
    if (!o.fusion.empty()) {
        if (o.fusion == "prob")
            cfg.fusion = bev::FusionMode::kProbability;
        else if (o.fusion == "logit")
            cfg.fusion = bev::FusionMode::kLogit;
        else
            throw std::runtime_error("config: --fusion expects prob or logit");
    }
    return cfg;
}

int cmd_generate(const CommonOpts& o) {
    config::RunConfig cfg = make_config(o);
    const scene::Scene sc = scene::generate_scene(cfg.scene, o.seed);
    std::filesystem::create_directories(o.out_dir);

    nlohmann::json j;
    j["seed"] = o.seed;
    j["objects"] = nlohmann::json::array();
    for (const auto& obj : sc.objects)
        j["objects"].push_back({{"category", scene::to_string(obj.category)},
                                {"center", {obj.center.x(), obj.center.y(), obj.center.z()}},
                                {"size", {obj.size.x(), obj.size.y(), obj.size.z()}},
                                {"yaw", obj.yaw}});
    std::ofstream(std::filesystem::path(o.out_dir) / "scene.json") << j.dump(2) << "\n";

    for (std::size_t r = 0; r < sc.rigs.size(); ++r) {
        const std::string tag = "cam" + std::to_string(r);
        for (auto frame : {scene::FrameId::kT, scene::FrameId::kTm1}) {
            const auto rendered = scene::render(sc, sc.rigs[r], frame);
            const std::string suffix = frame == scene::FrameId::kT ? "_depth_t" : "_depth_tm1";
            pgm::write(std::filesystem::path(o.out_dir) / (tag + suffix + ".pgm"),
                       pgm::encode_depth(rendered.depth, rendered.width, rendered.height));
        }
    }
    std::cout << "generated scene with " << sc.objects.size() << " objects into " << o.out_dir
              << "\n";
    return 0;
}

int cmd_run(const CommonOpts& o) {
    config::RunConfig cfg = make_config(o);
    const pipeline::RunProducts products = pipeline::run_experiment(cfg, o.seed);
    pipeline::write_artifacts(products, cfg, o.out_dir);
    std::cout << "total loss " << products.report.loss_total;
    if (products.report.fused_metrics)
        std::cout << ", fused RMSE " << products.report.fused_metrics->rmse;
    std::cout << ", report in " << o.out_dir << "\n";
    return 0;
}

int cmd_sweep(const CommonOpts& o, int iterations) {
    config::RunConfig cfg = make_config(o);
    std::filesystem::create_directories(o.out_dir);
    std::ofstream csv(std::filesystem::path(o.out_dir) / "sweep.csv");
    csv << "rounds,iteration,hypotheses,pixels,entries_total,stereo_rmse\n";
    for (int rounds = 0; rounds <= iterations; ++rounds) {
        config::RunConfig variant = cfg;
        variant.sbl.schedule = pipeline::sweep_schedule(rounds);
        variant.sbl_enabled = rounds > 0;
        const pipeline::RunProducts products = pipeline::run_experiment(variant, o.seed);
        pipeline::write_artifacts(products, variant,
                                  std::filesystem::path(o.out_dir) /
                                      ("rounds_" + std::to_string(rounds)));
        const double rmse = products.report.stereo_metrics
                                ? products.report.stereo_metrics->rmse
                                : std::numeric_limits<double>::quiet_NaN();
        if (products.report.sbl_counters.empty())
            csv << rounds << ",-,0,0,0," << rmse << "\n";
        for (const auto& c : products.report.sbl_counters)
            csv << rounds << "," << c.iteration << "," << c.hypotheses << "," << c.pixels << ","
                << c.entries_total << "," << rmse << "\n";
    }
    std::cout << "sweep written to " << o.out_dir << "/sweep.csv\n";
    return 0;
}

/// Loss and gradient self-check over randomized supervised instances.
int cmd_losses(const CommonOpts& o) {
    const auto bins = geometry::make_bins(2.0, 58.0, 112);
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> depth_dist(3.0, 55.0);
    std::uniform_int_distribution<int> count_dist(2, 24);

    double worst_rel = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<mono::SupervisedInstance> instances;
        const int n = 1 + static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i) {
            mono::SupervisedInstance inst;
            inst.instance_id = i;
            const int m = count_dist(rng);
            inst.pred.resize(m);
            inst.gt.resize(m);
            for (int p = 0; p < m; ++p) {
                inst.pred[p] = depth_dist(rng);
                inst.gt[p] = depth_dist(rng);
            }
            inst.voted_depth = depth_dist(rng);
            instances.push_back(std::move(inst));
        }
        for (const bool use_abs : {true, false}) {
            const auto loss = use_abs ? mono::abs_depth_loss(instances)
                                      : mono::rel_depth_loss(instances);
            const double h = 1e-5;
            for (std::size_t i = 0; i < instances.size(); ++i) {
                for (Eigen::Index p = 0; p < instances[i].pred.size(); ++p) {
                    auto plus = instances;
                    auto minus = instances;
                    plus[i].pred[p] += h;
                    minus[i].pred[p] -= h;
                    const double fp = use_abs ? mono::abs_depth_loss(plus).value
                                              : mono::rel_depth_loss(plus).value;
                    const double fm = use_abs ? mono::abs_depth_loss(minus).value
                                              : mono::rel_depth_loss(minus).value;
                    const double fd = (fp - fm) / (2.0 * h);
                    const double an = loss.grads[i][p];
                    const double rel =
                        std::abs(fd - an) / std::max(1.0, std::max(std::abs(fd), std::abs(an)));
                    worst_rel = std::max(worst_rel, rel);
                }
            }
        }
    }
    std::cout << "gradient check worst relative error " << worst_rel << "\n";
    if (worst_rel > 1e-4) {
        std::cerr << "stage 'losses': gradient check failed\n";
        return 1;
    }
    (void)bins;
    return 0;
}

int cmd_metrics(const std::string& pred_path, const std::string& gt_path) {
    const auto pred_img = pgm::read16(pred_path);
    const auto gt_img = pgm::read16(gt_path);
    if (pred_img.width != gt_img.width || pred_img.height != gt_img.height)
        throw std::runtime_error("metrics: image dimensions differ");
    const auto pred = pgm::decode_depth(pred_img);
    const auto gt = pgm::decode_depth(gt_img);
    std::vector<double> mp, mg;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (std::isfinite(pred[i]) && std::isfinite(gt[i])) {
            mp.push_back(pred[i]);
            mg.push_back(gt[i]);
        }
    }
    const auto m = metrics::depth_metrics(mp, mg);
    std::cout << "silog,abs_rel,sq_rel,log10,rmse\n"
              << m.silog << "," << m.abs_rel << "," << m.sq_rel << "," << m.log10 << ","
              << m.rmse << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depth estimation and BEV projection engine"};
    app.require_subcommand(1);

    CommonOpts opts;
    int sweep_iterations = 3;
    std::string pred_path, gt_path;

    auto* generate = app.add_subcommand("generate", "emit scene and rendered depth maps");
    add_common(generate, opts);
    auto* run = app.add_subcommand("run", "full pipeline");
    add_common(run, opts);
    auto* sweep = app.add_subcommand("sweep", "iteration-count sweep");
    add_common(sweep, opts);
    sweep->add_option("--iterations", sweep_iterations, "max round count (0..3)")
        ->check(CLI::Range(0, 3));
    auto* losses = app.add_subcommand("losses", "loss and gradient check suite");
    add_common(losses, opts);
    auto* metrics_cmd = app.add_subcommand("metrics", "evaluate prediction graymap against gt");
    metrics_cmd->add_option("--pred", pred_path, "16-bit prediction graymap")->required();
    metrics_cmd->add_option("--gt", gt_path, "16-bit ground-truth graymap")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(opts);
        if (run->parsed()) return cmd_run(opts);
        if (sweep->parsed()) return cmd_sweep(opts, sweep_iterations);
        if (losses->parsed()) return cmd_losses(opts);
        if (metrics_cmd->parsed()) return cmd_metrics(pred_path, gt_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
