#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "iabev/pipeline.hpp"

using namespace iabev;
using namespace iabev::pipeline;

namespace {

config::RunConfig tiny_config() {
    config::RunConfig cfg;
    cfg.scene.intrinsics = {120.0, 120.0, 39.5, 39.5, 80, 80};
    cfg.scene.object_counts = {{scene::Category::kCar, 1},
                               {scene::Category::kPedestrian, 1}};
    cfg.scene.depth_min = 12.0;
    cfg.scene.depth_max = 25.0;
    cfg.scene.lateral_min = -3.0;
    cfg.scene.lateral_max = 3.0;
    cfg.scene.ego_translation = {0.25, 0.0, 0.0};
    return cfg;
}

std::string strip_timing(std::string text) {
    return std::regex_replace(text, std::regex("\"timing_ms\": [0-9.eE+-]+"),
                              "\"timing_ms\": 0");
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("sweep_schedule") {
    CHECK(sweep_schedule(0).empty());
    CHECK(sweep_schedule(1) == std::vector<int>{12});
    CHECK(sweep_schedule(2) == std::vector<int>{12, 20});
    CHECK(sweep_schedule(3) == std::vector<int>{12, 20, 28});
    CHECK_THROWS_AS(sweep_schedule(-1), std::domain_error);
}

TEST_CASE("run_experiment produces a coherent report") {
    const config::RunConfig cfg = tiny_config();
    const RunProducts products = run_experiment(cfg, 5);
    const RunReport& r = products.report;

    CHECK(r.seed == 5);
    CHECK(r.supervised_instances >= 1);
    CHECK(r.foreground_pixels > 0);
    CHECK(std::isfinite(r.loss_total));
    CHECK(r.loss_total ==
          doctest::Approx(cfg.weights.det * r.loss_det + cfg.weights.ce * r.loss_ce +
                          cfg.weights.abs * r.loss_abs + cfg.weights.rel * r.loss_rel));
    REQUIRE(r.sbl_counters.size() == 2);
    CHECK(r.sbl_counters[0].hypotheses == 12);
    CHECK(r.sbl_counters[1].hypotheses == 20);
    CHECK(r.sbl_counters[1].pixels <= r.sbl_counters[0].pixels);
    REQUIRE(r.fused_metrics.has_value());
    REQUIRE(r.stereo_metrics.has_value());
    CHECK(r.bev_total_weight > 0.0);

    // Every fused column is a distribution.
    for (const auto& fused : products.fused)
        for (Eigen::Index c = 0; c < fused.dist.cols(); ++c)
            CHECK(fused.dist.col(c).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("disabling SBL removes stereo products") {
    config::RunConfig cfg = tiny_config();
    cfg.sbl_enabled = false;
    const RunProducts products = run_experiment(cfg, 5);
    CHECK(products.sbl.empty());
    CHECK(products.report.sbl_counters.empty());
    CHECK_FALSE(products.report.stereo_metrics.has_value());
    REQUIRE(products.report.fused_metrics.has_value());
}

TEST_CASE("reports are identical across runs modulo timing") {
    const config::RunConfig cfg = tiny_config();
    const std::string a = strip_timing(report_to_json(run_experiment(cfg, 11).report));
    const std::string b = strip_timing(report_to_json(run_experiment(cfg, 11).report));
    CHECK(a == b);
    const std::string c = strip_timing(report_to_json(run_experiment(cfg, 12).report));
    CHECK(a != c);
}

TEST_CASE("write_artifacts emits the expected files byte-identically") {
    const config::RunConfig cfg = tiny_config();
    const auto dir1 = std::filesystem::temp_directory_path() / "iabev_test_art1";
    const auto dir2 = std::filesystem::temp_directory_path() / "iabev_test_art2";
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
    write_artifacts(run_experiment(cfg, 2), cfg, dir1);
    write_artifacts(run_experiment(cfg, 2), cfg, dir2);

    for (const char* name : {"report.json", "losses.csv", "counters.csv",
                             "cam0_depth_t.pgm", "cam0_depth_tm1.pgm", "cam0_mask_t.pgm",
                             "cam0_depth_pred.pgm", "bev_weight.pgm"}) {
        CAPTURE(name);
        REQUIRE(std::filesystem::exists(dir1 / name));
        std::string a = slurp(dir1 / name);
        std::string b = slurp(dir2 / name);
        if (std::string(name) == "report.json") {
            a = strip_timing(a);
            b = strip_timing(b);
        }
        CHECK(a == b);
    }
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("stage failures name the failing stage") {
    config::RunConfig cfg = tiny_config();
    cfg.scene.object_counts = {{scene::Category::kBus, 40}};
    cfg.scene.min_bearing_gap = 0.4;
    cfg.scene.max_retries = 10;
    CHECK_THROWS_WITH_AS(run_experiment(cfg, 1), doctest::Contains("generate"),
                         std::runtime_error);
}
