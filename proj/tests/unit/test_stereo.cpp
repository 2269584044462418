#include <doctest.h>

#include <cmath>

#include "iabev/stereo.hpp"

using namespace iabev;
using namespace iabev::stereo;

namespace {

const geometry::DepthBins kBins = geometry::make_bins(2.0, 58.0, 112);

scene::FeatureMap constant_map(int width, int height, std::vector<float> value) {
    scene::FeatureMap m;
    m.width = width;
    m.height = height;
    m.channels = static_cast<int>(value.size());
    m.data.resize(static_cast<std::size_t>(width) * height * value.size());
    for (int v = 0; v < height; ++v)
        for (int u = 0; u < width; ++u)
            std::copy(value.begin(), value.end(), m.at(u, v).begin());
    return m;
}

}  // namespace

TEST_CASE("propose_initial midpoints") {
    const auto h12 = propose_initial(kBins, 12);
    REQUIRE(h12.size() == 12);
    const double spacing = 56.0 / 12.0;
    CHECK(h12[0] == doctest::Approx(2.0 + spacing / 2));
    for (std::size_t i = 1; i < h12.size(); ++i)
        CHECK(h12[i] - h12[i - 1] == doctest::Approx(spacing));

    const auto h2 = propose_initial(kBins, 2);
    REQUIRE(h2.size() == 2);
    CHECK(h2[0] == doctest::Approx(16.0));
    CHECK(h2[1] == doctest::Approx(44.0));

    CHECK_THROWS_AS(propose_initial(kBins, 1), std::domain_error);
}

TEST_CASE("sample_range midpoints") {
    const auto h = sample_range(10.0, 14.0, 4);
    REQUIRE(h.size() == 4);
    CHECK(h[0] == doctest::Approx(10.5));
    CHECK(h[3] == doctest::Approx(13.5));
}

TEST_CASE("stats hand oracles") {
    SUBCASE("one-hot") {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(3);
        s[1] = 1.0;
        const std::vector<double> h{4.0, 8.0, 12.0};
        const MatchStats ms = stats(s, h);
        CHECK(ms.mu == doctest::Approx(8.0).epsilon(1e-12));
        CHECK(ms.sigma == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("bimodal") {
        Eigen::VectorXd s(3);
        s << 0.5, 0.0, 0.5;
        const std::vector<double> h{4.0, 8.0, 12.0};
        const MatchStats ms = stats(s, h);
        CHECK(ms.mu == doctest::Approx(8.0).epsilon(1e-12));
        CHECK(ms.sigma == doctest::Approx(4.0).epsilon(1e-12));
    }
    SUBCASE("uniform") {
        Eigen::VectorXd s = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
        const std::vector<double> h{4.0, 8.0, 12.0};
        const MatchStats ms = stats(s, h);
        CHECK(ms.mu == doctest::Approx(8.0).epsilon(1e-12));
        CHECK(ms.sigma == doctest::Approx(std::sqrt(32.0 / 3.0)).epsilon(1e-12));
    }
}

TEST_CASE("partition settles strictly below the threshold") {
    std::vector<MatchStats> stats_per_pixel(3);
    stats_per_pixel[0].sigma = 0.0;
    stats_per_pixel[1].sigma = 5.0;
    stats_per_pixel[2].sigma = 1.0;  // exactly sigma_t
    const Partition p = partition(stats_per_pixel, 1.0);
    REQUIRE(p.settled.size() == 1);
    CHECK(p.settled[0] == 0);
    REQUIRE(p.boosted.size() == 2);
    CHECK(p.boosted[0] == 1);
    CHECK(p.boosted[1] == 2);
}

TEST_CASE("refine_range Eq oracle and clamping") {
    MatchStats ms;
    ms.mu = 10.0;
    ms.sigma = 1.0;
    auto r = refine_range(ms, kBins);
    CHECK(r.lo == doctest::Approx(7.0));
    CHECK(r.hi == doctest::Approx(13.0));
    CHECK_FALSE(r.empty);

    ms.mu = 4.0;
    r = refine_range(ms, kBins);
    CHECK(r.lo == doctest::Approx(2.0));
    CHECK(r.hi == doctest::Approx(7.0));

    ms.mu = 10.0;
    ms.sigma = 0.0;
    r = refine_range(ms, kBins);
    CHECK(r.lo == doctest::Approx(9.75));
    CHECK(r.hi == doctest::Approx(10.25));

    ms.mu = 100.0;
    ms.sigma = 1.0;
    r = refine_range(ms, kBins);
    CHECK(r.empty);
}

TEST_CASE("fill_bins behavior") {
    SUBCASE("hypotheses at bin centers keep their mass there") {
        Eigen::VectorXd s(3);
        s << 0.2, 0.5, 0.3;
        const std::vector<double> h{kBins.centers[10], kBins.centers[11], kBins.centers[12]};
        const Eigen::VectorXd d = fill_bins(s, h, kBins);
        CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(d[10] / d[12] == doctest::Approx(0.2 / 0.3).epsilon(1e-9));
        CHECK(d[11] == d.maxCoeff());
        for (int k = 0; k < 10; ++k) CHECK(d[k] == 0.0);
        for (int k = 13; k < kBins.count; ++k) CHECK(d[k] == 0.0);
    }
    SUBCASE("one-hot scores peak at the hypothesis's bin") {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(5);
        s[2] = 1.0;
        const std::vector<double> h{20.0, 22.0, 24.0, 26.0, 28.0};
        const Eigen::VectorXd d = fill_bins(s, h, kBins);
        Eigen::Index argmax;
        d.maxCoeff(&argmax);
        // The tent peak at 24.0 sits on the edge between bins 43 and 44, so
        // either may carry the (joint) maximum.
        CHECK(std::abs(argmax - *geometry::bin_index(24.0, kBins)) <= 1);
        CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("uniform scores cover the hypothesis span") {
        Eigen::VectorXd s = Eigen::VectorXd::Constant(4, 0.25);
        const std::vector<double> h{20.0, 24.0, 28.0, 32.0};
        const Eigen::VectorXd d = fill_bins(s, h, kBins);
        CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(d[*geometry::bin_index(19.0, kBins)] == 0.0);
        CHECK(d[*geometry::bin_index(25.0, kBins)] > 0.0);
        CHECK(d[*geometry::bin_index(33.0, kBins)] == 0.0);
    }
    SUBCASE("single hypothesis places all mass in its bin") {
        Eigen::VectorXd s(1);
        s << 1.0;
        const std::vector<double> h{33.3};
        const Eigen::VectorXd d = fill_bins(s, h, kBins);
        CHECK(d[*geometry::bin_index(33.3, kBins)] == doctest::Approx(1.0));
    }
}

TEST_CASE("bilinear_sample interpolates and rejects border taps") {
    scene::FeatureMap m;
    m.width = 3;
    m.height = 3;
    m.channels = 1;
    m.data = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    auto center = bilinear_sample(m, 1.0, 1.0);
    REQUIRE(center.has_value());
    CHECK((*center)[0] == doctest::Approx(4.0));
    auto mid = bilinear_sample(m, 0.5, 0.5);
    REQUIRE(mid.has_value());
    CHECK((*mid)[0] == doctest::Approx((0 + 1 + 3 + 4) / 4.0));
    CHECK_FALSE(bilinear_sample(m, 2.5, 1.0).has_value());
    CHECK_FALSE(bilinear_sample(m, -0.1, 1.0).has_value());
}

TEST_CASE("cost volume with identity ego motion pairs each pixel with itself") {
    const std::vector<float> fg{1.0f, -1.0f, 0.5f, 2.0f};
    scene::FeatureMap map = constant_map(16, 16, fg);
    // Vary one channel per pixel so self-matches are recognizable.
    for (int v = 0; v < 16; ++v)
        for (int u = 0; u < 16; ++u) map.at(u, v)[0] = static_cast<float>(v * 16 + u);

    scene::CameraRig rig;
    rig.intrinsics = {50.0, 50.0, 7.5, 7.5, 16, 16};
    const std::vector<std::pair<int, int>> pixels{{4, 5}, {9, 2}};
    const std::vector<std::vector<double>> hyps(2, propose_initial(kBins, 12));

    const SparseCostVolume vol = build_cost_volume(pixels, hyps, map, map, rig);
    REQUIRE(vol.entries.size() == 2);
    CHECK(vol.total_count() == 24);
    for (std::size_t p = 0; p < pixels.size(); ++p) {
        REQUIRE(vol.entries[p].size() == 12);
        for (const CostEntry& e : vol.entries[p]) {
            REQUIRE(e.valid);
            CHECK(e.ref == e.src);
        }
    }

    const auto scores = match_scores(vol, 1.0);
    for (const auto& s : scores) {
        REQUIRE(s.has_value());
        // Perfect match everywhere: uniform softmax.
        for (Eigen::Index j = 0; j < s->size(); ++j)
            CHECK((*s)[j] == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
    }
}

TEST_CASE("match_scores masks invalid entries") {
    SparseCostVolume vol;
    vol.channels = 1;
    vol.entries.resize(1);
    for (int j = 0; j < 3; ++j) {
        CostEntry e;
        e.valid = j != 1;
        e.ref = {1.0f};
        e.src = {j == 0 ? 1.0f : 3.0f};
        vol.entries[0].push_back(e);
    }
    const auto scores = match_scores(vol, 1.0);
    REQUIRE(scores[0].has_value());
    CHECK((*scores[0])[1] == 0.0);
    CHECK(scores[0]->sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((*scores[0])[0] > (*scores[0])[2]);

    SparseCostVolume all_invalid;
    all_invalid.channels = 1;
    all_invalid.entries.resize(1);
    all_invalid.entries[0].resize(3);
    CHECK_FALSE(match_scores(all_invalid, 1.0)[0].has_value());
}

TEST_CASE("run_sbl validates its schedule") {
    scene::FeatureMap map = constant_map(8, 8, {1.0f});
    scene::CameraRig rig;
    rig.intrinsics = {50.0, 50.0, 3.5, 3.5, 8, 8};
    const std::vector<std::pair<int, int>> pixels{{4, 4}};
    SblConfig cfg;
    cfg.schedule = {};
    CHECK_THROWS_AS(run_sbl(pixels, map, map, rig, kBins, cfg), std::domain_error);
    cfg.schedule = {20, 12};
    CHECK_THROWS_AS(run_sbl(pixels, map, map, rig, kBins, cfg), std::domain_error);
}

TEST_CASE("run_sbl single round equals the first iteration of two rounds") {
    scene::FeatureMap map = constant_map(16, 16, {0.5f});
    for (int v = 0; v < 16; ++v)
        for (int u = 0; u < 16; ++u) map.at(u, v)[0] = static_cast<float>((u * 7 + v) % 5);
    scene::CameraRig rig;
    rig.intrinsics = {50.0, 50.0, 7.5, 7.5, 16, 16};
    rig.ego_motion.translation = {0.05, 0.0, 0.0};
    const std::vector<std::pair<int, int>> pixels{{4, 5}, {9, 2}, {12, 12}};

    SblConfig one;
    one.schedule = {12};
    SblConfig two;
    two.schedule = {12, 20};

    const SblResult r1 = run_sbl(pixels, map, map, rig, kBins, one);
    const SblResult r2 = run_sbl(pixels, map, map, rig, kBins, two);
    REQUIRE(r1.counters.size() == 1);
    REQUIRE(r2.counters.size() == 2);
    CHECK(r1.counters[0].pixels == r2.counters[0].pixels);
    CHECK(r1.counters[0].entries_total == r2.counters[0].entries_total);
    CHECK(r1.counters[0].settled == r2.counters[0].settled);
    CHECK(r2.counters[1].pixels <= r2.counters[0].pixels);
}
