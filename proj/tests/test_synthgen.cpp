#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "chm/synthgen.hpp"

using namespace chm;
using namespace chm::synth;

TEST_CASE("truncated normal: support, moments, determinism") {
    const auto v = truncated_normal(1000000, 0.2, -0.95, 0.95, 42);
    double mean = 0.0;
    for (double x : v) {
        CHECK(x >= -0.95);
        CHECK(x <= 0.95);
        mean += x;
    }
    mean /= static_cast<double>(v.size());
    CHECK(std::abs(mean) <= 0.002);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(v.size()));
    CHECK(sd >= 0.197);
    CHECK(sd <= 0.203);

    const auto w = truncated_normal(1000, 0.2, -0.95, 0.95, 7);
    const auto w2 = truncated_normal(1000, 0.2, -0.95, 0.95, 7);
    CHECK(w == w2);

    CHECK_THROWS(truncated_normal(10, 0.2, 1.0, -1.0, 0));
    CHECK_THROWS(truncated_normal(10, 0.0, -1.0, 1.0, 0));
}

TEST_CASE("gen_q10: base respiration floor, exponent identities") {
    auto drivers = synthetic_drivers({2003, 120, 47.0, 3});
    Q10GenConfig cfg;
    cfg.noise = false;
    auto f = gen_q10(drivers, cfg);

    const auto& rb = f.col("R_b_syn");
    const double rb_min = *std::min_element(rb.begin(), rb.end());
    CHECK(std::abs(rb_min - 0.075 * 3.14159265358979323846) <= 1e-12);
    for (double v : rb) CHECK(v > 0.0);
    for (double v : f.col("R_eco_syn")) CHECK(v > 0.0);

    // TA = 15 row: R_eco equals R_b exactly (exponent zero); synthesize one
    FluxFrame dd(std::vector<std::int64_t>{200301010000LL, 200301010030LL, 200301010100LL});
    dd.add_column("TA", {15.0, 25.0, 5.0});
    dd.add_column("SW_POT", {100.0, 100.0, 100.0});
    auto g = gen_q10(dd, cfg);
    CHECK(g.col("R_eco_syn")[0] == doctest::Approx(g.col("R_b_syn")[0]).epsilon(1e-15));
    // TA = 25, q10 = 1.5: R_eco = 1.5 * R_b
    CHECK(g.col("R_eco_syn")[1] == doctest::Approx(1.5 * g.col("R_b_syn")[1]).epsilon(1e-15));

    // determinism with noise
    Q10GenConfig noisy;
    noisy.seed = 9;
    auto a = gen_q10(drivers, noisy);
    auto b = gen_q10(drivers, noisy);
    CHECK(a.col("R_eco_syn") == b.col("R_eco_syn"));

    // noise bounds keep respiration positive
    for (double v : a.col("R_eco_syn")) CHECK(v > 0.0);

    CHECK_THROWS(gen_q10(FluxFrame{}, cfg));
}

TEST_CASE("gen_lue: LUE saturation and noise behavior") {
    FluxFrame dd(std::vector<std::int64_t>{200301010000LL, 200301010030LL, 200301010100LL,
                                           200301010130LL});
    dd.add_column("TA", {20.0, 20.0, 30.0, 20.0});
    dd.add_column("VPD", {10.0, 5.0, 10.0, 20.0});
    dd.add_column("SW_IN", {50.0, 50.0, 50.0, 0.0});
    dd.add_column("SW_POT", {100.0, 100.0, 100.0, 0.0});
    LueGenConfig cfg;
    auto f = gen_lue(dd, cfg);

    // TA=20, VPD=10 -> LUE = 0.5 exactly
    CHECK(f.col("LUE_syn")[0] == 0.5);
    // min clamps at 1 below VPD 10
    CHECK(f.col("LUE_syn")[1] == 0.5);
    // higher VPD reduces LUE
    CHECK(f.col("LUE_syn")[3] < 0.5);
    // temperature term is a bell around 20 C
    CHECK(f.col("LUE_syn")[2] == doctest::Approx(0.5 * std::exp(-1.0)));

    // sigma = 0: NEE equals clean NEE
    CHECK(f.col("NEE_syn") == f.col("NEE_syn_clean"));
    // nighttime: GPP zero when SW_IN = 0
    CHECK(f.col("GPP_syn")[3] == 0.0);
    for (double v : f.col("GPP_syn")) CHECK(v >= 0.0);

    LueGenConfig noisy;
    noisy.sigma = 0.4;
    noisy.seed = 5;
    auto g1 = gen_lue(dd, noisy);
    auto g2 = gen_lue(dd, noisy);
    CHECK(g1.col("NEE_syn") == g2.col("NEE_syn"));
    CHECK(g1.col("NEE_syn") != g1.col("NEE_syn_clean"));
}

TEST_CASE("gen_lue monotone in VPD above the clamp at fixed TA") {
    std::vector<std::int64_t> ts;
    std::vector<double> ta, vpd, sw, swp;
    for (int i = 0; i < 30; ++i) {
        ts.push_back(200306010000LL + i * 30LL);
        ta.push_back(20.0);
        vpd.push_back(10.0 + i);
        sw.push_back(40.0);
        swp.push_back(80.0);
    }
    FluxFrame dd(ts);
    dd.add_column("TA", ta);
    dd.add_column("VPD", vpd);
    dd.add_column("SW_IN", sw);
    dd.add_column("SW_POT", swp);
    auto f = gen_lue(dd, {});
    const auto& lue = f.col("LUE_syn");
    for (std::size_t i = 1; i < lue.size(); ++i) CHECK(lue[i] <= lue[i - 1]);
}

TEST_CASE("synthetic drivers look like a mid-latitude year") {
    auto d = synthetic_drivers({2003, 365, 47.0, 11});
    CHECK(d.n_rows() == 365 * 48);
    const auto& sw_pot = d.col("SW_POT");
    const auto& sw_in = d.col("SW_IN");
    const auto& ta = d.col("TA");
    const auto& vpd = d.col("VPD");
    double sw_max = 0.0, ta_min = 1e9, ta_max = -1e9;
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        CHECK(sw_pot[i] >= 0.0);
        CHECK(sw_in[i] >= 0.0);
        CHECK(sw_in[i] <= sw_pot[i] + 1e-12);
        CHECK(vpd[i] >= 0.0);
        sw_max = std::max(sw_max, sw_pot[i]);
        ta_min = std::min(ta_min, ta[i]);
        ta_max = std::max(ta_max, ta[i]);
    }
    CHECK(sw_max > 700.0); // summer midday clear sky
    CHECK(sw_max < 1200.0);
    CHECK(ta_min < 5.0);
    CHECK(ta_max > 20.0);
    // nights exist
    std::size_t night = 0;
    for (double v : sw_pot)
        if (v == 0.0) ++night;
    CHECK(night > d.n_rows() / 4);

    // determinism
    auto d2 = synthetic_drivers({2003, 365, 47.0, 11});
    CHECK(d.col("TA") == d2.col("TA"));
}

TEST_CASE("generated frames carry metadata sidecars") {
    auto d = synthetic_drivers({2003, 2, 47.0, 1});
    const std::string path =
        (std::filesystem::temp_directory_path() / "chm_gen_meta.csv").string();
    write_with_metadata(d, path, "{\"generator\":\"drivers\",\"seed\":1}");
    CHECK(std::filesystem::exists(path));
    CHECK(std::filesystem::exists(path + ".meta.json"));
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".meta.json");
}
