#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "chm/csv.hpp"
#include "chm/fluxframe.hpp"
#include "chm/rng.hpp"
#include "chm/series.hpp"

using namespace chm;

namespace {
std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

FluxFrame small_frame() {
    FluxFrame f(make_halfhourly_timestamps(2003, 6));
    f.add_column("TA", {1, 2, 3, 4, 5, 6});
    f.add_column("NEE", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6},
                 {true, true, false, true, true, true});
    return f;
}
} // namespace

TEST_CASE("moving_average_smooth: constants, global window, ramp") {
    const std::vector<double> c(20, 3.5);
    CHECK(moving_average_smooth(c, 1.0, 5.0) == c);

    // window covering the whole series -> global mean everywhere
    std::vector<double> v{1, 2, 3, 4};
    auto g = moving_average_smooth(v, 100.0, 1.0);
    for (double x : g) CHECK(x == doctest::Approx(2.5));

    // ramp 0..9 with a 3-sample window, boundary shrink
    std::vector<double> ramp(10);
    for (int i = 0; i < 10; ++i) ramp[i] = i;
    auto sm = moving_average_smooth(ramp, 3.0, 1.0);
    const std::vector<double> want{0.5, 1, 2, 3, 4, 5, 6, 7, 8, 8.5};
    REQUIRE(sm.size() == want.size());
    for (std::size_t i = 0; i < sm.size(); ++i) CHECK(sm[i] == doctest::Approx(want[i]));

    CHECK_THROWS(moving_average_smooth({}, 3.0, 1.0));
    CHECK_THROWS(moving_average_smooth({1.0}, 0.1, 1.0)); // below one sample
}

TEST_CASE("moving_average_smooth stays within series bounds and is idempotent on constants") {
    Rng rng(5);
    std::vector<double> v(500);
    for (auto& x : v) x = rng.uniform(-3, 7);
    const auto sm = moving_average_smooth(v, 1.5, 10.0);
    const double lo = *std::min_element(v.begin(), v.end());
    const double hi = *std::max_element(v.begin(), v.end());
    for (double x : sm) {
        CHECK(x >= lo - 1e-12);
        CHECK(x <= hi + 1e-12);
    }
}

TEST_CASE("central_difference") {
    const std::vector<double> c(7, 2.0);
    for (double d : central_difference(c)) CHECK(d == 0.0);

    std::vector<double> lin{1, 3, 5, 7};
    for (double d : central_difference(lin)) CHECK(d == doctest::Approx(2.0));

    auto d = central_difference({0, 1, 4});
    CHECK(d[0] == doctest::Approx(1));
    CHECK(d[1] == doctest::Approx(2));
    CHECK(d[2] == doctest::Approx(3));

    CHECK_THROWS(central_difference({1.0}));
}

TEST_CASE("filter_measured") {
    auto f = small_frame();
    auto g = filter_measured(f, {"TA", "NEE"});
    CHECK(g.n_rows() == 5); // row 2 has NEE quality false
    CHECK(g.col("TA")[2] == 4);

    // idempotent
    auto h = filter_measured(g, {"TA", "NEE"});
    CHECK(h.n_rows() == g.n_rows());

    // all-measured frame passes through
    auto all = filter_measured(f, {"TA"});
    CHECK(all.n_rows() == f.n_rows());

    // empty result allowed
    FluxFrame z(make_halfhourly_timestamps(2003, 2));
    z.add_column("A", {1.0, 2.0}, {false, false});
    CHECK(filter_measured(z, {"A"}).n_rows() == 0);
}

TEST_CASE("split_by_year") {
    // 7 "years" sampled sparsely: one row per year
    std::vector<std::int64_t> ts;
    for (int y = 2003; y <= 2009; ++y) ts.push_back(static_cast<std::int64_t>(y) * 100000000LL + 101'0000LL);
    FluxFrame f((std::vector<std::int64_t>(ts)));
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7};
    f.add_column("V", v);

    auto [train, test] = split_by_year(f, {2003, 2004, 2005, 2006, 2007}, {2008, 2009});
    CHECK(train.n_rows() == 5);
    CHECK(test.n_rows() == 2);
    // disjoint and ordered
    CHECK(train.col("V") == std::vector<double>{1, 2, 3, 4, 5});
    CHECK(test.col("V") == std::vector<double>{6, 7});

    auto [full, empty] = split_by_year(f, {2003, 2004, 2005, 2006, 2007, 2008, 2009}, {});
    CHECK(full.n_rows() == 7);
    CHECK(empty.n_rows() == 0);

    // uncovered years dropped from both outputs
    auto [a, b] = split_by_year(f, {2003}, {2009});
    CHECK(a.n_rows() + b.n_rows() == 2);

    CHECK_THROWS(split_by_year(f, {2003}, {2003}));
}

TEST_CASE("load_csv: direct parse, sentinels, QC masks, schema errors") {
    const std::string path = temp_path("chm_test_basic.csv");
    {
        std::ofstream out(path);
        out << "TA,NEE\n1.5,0.1\n2.5,0.2\n3.5,0.3\n";
    }
    auto f = load_csv(path, {"TA", "NEE"});
    CHECK(f.n_rows() == 3);
    CHECK(f.col("TA")[1] == 2.5);
    CHECK(f.quality("TA") == nullptr); // fully measured

    {
        std::ofstream out(path);
        out << "TA,NEE\n1.5,-9999\n2.5,0.2\n,0.3\n";
    }
    f = load_csv(path, {"TA", "NEE"});
    REQUIRE(f.quality("NEE") != nullptr);
    CHECK_FALSE((*f.quality("NEE"))[0]); // sentinel row unmeasured
    CHECK(std::isnan(f.col("NEE")[0]));
    REQUIRE(f.quality("TA") != nullptr);
    CHECK_FALSE((*f.quality("TA"))[2]); // empty cell unmeasured

    // companion QC column: 0 => measured
    {
        std::ofstream out(path);
        out << "NEE,NEE_QC\n0.1,0\n0.2,1\n0.3,0\n";
    }
    f = load_csv(path, {"NEE"});
    REQUIRE(f.quality("NEE") != nullptr);
    CHECK((*f.quality("NEE"))[0]);
    CHECK_FALSE((*f.quality("NEE"))[1]);
    // qc_max loosens the threshold; all rows measured -> mask dropped
    f = load_csv(path, {"NEE"}, 1);
    CHECK(f.quality("NEE") == nullptr);

    {
        std::ofstream out(path);
        out << "TA,NEE\n1.0,0.1\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path, {"TA", "NEE", "VPD"}), doctest::Contains("VPD"),
                         std::runtime_error);

    {
        std::ofstream out(path);
        out << "TA\n1.0\nnot_a_number\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path, {"TA"}), doctest::Contains("row 2"), std::runtime_error);

    {
        std::ofstream out(path);
        out << "TIMESTAMP,TA\n200301010000,1\n200301010000,2\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path, {"TA"}), doctest::Contains("non-monotone"),
                         std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("csv round trip preserves numeric values") {
    Rng rng(11);
    FluxFrame f(make_halfhourly_timestamps(2004, 64));
    std::vector<double> a(64), b(64);
    std::vector<bool> qa(64, true);
    for (int i = 0; i < 64; ++i) {
        a[i] = rng.normal() * std::pow(10.0, static_cast<int>(rng.uniform(-6, 6)));
        b[i] = rng.uniform(-1000, 1000);
    }
    qa[7] = false;
    a[7] = std::nan("");
    f.add_column("A", a, qa);
    f.add_column("B", b);

    const std::string path = temp_path("chm_test_roundtrip.csv");
    write_csv(f, path);
    auto g = load_csv(path, {"A", "B"});
    REQUIRE(g.n_rows() == f.n_rows());
    CHECK(g.timestamps() == f.timestamps());
    for (int i = 0; i < 64; ++i) {
        if (i == 7) {
            CHECK(std::isnan(g.col("A")[i]));
            CHECK_FALSE((*g.quality("A"))[i]);
        } else {
            CHECK(g.col("A")[i] == a[i]); // shortest round-trip formatting is exact
        }
        CHECK(g.col("B")[i] == b[i]);
    }
    std::remove(path.c_str());
}

TEST_CASE("RFC 4180 quoting") {
    const std::string path = temp_path("chm_test_quotes.csv");
    {
        std::ofstream out(path);
        out << "\"TA\",\"NEE\"\r\n\"1.5\",0.25\r\n2.5,\"0.5\"\r\n";
    }
    auto f = load_csv(path, {"TA", "NEE"});
    CHECK(f.n_rows() == 2);
    CHECK(f.col("TA")[0] == 1.5);
    CHECK(f.col("NEE")[1] == 0.5);
    std::remove(path.c_str());
}

TEST_CASE("frame invariants") {
    CHECK_THROWS(FluxFrame({200301010000LL, 200301010000LL})); // not strictly increasing
    FluxFrame f(make_halfhourly_timestamps(2003, 2));
    f.add_column("X", {1.0, std::nan("")}); // NaN on a measured row
    CHECK_THROWS(f.validate());
}

TEST_CASE("role spec validation") {
    auto f = small_frame();
    RoleSpec r;
    r.y = "NEE";
    r.t = "TA";
    r.w = {"TA"};
    CHECK_THROWS(r.validate_for(f)); // treatment also in controls
    r.w = {"MISSING"};
    CHECK_THROWS(r.validate_for(f));
    r.w = {};
    CHECK_NOTHROW(r.validate_for(f));

    // affine transform
    r.f = TreatmentTransform::affine(15.0, 10.0);
    auto ft = r.f.apply(f, "TA");
    CHECK(ft[0] == doctest::Approx((1.0 - 15.0) / 10.0));
    CHECK_THROWS(TreatmentTransform::affine(15.0, 0.0));
}
