#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chm/metrics.hpp"
#include "chm/rng.hpp"

using namespace chm;
using namespace chm::metrics;

TEST_CASE("score: identity, mean predictor, zero reference variance") {
    const std::vector<double> y{1.0, 2.0, 3.0, 4.0};
    auto s = score(y, y);
    REQUIRE(s.r2.has_value());
    CHECK(*s.r2 == 1.0);
    CHECK(s.rmse == 0.0);
    CHECK(s.bias == 0.0);

    const std::vector<double> mean_pred(4, 2.5);
    auto s2 = score(mean_pred, y);
    CHECK(*s2.r2 == doctest::Approx(0.0));
    CHECK(s2.bias == doctest::Approx(0.0));

    // x=[1,2,3], y=[2,2,2]: r2 undefined, rmse = sqrt(2/3), bias = 0
    auto s3 = score({1, 2, 3}, {2, 2, 2});
    CHECK_FALSE(s3.r2.has_value());
    CHECK(s3.rmse == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(s3.bias == doctest::Approx(0.0));

    CHECK_THROWS(score({1, 2}, {1, 2, 3}));
}

TEST_CASE("score symmetry: rmse symmetric, bias antisymmetric, r2 not symmetric") {
    Rng rng(3);
    std::vector<double> x(50), y(50);
    for (int i = 0; i < 50; ++i) {
        y[i] = rng.normal();
        x[i] = 0.8 * y[i] + 0.3 * rng.normal() + 0.1;
    }
    auto axy = score(x, y);
    auto ayx = score(y, x);
    CHECK(axy.rmse == doctest::Approx(ayx.rmse).epsilon(1e-15));
    CHECK(axy.bias == doctest::Approx(-ayx.bias).epsilon(1e-12));
    CHECK(*axy.r2 != *ayx.r2); // reference matters
}

TEST_CASE("rmse^2 = bias^2 + error variance") {
    Rng rng(5);
    std::vector<double> x(200), y(200);
    for (int i = 0; i < 200; ++i) {
        y[i] = rng.normal();
        x[i] = y[i] + 0.5 + 0.3 * rng.normal();
    }
    auto s = score(x, y);
    double m = 0.0;
    for (int i = 0; i < 200; ++i) m += x[i] - y[i];
    m /= 200.0;
    double var = 0.0;
    for (int i = 0; i < 200; ++i) var += (x[i] - y[i] - m) * (x[i] - y[i] - m);
    var /= 200.0;
    CHECK(s.rmse * s.rmse == doctest::Approx(s.bias * s.bias + var).epsilon(1e-10));
}

TEST_CASE("summarize: identical values, interpolated quantiles") {
    auto s = summarize({4.0, 4.0, 4.0});
    CHECK(s.mean == 4.0);
    CHECK(s.median == 4.0);
    CHECK(s.sd == 0.0);
    CHECK(s.ci_lo == s.ci_hi);

    auto q = summarize({1.0, 2.0, 3.0, 4.0});
    CHECK(q.median == doctest::Approx(2.5));
    CHECK(q.q25 == doctest::Approx(1.75));
    CHECK(q.q75 == doctest::Approx(3.25));
    CHECK(q.q25 <= q.median);
    CHECK(q.median <= q.q75);

    CHECK_THROWS(summarize({}));
}

TEST_CASE("summarize CI uses 1.96 sd/sqrt(m)") {
    const std::vector<double> v{1.0, 2.0, 3.0};
    auto s = summarize(v);
    const double sd = std::sqrt(((1 - 2.0) * (1 - 2.0) + 0.0 + (3 - 2.0) * (3 - 2.0)) / 2.0);
    CHECK(s.sd == doctest::Approx(sd));
    CHECK(s.ci_hi - s.mean == doctest::Approx(1.96 * sd / std::sqrt(3.0)));
}

TEST_CASE("grouped summaries keep group order and keys") {
    std::vector<GroupedRecord> recs;
    recs.push_back({{"rf", "4000"}, 1.5});
    recs.push_back({{"mlp", "4000"}, 1.4});
    recs.push_back({{"rf", "4000"}, 1.6});
    auto out = summarize_groups(recs);
    REQUIRE(out.size() == 2);
    CHECK(out[0].key == std::vector<std::string>{"rf", "4000"});
    CHECK(out[0].stats.count == 2);
    CHECK(out[0].stats.mean == doctest::Approx(1.55));
    CHECK(out[1].key == std::vector<std::string>{"mlp", "4000"});
    CHECK(out[1].stats.count == 1);
    CHECK(std::isnan(out[1].stats.sd)); // sd needs >= 2 records
}
