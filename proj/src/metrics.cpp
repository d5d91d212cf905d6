#include "chm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace chm::metrics {

ScoreTriple score(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("score: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("score: need at least 2 values");

    double xm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        xm += x[i];
        ym += y[i];
    }
    xm /= static_cast<double>(n);
    ym /= static_cast<double>(n);

    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sse += (x[i] - y[i]) * (x[i] - y[i]);
        sst += (y[i] - ym) * (y[i] - ym);
    }

    ScoreTriple s;
    s.rmse = std::sqrt(sse / static_cast<double>(n));
    s.bias = xm - ym;
    if (sst > 0.0) s.r2 = 1.0 - sse / sst;
    return s;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
    if (sorted.size() == 1) return sorted[0];
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Summary summarize(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("summarize: empty group");
    Summary s;
    s.count = values.size();
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(s.count);
    if (s.count >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(s.count - 1));
    } else {
        s.sd = std::numeric_limits<double>::quiet_NaN();
    }
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    s.median = quantile_sorted(sorted, 0.5);
    s.q25 = quantile_sorted(sorted, 0.25);
    s.q75 = quantile_sorted(sorted, 0.75);
    const double half = 1.96 * s.sd / std::sqrt(static_cast<double>(s.count));
    s.ci_lo = s.mean - half;
    s.ci_hi = s.mean + half;
    return s;
}

std::vector<GroupSummary> summarize_groups(const std::vector<GroupedRecord>& records) {
    std::vector<std::vector<std::string>> order;
    std::map<std::vector<std::string>, std::vector<double>> groups;
    for (const auto& r : records) {
        auto it = groups.find(r.key);
        if (it == groups.end()) {
            order.push_back(r.key);
            groups[r.key] = {r.value};
        } else {
            it->second.push_back(r.value);
        }
    }
    std::vector<GroupSummary> out;
    out.reserve(order.size());
    for (const auto& key : order) out.push_back({key, summarize(groups[key])});
    return out;
}

} // namespace chm::metrics
