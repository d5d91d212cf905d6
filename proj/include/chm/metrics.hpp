#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace chm::metrics {

// r2 is computed against `y` as the reference (second argument = ground
// truth); it is empty when the reference has zero variance. rmse and bias
// are always defined: rmse = sqrt(mean (x-y)^2), bias = mean(x) - mean(y).
struct ScoreTriple {
    std::optional<double> r2;
    double rmse = 0.0;
    double bias = 0.0;
};

ScoreTriple score(const std::vector<double>& x, const std::vector<double>& y_reference);

// Type-7 (linear interpolation) quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double sd = 0.0; // sample sd (n-1); NaN for a single record
    double median = 0.0, q25 = 0.0, q75 = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0; // mean +- 1.96 sd/sqrt(count)
};

Summary summarize(const std::vector<double>& values);

// Grouped summaries; groups keep their first-appearance order.
struct GroupedRecord {
    std::vector<std::string> key;
    double value = 0.0;
};
struct GroupSummary {
    std::vector<std::string> key;
    Summary stats;
};
std::vector<GroupSummary> summarize_groups(const std::vector<GroupedRecord>& records);

} // namespace chm::metrics
