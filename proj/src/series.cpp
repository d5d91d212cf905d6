#include "chm/series.hpp"

#include <cmath>
#include <stdexcept>

#include "chm/kernels.hpp"

namespace chm {

std::vector<double> moving_average_smooth(const std::vector<double>& series,
                                          double window_days, double samples_per_day) {
    if (series.empty()) throw std::invalid_argument("moving_average_smooth: empty series");
    const double nominal = window_days * samples_per_day;
    if (nominal < 1.0)
        throw std::invalid_argument("moving_average_smooth: window below one sample");
    const std::size_t n = series.size();
    const std::size_t w = static_cast<std::size_t>(std::llround(nominal));
    const std::size_t half = w / 2;

    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series[i];

    std::vector<double> out(n);
    kernels::windowed_mean(prefix.data(), n, half, out.data());
    return out;
}

std::vector<double> central_difference(const std::vector<double>& series) {
    const std::size_t n = series.size();
    if (n < 2) throw std::invalid_argument("central_difference: need at least 2 samples");
    std::vector<double> d(n);
    d[0] = series[1] - series[0];
    d[n - 1] = series[n - 1] - series[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (series[i + 1] - series[i - 1]) / 2.0;
    return d;
}

} // namespace chm
