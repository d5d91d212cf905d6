#include "chm/lightcurve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "chm/csv.hpp"

namespace chm::light {

namespace {

double hyperbola(double alpha, double beta, double sw) {
    return alpha * beta * sw / (alpha * sw + beta);
}

double sse_at(const std::vector<double>& sw, const std::vector<double>& nee, double alpha,
              double beta, double gamma) {
    double s = 0.0;
    for (std::size_t i = 0; i < sw.size(); ++i) {
        const double r = nee[i] - (-hyperbola(alpha, beta, sw[i]) + gamma);
        s += r * r;
    }
    return s;
}

// serial day number of the calendar date inside a YYYYMMDDHHMM timestamp
std::int64_t day_number(std::int64_t ts) {
    const std::int64_t ymd = ts / 10000;
    std::int64_t y = ymd / 10000;
    const unsigned m = static_cast<unsigned>((ymd / 100) % 100);
    const unsigned d = static_cast<unsigned>(ymd % 100);
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

} // namespace

HyperbolaParams default_init(const std::vector<double>& sw, const std::vector<double>& nee) {
    HyperbolaParams p;
    const std::size_t n = sw.size();
    double sw_m = 0.0, nee_m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sw_m += sw[i];
        nee_m += nee[i];
    }
    sw_m /= static_cast<double>(n);
    nee_m /= static_cast<double>(n);
    double cov = 0.0, var = 0.0;
    double nee_min = std::numeric_limits<double>::infinity();
    double nee_max = -std::numeric_limits<double>::infinity();
    double night_sum = 0.0;
    std::size_t night_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (sw[i] - sw_m) * (nee[i] - nee_m);
        var += (sw[i] - sw_m) * (sw[i] - sw_m);
        nee_min = std::min(nee_min, nee[i]);
        nee_max = std::max(nee_max, nee[i]);
        if (sw[i] <= 0.0) {
            night_sum += nee[i];
            ++night_count;
        }
    }
    p.alpha = var > 0.0 ? std::clamp(std::abs(cov / var), 1e-4, 1.0) : 0.01;
    p.beta = std::max(1.0, nee_max - nee_min);
    p.gamma = night_count > 0 ? night_sum / static_cast<double>(night_count) : nee_m;
    return p;
}

HyperbolaParams fit_hyperbola(const std::vector<double>& sw, const std::vector<double>& nee,
                              const HyperbolaParams& init) {
    if (sw.size() != nee.size()) throw std::invalid_argument("fit_hyperbola: length mismatch");
    HyperbolaParams out = init;
    out.n_daytime = 0;
    std::vector<double> dsw, dnee;
    for (std::size_t i = 0; i < sw.size(); ++i)
        if (sw[i] > 0.0) {
            dsw.push_back(sw[i]);
            dnee.push_back(nee[i]);
            ++out.n_daytime;
        }
    if (out.n_daytime < 10) {
        out.status = FitStatus::TooFewPoints;
        out.converged = false;
        return out;
    }

    // LM over p = (log alpha, log beta, gamma)
    double la = std::log(std::max(init.alpha, 1e-12));
    double lb = std::log(std::max(init.beta, 1e-12));
    double gamma = init.gamma;
    double lambda = 1e-3;
    const std::size_t m = dsw.size();

    double sse = sse_at(dsw, dnee, std::exp(la), std::exp(lb), gamma);
    out.status = FitStatus::MaxIterations;
    for (int iter = 0; iter < 200; ++iter) {
        const double alpha = std::exp(la), beta = std::exp(lb);
        // normal equations JtJ, Jtr of the residual r = nee - (-h + gamma)
        double jtj[3][3] = {{0}}, jtr[3] = {0};
        for (std::size_t i = 0; i < m; ++i) {
            const double s = dsw[i];
            const double den = alpha * s + beta;
            const double h = alpha * beta * s / den;
            const double r = dnee[i] - (-h + gamma);
            // dh/dalpha * alpha, dh/dbeta * beta (log-parameter chain rule)
            const double dh_dla = (beta * beta * s / (den * den)) * alpha;
            const double dh_dlb = (alpha * alpha * s * s / (den * den)) * beta;
            // d(model)/dp with model = -h + gamma
            const double j0 = -dh_dla, j1 = -dh_dlb, j2 = 1.0;
            jtj[0][0] += j0 * j0;
            jtj[0][1] += j0 * j1;
            jtj[0][2] += j0 * j2;
            jtj[1][1] += j1 * j1;
            jtj[1][2] += j1 * j2;
            jtj[2][2] += j2 * j2;
            jtr[0] += j0 * r;
            jtr[1] += j1 * r;
            jtr[2] += j2 * r;
        }
        jtj[1][0] = jtj[0][1];
        jtj[2][0] = jtj[0][2];
        jtj[2][1] = jtj[1][2];

        bool accepted = false;
        for (int damp = 0; damp < 30; ++damp) {
            double a[3][3];
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) a[r][c] = jtj[r][c];
            for (int r = 0; r < 3; ++r) a[r][r] += lambda * std::max(jtj[r][r], 1e-12);
            // solve a * delta = jtr (3x3 Gaussian elimination, partial pivot)
            double b[3] = {jtr[0], jtr[1], jtr[2]};
            int piv[3] = {0, 1, 2};
            bool singular = false;
            for (int c = 0; c < 3 && !singular; ++c) {
                int best = c;
                for (int r = c + 1; r < 3; ++r)
                    if (std::abs(a[piv[r]][c]) > std::abs(a[piv[best]][c])) best = r;
                std::swap(piv[c], piv[best]);
                if (std::abs(a[piv[c]][c]) < 1e-300) {
                    singular = true;
                    break;
                }
                for (int r = c + 1; r < 3; ++r) {
                    const double f = a[piv[r]][c] / a[piv[c]][c];
                    for (int cc = c; cc < 3; ++cc) a[piv[r]][cc] -= f * a[piv[c]][cc];
                    b[piv[r]] -= f * b[piv[c]];
                }
            }
            if (singular) {
                lambda *= 10.0;
                continue;
            }
            double delta[3];
            for (int c = 3; c-- > 0;) {
                double s = b[piv[c]];
                for (int cc = c + 1; cc < 3; ++cc) s -= a[piv[c]][cc] * delta[cc];
                delta[c] = s / a[piv[c]][c];
            }
            const double la2 = la + delta[0], lb2 = lb + delta[1], g2 = gamma + delta[2];
            // keep exp() in range
            if (!(std::isfinite(la2) && std::isfinite(lb2) && std::isfinite(g2)) ||
                la2 > 300.0 || lb2 > 300.0) {
                lambda *= 10.0;
                continue;
            }
            const double sse2 = sse_at(dsw, dnee, std::exp(la2), std::exp(lb2), g2);
            if (sse2 <= sse) {
                const double rel = (sse - sse2) / std::max(sse, 1e-300);
                la = la2;
                lb = lb2;
                gamma = g2;
                sse = sse2;
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (rel < 1e-10) out.status = FitStatus::Converged;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // no downhill step found at any damping: treat as converged
            out.status = FitStatus::Converged;
            break;
        }
        if (out.status == FitStatus::Converged) break;
    }

    out.alpha = std::exp(la);
    out.beta = std::exp(lb);
    out.gamma = gamma;
    out.sse = sse;
    out.converged = out.status == FitStatus::Converged;
    return out;
}

TransformResult transform_sw(const FluxFrame& frame, const std::string& sw_col,
                             const std::string& nee_col, double window_days, double center_days) {
    const auto& sw = frame.col(sw_col);
    const auto& nee = frame.col(nee_col);
    const auto& ts = frame.timestamps();
    const std::size_t n = frame.n_rows();
    if (n == 0) throw std::invalid_argument("transform_sw: empty frame");

    const std::int64_t day0 = day_number(ts.front());
    std::vector<double> day(n);
    for (std::size_t i = 0; i < n; ++i)
        day[i] = static_cast<double>(day_number(ts[i]) - day0);
    const double span = day.back() + 1.0;
    if (span < window_days)
        throw std::invalid_argument("transform_sw: frame spans fewer days than the window");

    TransformResult res;
    res.f_sw.assign(n, 0.0);
    std::vector<int> window_of(n, -1); // window whose center block contains the row

    // windows [ws, ws+window_days) slide in center_days steps so the center
    // blocks [ws+margin, ws+margin+center_days) tile the interior
    const double margin = (window_days - center_days) / 2.0;
    std::vector<double> window_mid;
    for (double ws = 0.0; ws + window_days <= span + 1e-9; ws += center_days) {
        std::size_t lo = n, hi = 0;
        std::vector<double> wsw, wnee;
        for (std::size_t i = 0; i < n; ++i)
            if (day[i] >= ws && day[i] < ws + window_days) {
                wsw.push_back(sw[i]);
                wnee.push_back(nee[i]);
                lo = std::min(lo, i);
                hi = std::max(hi, i);
            }
        HyperbolaParams p;
        if (!wsw.empty()) p = fit_hyperbola(wsw, wnee, default_init(wsw, wnee));
        if (lo <= hi) {
            p.window_start = ts[lo];
            p.window_end = ts[hi];
        }
        const int widx = static_cast<int>(res.windows.size());
        const double c_lo = ws + margin, c_hi = ws + margin + center_days;
        for (std::size_t i = 0; i < n; ++i)
            if (day[i] >= c_lo && day[i] < c_hi) window_of[i] = widx;
        res.windows.push_back(p);
        window_mid.push_back(ws + window_days / 2.0);
    }

    // successful = fitted (not skipped for lack of daytime points)
    std::vector<int> good;
    for (std::size_t w = 0; w < res.windows.size(); ++w)
        if (res.windows[w].status != FitStatus::TooFewPoints) good.push_back(static_cast<int>(w));
    if (good.empty()) throw std::runtime_error("transform_sw: no window could be fitted");

    for (std::size_t i = 0; i < n; ++i) {
        int w = window_of[i];
        if (w < 0 || res.windows[w].status == FitStatus::TooFewPoints) {
            // boundary rows and skipped windows: nearest successful window
            int best = good.front();
            double best_d = std::abs(day[i] - window_mid[best]);
            for (int g : good) {
                const double d = std::abs(day[i] - window_mid[g]);
                if (d < best_d) {
                    best = g;
                    best_d = d;
                }
            }
            w = best;
        }
        if (sw[i] > 0.0)
            res.f_sw[i] = hyperbola(res.windows[w].alpha, res.windows[w].beta, sw[i]);
    }
    return res;
}

void write_window_csv(const std::vector<HyperbolaParams>& windows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_window_csv: cannot open '" + path + "'");
    out << "window,alpha,beta,gamma,sse,n_daytime,converged,status\n";
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& p = windows[w];
        const char* status = p.status == FitStatus::Converged      ? "converged"
                             : p.status == FitStatus::MaxIterations ? "max_iterations"
                                                                     : "too_few_points";
        out << w << ',' << format_double(p.alpha) << ',' << format_double(p.beta) << ','
            << format_double(p.gamma) << ',' << format_double(p.sse) << ',' << p.n_daytime << ','
            << (p.converged ? 1 : 0) << ',' << status << '\n';
    }
}

} // namespace chm::light
