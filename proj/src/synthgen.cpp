#include "chm/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "chm/csv.hpp"
#include "chm/rng.hpp"
#include "chm/series.hpp"

namespace chm::synth {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSamplesPerDay = 48.0;

void require_columns(const FluxFrame& f, const std::vector<std::string>& cols) {
    for (const auto& c : cols)
        if (!f.has_column(c))
            throw std::invalid_argument("generator: driver frame missing column '" + c + "'");
}
} // namespace

std::vector<double> truncated_normal(std::size_t n, double sd, double lo, double hi,
                                     std::uint64_t seed) {
    if (!(lo < hi)) throw std::invalid_argument("truncated_normal: lo must be < hi");
    if (!(sd > 0.0)) throw std::invalid_argument("truncated_normal: sd must be positive");
    Rng rng(seed);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v;
        do {
            v = sd * rng.normal();
        } while (v < lo || v > hi);
        out[i] = v;
    }
    return out;
}

FluxFrame gen_q10(const FluxFrame& drivers, const Q10GenConfig& cfg) {
    if (drivers.n_rows() == 0) throw std::invalid_argument("gen_q10: empty driver frame");
    if (!(cfg.q10 > 0.0)) throw std::invalid_argument("gen_q10: q10 must be positive");
    require_columns(drivers, {"TA", "SW_POT"});

    const auto& ta = drivers.col("TA");
    const auto& sw_pot = drivers.col("SW_POT");
    const std::size_t n = drivers.n_rows();

    const auto sw_pot_sm = moving_average_smooth(sw_pot, 10.0, kSamplesPerDay);
    const auto sw_pot_sm_diff = central_difference(sw_pot_sm);

    std::vector<double> rb_tilde(n);
    for (std::size_t i = 0; i < n; ++i)
        rb_tilde[i] = 0.01 * sw_pot_sm[i] - 0.005 * sw_pot_sm_diff[i];
    const double rb_min = *std::min_element(rb_tilde.begin(), rb_tilde.end());

    std::vector<double> rb(n), reco(n);
    std::vector<double> eps;
    if (cfg.noise) eps = truncated_normal(n, cfg.noise_sd, cfg.noise_lo, cfg.noise_hi, cfg.seed);
    for (std::size_t i = 0; i < n; ++i) {
        rb[i] = 0.75 * (rb_tilde[i] - rb_min + 0.1 * kPi);
        const double factor = std::pow(cfg.q10, 0.1 * (ta[i] - cfg.t_ref));
        reco[i] = rb[i] * factor * (cfg.noise ? 1.0 + eps[i] : 1.0);
    }

    FluxFrame out(drivers.timestamps());
    out.add_column("TA", ta);
    out.add_column("SW_POT", sw_pot);
    out.add_column("SW_POT_sm", sw_pot_sm);
    out.add_column("SW_POT_sm_diff", sw_pot_sm_diff);
    out.add_column("R_b_syn", std::move(rb));
    out.add_column("R_eco_syn", std::move(reco));
    return out;
}

FluxFrame gen_lue(const FluxFrame& drivers, const LueGenConfig& cfg) {
    if (drivers.n_rows() == 0) throw std::invalid_argument("gen_lue: empty driver frame");
    if (!(cfg.sigma >= 0.0)) throw std::invalid_argument("gen_lue: sigma must be >= 0");
    require_columns(drivers, {"TA", "VPD", "SW_IN", "SW_POT"});

    const auto& ta = drivers.col("TA");
    const auto& vpd = drivers.col("VPD");
    const auto& sw_in = drivers.col("SW_IN");
    const std::size_t n = drivers.n_rows();

    // respiration part: the Q10 generator with the noise factor disabled, so
    // the stored RECO_syn is a well-defined ground truth for scoring
    Q10GenConfig q10cfg;
    q10cfg.q10 = cfg.q10;
    q10cfg.noise = false;
    FluxFrame reco_frame = gen_q10(drivers, q10cfg);
    const auto& reco = reco_frame.col("R_eco_syn");

    std::vector<double> lue(n), gpp(n), nee_clean(n), nee(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ta_term = 0.1 * (ta[i] - 20.0);
        const double water = std::min(1.0, std::exp(-0.1 * (vpd[i] - 10.0)));
        lue[i] = 0.5 * std::exp(-(ta_term * ta_term)) * water;
        gpp[i] = lue[i] * sw_in[i];
        nee_clean[i] = -gpp[i] + reco[i];
    }
    Rng rng(cfg.seed);
    for (std::size_t i = 0; i < n; ++i) nee[i] = nee_clean[i] * (1.0 + cfg.sigma * rng.normal());

    FluxFrame out(drivers.timestamps());
    out.add_column("TA", ta);
    out.add_column("VPD", vpd);
    out.add_column("SW_IN", sw_in);
    out.add_column("SW_POT", drivers.col("SW_POT"));
    out.add_column("SW_POT_sm", reco_frame.col("SW_POT_sm"));
    out.add_column("SW_POT_sm_diff", reco_frame.col("SW_POT_sm_diff"));
    out.add_column("LUE_syn", std::move(lue));
    out.add_column("GPP_syn", std::move(gpp));
    out.add_column("RECO_syn", reco);
    out.add_column("NEE_syn_clean", std::move(nee_clean));
    out.add_column("NEE_syn", std::move(nee));
    return out;
}

FluxFrame synthetic_drivers(const DriverConfig& cfg) {
    const std::size_t n = static_cast<std::size_t>(cfg.n_days) * 48;
    auto ts = make_halfhourly_timestamps(cfg.year, n);
    Rng rng(derive_seed(cfg.seed, "drivers", 0));

    const double lat = cfg.latitude_deg * kPi / 180.0;
    std::vector<double> sw_pot(n), sw_in(n), ta(n), vpd(n);

    // AR(1) weather states, updated per half hour
    double cloud = 0.7;   // clear-sky transmission fraction in [0.15, 1]
    double ta_noise = 0.0;
    double rh_noise = 0.0;
    const double cloud_phi = cfg.cloud_phi, cloud_sd = cfg.cloud_sd;
    const double ta_phi = 0.995, ta_sd = 0.28;
    const double rh_phi = 0.99, rh_sd = 0.018;

    for (std::size_t i = 0; i < n; ++i) {
        const double day = static_cast<double>(i) / 48.0; // day of year, fractional
        const double hour = std::fmod(static_cast<double>(i) / 2.0, 24.0);

        // solar geometry: declination + hour angle -> cos(zenith)
        const double decl = -23.44 * kPi / 180.0 * std::cos(2.0 * kPi * (day + 10.0) / 365.0);
        const double hour_angle = (hour - 12.0) * 15.0 * kPi / 180.0;
        const double cosz = std::sin(lat) * std::sin(decl) +
                            std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
        sw_pot[i] = cosz > 0.0 ? 1100.0 * cosz : 0.0;

        cloud = 0.7 + cloud_phi * (cloud - 0.7) + cloud_sd * rng.normal();
        cloud = std::clamp(cloud, 0.15, 1.0);
        sw_in[i] = sw_pot[i] * cloud;

        ta_noise = ta_phi * ta_noise + ta_sd * rng.normal();
        const double seasonal = 8.0 - 10.0 * std::cos(2.0 * kPi * (day - 15.0) / 365.0);
        const double diurnal = -3.5 * std::cos(2.0 * kPi * (hour - 14.0) / 24.0);
        ta[i] = seasonal + diurnal + ta_noise;

        rh_noise = rh_phi * rh_noise + rh_sd * rng.normal();
        double rh = 0.78 - 0.13 * std::sin(2.0 * kPi * (hour - 3.0) / 24.0) -
                    0.05 * std::cos(2.0 * kPi * (day - 15.0) / 365.0) + rh_noise;
        rh = std::clamp(rh, 0.25, 1.0);
        // Magnus saturation vapour pressure, hPa
        const double es = 6.1078 * std::exp(17.27 * ta[i] / (ta[i] + 237.3));
        vpd[i] = std::max(0.0, es * (1.0 - rh));
    }

    FluxFrame out(std::move(ts));
    out.add_column("TA", std::move(ta));
    out.add_column("SW_POT", std::move(sw_pot));
    out.add_column("SW_IN", std::move(sw_in));
    out.add_column("VPD", std::move(vpd));
    return out;
}

void write_with_metadata(const FluxFrame& frame, const std::string& path,
                         const std::string& config_echo_json) {
    write_csv(frame, path);
    std::ofstream meta(path + ".meta.json", std::ios::binary);
    if (!meta) throw std::runtime_error("write_with_metadata: cannot open sidecar for '" + path + "'");
    meta << config_echo_json << '\n';
}

} // namespace chm::synth
