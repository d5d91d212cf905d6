#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chm/fluxframe.hpp"

// Deterministic, seeded generators for the synthetic Q10 and LUE datasets,
// plus a bundled synthetic-but-realistic year of half-hourly meteorology so
// every experiment runs without downloads.

namespace chm::synth {

// i.i.d. N(0, sd^2) conditioned on [lo, hi] via rejection sampling.
std::vector<double> truncated_normal(std::size_t n, double sd, double lo, double hi,
                                     std::uint64_t seed);

struct Q10GenConfig {
    double q10 = 1.5;
    double t_ref = 15.0;
    double noise_sd = 0.2;
    double noise_lo = -0.95, noise_hi = 0.95;
    bool noise = true; // multiplicative (1 + eps) factor on R_eco
    std::uint64_t seed = 0;
};

// Respiration data with a smooth seasonal base-respiration cycle:
//   Rb~ = 0.01 * SW_POT_sm - 0.005 * SW_POT_sm_diff
//   R_b = 0.75 * (Rb~ - min Rb~ + 0.1*pi)
//   R_eco = R_b * q10^(0.1*(TA - t_ref)) * (1 + eps)
// Output columns: TA, SW_POT, SW_POT_sm, SW_POT_sm_diff, R_b_syn, R_eco_syn.
FluxFrame gen_q10(const FluxFrame& drivers, const Q10GenConfig& cfg);

struct LueGenConfig {
    double sigma = 0.0; // heteroscedastic noise level on NEE
    double q10 = 1.5;   // respiration part reuses the Q10 generator, noise-free
    std::uint64_t seed = 0;
};

// Light-use-efficiency partitioning data:
//   LUE = 0.5 * exp(-(0.1*(TA-20))^2) * min(1, exp(-0.1*(VPD-10)))
//   GPP = LUE * SW_IN,  NEE_clean = -GPP + RECO,  NEE = NEE_clean*(1+sigma*eps)
// Output columns add LUE_syn, GPP_syn, RECO_syn, NEE_syn_clean, NEE_syn.
FluxFrame gen_lue(const FluxFrame& drivers, const LueGenConfig& cfg);

struct DriverConfig {
    int year = 2003;
    int n_days = 365;
    double latitude_deg = 47.0;
    std::uint64_t seed = 7;
    // AR(1) cloud-transmission weather (per half-hour step)
    double cloud_phi = 0.98;
    double cloud_sd = 0.055;
};

// One year of half-hourly TA (degC), SW_POT and SW_IN (W m-2) and VPD (hPa):
// solar-geometry potential radiation, autocorrelated cloud transmission, a
// seasonal+diurnal temperature cycle with weather noise, and VPD from
// saturation vapour pressure with a varying relative-humidity deficit.
FluxFrame synthetic_drivers(const DriverConfig& cfg);

// write_csv plus a `<path>.meta.json` sidecar echoing the generator config.
void write_with_metadata(const FluxFrame& frame, const std::string& path,
                         const std::string& config_echo_json);

} // namespace chm::synth
