#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chm/fluxframe.hpp"
#include "chm/learners.hpp"

// End-to-end gradient-descent hybrid model: a small neural net for base
// respiration and the scalar Q10, optimized jointly with Adam on
//   R_eco ~= NN(X) * Q10^((TA - t_ref)/10).
// Q10 is kept positive by optimizing log Q10.

namespace chm::gdhm {

struct GdhmConfig {
    std::vector<std::string> rb_predictors{"SW_POT_sm", "SW_POT_sm_diff"};
    std::string ta_column = "TA";
    std::string reco_column = "R_eco_syn";
    bool include_ta_in_rb = false; // equifinality probe: TA as an extra NN input
    double q10_init_mean = 1.5;    // init sampled from N(mean, sd)
    double q10_init_sd = 0.1;
    double t_ref = 15.0;
    learn::MlpConfig mlp; // architecture/training settings of the NN part
    std::uint64_t seed = 0;
    bool record_history = false;

    GdhmConfig() {
        mlp.hidden = {16, 16};
        mlp.softplus_output = true;
        mlp.iterations = 10000;
        mlp.adam.lr = 1e-2;
        mlp.validation_fraction = 0.2;
    }
};

struct GdhmFit {
    double q10_hat = 0.0;
    learn::ModelPtr rb_model; // NN(X) on the natural scale
    std::vector<std::string> rb_columns;
    double t_ref = 15.0;
    std::string ta_column;
    learn::Diagnostics diag;
    std::vector<double> train_loss_history, val_loss_history; // when recorded
};

// Joint fit; the best validation-loss iterate (NN weights and Q10 together)
// is returned. Targets must be strictly positive.
GdhmFit fit_gdhm(const FluxFrame& frame, const GdhmConfig& cfg);

// NN(X) * q10^((TA - t_ref)/10) per row.
std::vector<double> predict_gdhm(double q10_hat, const learn::Model& rb_model,
                                 const std::vector<std::string>& rb_columns,
                                 const std::string& ta_column, double t_ref,
                                 const FluxFrame& frame);
std::vector<double> predict_gdhm(const GdhmFit& fit, const FluxFrame& frame);

void write_history_csv(const GdhmFit& fit, const std::string& path);

} // namespace chm::gdhm
