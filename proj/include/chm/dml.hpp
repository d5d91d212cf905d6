#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chm/fluxframe.hpp"
#include "chm/learners.hpp"
#include "chm/matrix.hpp"

// Cross-fitted partialling out and effect estimation for problems of the
// form Y = theta(X) * f(T) + g(X, W): first-stage regressions of Y and f(T)
// on the controls, out-of-fold residuals, constant or heterogeneous effect
// estimates on the residuals, plug-in / refit recovery of g, and the
// composed hybrid predictor.

namespace chm::dml {

enum class FoldScheme { Shuffled, TimeBlocked };

// Feature matrices and target vectors assembled from a frame per a RoleSpec.
struct Design {
    Matrix xw; // x columns then w columns
    Matrix x;  // x columns only (zero columns for a constant effect)
    std::vector<double> y;
    std::vector<double> ft; // f applied to the treatment column
    std::vector<std::string> xw_cols, x_cols;
};
Design build_design(const FluxFrame& frame, const RoleSpec& roles);

struct PartialOutResult {
    std::vector<double> y_res, t_res; // out-of-fold residuals, original row order
    std::vector<int> fold;            // fold id per row
    std::vector<learn::ModelPtr> y_models, t_models; // one per fold
    std::vector<std::string> xw_cols, x_cols;
    double y_res_mean = 0.0, t_res_mean = 0.0; // diagnostics, reported not enforced
};

// Rows are partitioned into k folds (seeded shuffle, or contiguous blocks
// for autocorrelated data); each fold's rows are predicted by models trained
// on the remaining folds. `fold_override` forces an explicit assignment.
PartialOutResult cross_fit(const Matrix& xw, const std::vector<double>& y,
                           const std::vector<double>& ft, const learn::LearnerSpec& y_learner,
                           const learn::LearnerSpec& t_learner, int k_folds, std::uint64_t seed,
                           FoldScheme scheme = FoldScheme::Shuffled,
                           const std::vector<int>* fold_override = nullptr);
PartialOutResult cross_fit(const FluxFrame& frame, const RoleSpec& roles,
                           const learn::LearnerSpec& y_learner,
                           const learn::LearnerSpec& t_learner, int k_folds, std::uint64_t seed,
                           FoldScheme scheme = FoldScheme::Shuffled);

struct ConstantEffect {
    double theta = 0.0;     // for the log-Q10 problem this is log Q10
    double std_error = 0.0; // heteroscedasticity-robust (sandwich) form
    double ci_lo = 0.0, ci_hi = 0.0; // 95% normal interval
    std::size_t n_used = 0;
};
// No-intercept least squares of y_res on t_res with sandwich standard error.
ConstantEffect estimate_constant_effect(const PartialOutResult& po);

struct HeterogeneousEffect {
    learn::ModelPtr model; // maps X -> theta(X)
    std::vector<std::string> x_cols;
    double weight_floor = 0.0; // floor actually applied to |t_res|
};
// Weighted-target reduction: pseudo-target y_res/t_res regressed on X with
// weights t_res^2, flooring |t_res| to cap pseudo-target blow-up.
// weight_floor <= 0 selects the default 1e-3 * sd(t_res).
HeterogeneousEffect estimate_heterogeneous_effect(const PartialOutResult& po, const Matrix& x,
                                                  const learn::LearnerSpec& final_learner,
                                                  double weight_floor = 0.0);

// Constant or heterogeneous effect, evaluated rowwise.
struct Effect {
    std::optional<ConstantEffect> constant;
    std::optional<HeterogeneousEffect> heterogeneous;

    static Effect of(ConstantEffect c) { return Effect{c, std::nullopt}; }
    static Effect of(HeterogeneousEffect h) { return Effect{std::nullopt, std::move(h)}; }
    // x may be empty (0 columns) for a constant effect
    std::vector<double> evaluate(const Matrix& x, std::size_t n) const;
};

// Plug-in estimator: g(X,W) = E[Y|X,W] - theta(X) * E[f(T)|X,W], each
// expectation the ensemble mean of the per-fold first-stage models.
std::vector<double> plugin_g(const PartialOutResult& po, const Effect& effect, const Matrix& xw,
                             const Matrix& x);

struct GEstimator {
    enum class Kind { PlugIn, Refit };
    Kind kind = Kind::PlugIn;
    // plug-in: the cross-fit fold models
    std::vector<learn::ModelPtr> y_models, t_models;
    std::vector<std::string> xw_cols, x_cols;
    // refit
    learn::ModelPtr refit_model;
    std::vector<std::string> refit_cols;

    static GEstimator plug_in(const PartialOutResult& po);
};

enum class Composition {
    Additive,         // Y = theta(X) * f(T) + g(X,W); LUE partitioning stores theta = -LUE
    MultiplicativeExp // Y = g(X,W) * exp(theta * f(T)), the natural-scale Q10 form
};

struct HybridModel {
    Composition composition = Composition::Additive;
    Effect effect;
    GEstimator g;
    std::string t_col;
    TreatmentTransform f;
};

// Fits a learner for g on Y - theta(X) * f(T) (additive) or on
// Y / exp(theta * f(T)) (multiplicative-exp, natural-scale Y). Predictors are
// roles.x + roles.w + extra_predictors; extra_predictors may include T.
GEstimator refit_g(const FluxFrame& frame, const RoleSpec& roles, const Effect& effect,
                   const learn::LearnerSpec& learner, const std::vector<std::string>& extra_predictors,
                   Composition composition = Composition::Additive);

std::vector<double> predict_hybrid(const HybridModel& model, const FluxFrame& frame);
// theta(X) per row (raw effect as fitted; for the LUE problem LUE = -theta)
std::vector<double> effect_series(const HybridModel& model, const FluxFrame& frame);
std::vector<double> g_series(const HybridModel& model, const FluxFrame& frame);

// Versioned text record of a fit (theta, se, CI, fold diagnostics).
struct DmlSummary {
    ConstantEffect effect;
    int k_folds = 0;
    std::size_t n_rows = 0;
    double y_res_mean = 0.0, t_res_mean = 0.0;
    double residual_corr = 0.0; // corr(y_res - theta*t_res, t_res), diagnostic only
};
std::string format_summary(const DmlSummary& s);
DmlSummary parse_summary(const std::string& text);
DmlSummary make_summary(const PartialOutResult& po, const ConstantEffect& eff);

} // namespace chm::dml
