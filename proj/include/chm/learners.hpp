#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "chm/matrix.hpp"

namespace chm::learn {

// ---------------------------------------------------------------------------
// Configuration types
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr_decay_rate = 0.95; // effective lr = lr * rate^(step/every)
    int lr_decay_every = 500;
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

// One Adam update with bias correction and the stepped exponential lr decay.
// Steps are counted from 1; the effective rate at step t is
// lr * rate^floor(t/every).
void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               const AdamConfig& hyper);

struct MlpConfig {
    std::vector<int> hidden{16, 16};    // tanh hidden layers
    bool softplus_output = false;       // softplus on the output unit
    double dropout_rate = 0.0;          // inverted dropout on hidden outputs, training only
    double weight_decay = 0.0;          // adds wd*||params||^2 to the loss
    AdamConfig adam;
    int iterations = 2000;
    double validation_fraction = 0.2;   // kept for best-loss model selection
    bool random_validation_split = false; // default: last contiguous block
    int batch_size = 0;                 // 0 = full batch
};

struct GbtConfig {
    int n_stages = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_samples_leaf = 1;
    double subsample = 1.0; // per-stage row fraction, without replacement
};

struct RfConfig {
    int n_trees = 100;
    int max_depth = 0; // 0 = unlimited
    int min_samples_leaf = 5;
    double feature_subsample = 1.0; // per-split feature fraction
    bool bootstrap = true;
};

enum class LearnerKind { Linear, Gbt, Rf, Mlp };

struct LearnerSpec {
    LearnerKind kind = LearnerKind::Linear;
    GbtConfig gbt;
    RfConfig rf;
    MlpConfig mlp;
    std::uint64_t seed = 0;

    static LearnerSpec linear(std::uint64_t seed = 0);
    static LearnerSpec gradient_boosting(GbtConfig cfg = {}, std::uint64_t seed = 0);
    static LearnerSpec random_forest(RfConfig cfg = {}, std::uint64_t seed = 0);
    static LearnerSpec multilayer_perceptron(MlpConfig cfg = {}, std::uint64_t seed = 0);
};

// ---------------------------------------------------------------------------
// Trained models
// ---------------------------------------------------------------------------

struct Diagnostics {
    double train_loss = std::numeric_limits<double>::quiet_NaN();
    double validation_loss = std::numeric_limits<double>::quiet_NaN();
    bool zero_variance_target = false;
    std::vector<double> stage_train_loss; // Gbt: per-stage training MSE
};

class Model {
public:
    virtual ~Model() = default;
    virtual std::size_t feature_count() const = 0;
    virtual std::string kind_name() const = 0;
    virtual std::vector<double> predict_raw(const Matrix& X) const = 0;
    const Diagnostics& diagnostics() const { return diag_; }

protected:
    Diagnostics diag_;
};

using ModelPtr = std::shared_ptr<const Model>;

// Fits the learner described by `spec`. Deterministic: identical
// (spec, data, seed) produce identical models. Optional nonnegative sample
// weights; inputs must be finite and n >= 2.
ModelPtr fit(const LearnerSpec& spec, const Matrix& X, const std::vector<double>& y,
             const std::vector<double>* weights = nullptr);

// Checked prediction: validates the feature count and input finiteness.
std::vector<double> predict(const Model& model, const Matrix& X);

// Versioned JSON model state (self-describing, format "chm-model" v1).
void save_model(const Model& model, std::ostream& out);
ModelPtr load_model(std::istream& in);

} // namespace chm::learn
