#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <cstddef>
#include <vector>

#include "chm/matrix.hpp"
#include "chm/rng.hpp"

// Batch forward/backward machinery for small fully connected nets with tanh
// hidden layers. Shared by the Mlp learner and the joint hybrid-model
// optimizer, and exercised directly by the finite-difference gradient tests.

namespace chm::learn {

inline double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
inline double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// tanh with ~1e-13 relative accuracy from plain arithmetic (no libm calls).
// tanh_map in the core runs a SIMD version of exactly these operations (FMA
// included), so scalar and vector evaluations agree bit-for-bit.
namespace tanh_poly {
inline constexpr double kLog2e = 1.4426950408889634074;
inline constexpr double coeff[11] = {
    7.0549116208011233e-9, 1.0178086009239699e-7, 1.3215486790144309e-6,
    1.5252733804059840e-5, 1.5403530393381609e-4, 1.3333558146428443e-3,
    9.6181291076284772e-3, 5.5504108664823579e-2, 2.4022650695910071e-1,
    6.9314718055994531e-1, 1.0};
} // namespace tanh_poly

inline double fast_tanh(double x) {
    // tanh(x) = (e^{2x}-1)/(e^{2x}+1) with e^{2x} = 2^k * 2^f, f in [-1/2,1/2];
    // 2^f by an order-11 expansion in f*ln2 (truncation ~6e-15 at |f|=1/2)
    const double y = std::min(std::max(2.0 * x, -60.0), 60.0) * tanh_poly::kLog2e;
    const double k = std::floor(y + 0.5);
    const double f = y - k;
    double p = tanh_poly::coeff[0];
    for (int c = 1; c < 11; ++c) p = std::fma(p, f, tanh_poly::coeff[c]);
    // scale by 2^k through the exponent bits
    const std::int64_t bits = (static_cast<std::int64_t>(k) + 1023) << 52;
    double scale;
    std::memcpy(&scale, &bits, sizeof(scale));
    const double e2x = p * scale;
    return (e2x - 1.0) / (e2x + 1.0);
}

struct MlpTopology {
    std::vector<int> widths;      // input, hidden..., output
    bool softplus_output = false;

    static MlpTopology make(int inputs, const std::vector<int>& hidden, bool softplus_out);

    std::size_t layers() const { return widths.size() - 1; }
    std::size_t param_count() const;
    // params layout per layer l: W[l] (widths[l+1] x widths[l]) row-major, then b[l]
    std::size_t weight_offset(std::size_t l) const;
    std::size_t bias_offset(std::size_t l) const;
};

// Inverted-dropout multipliers for the hidden layer outputs: each entry is 0
// (dropped) or 1/(1-rate). Resampled every training iteration.
struct DropoutMasks {
    std::vector<std::vector<double>> layer; // per hidden layer, n x width
};

DropoutMasks make_dropout_masks(const MlpTopology& topo, std::size_t n, double rate, Rng& rng);

struct MlpWorkspace {
    std::vector<std::vector<double>> h;     // tanh outputs per hidden layer, n x width
    std::vector<std::vector<double>> a;     // post-dropout activations, n x width
    std::vector<double> out_pre;            // output pre-activation, n
    std::vector<double> out;                // network output, n
    std::vector<std::vector<double>> delta; // scratch for backward
    std::vector<double> out_delta_scratch;
};

// Forward pass over an n x widths[0] feature block (row-major).
void mlp_forward(const MlpTopology& topo, const double* params, const double* X, std::size_t n,
                 MlpWorkspace& ws, const DropoutMasks* masks);

// Backward pass; `out_delta[i]` is dLoss/d(out_i). Fills `grad` (overwrites).
// Requires the workspace of the matching forward call.
void mlp_backward(const MlpTopology& topo, const double* params, const double* X, std::size_t n,
                  MlpWorkspace& ws, const double* out_delta, const DropoutMasks* masks,
                  double* grad);

// Weighted squared-error loss sum_i w_i (out_i - y_i)^2 / sum_i w_i plus
// weight_decay * ||params||^2. With `grad` non-null fills the exact
// backpropagation gradient of that loss. `weights` may be null (all ones).
double mlp_loss_grad(const MlpTopology& topo, const std::vector<double>& params, const double* X,
                     std::size_t n, const double* y, const double* weights, double weight_decay,
                     const DropoutMasks* masks, MlpWorkspace& ws, std::vector<double>* grad);

// Symmetric uniform init, bound sqrt(6/(fan_in+fan_out)); biases zero.
void mlp_init_params(const MlpTopology& topo, std::vector<double>& params, Rng& rng);

} // namespace chm::learn
