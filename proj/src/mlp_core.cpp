#include "chm/mlp_core.hpp"

#include <cstdint>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif
#if defined(__AVX512F__) && defined(__AVX512DQ__)
#include <immintrin.h>
#endif

#include "chm/kernels.hpp"

namespace chm::learn {

namespace {
constexpr std::size_t kElementwiseParallelCutoff = 1u << 15;

#if defined(__AVX512F__) && defined(__AVX512DQ__)
// 8-wide version of fast_tanh, operation-for-operation identical to the
// scalar path (FMA everywhere), so lanes and tail agree bit-exactly.
inline void tanh_block(const double* __restrict x, std::size_t m, double* __restrict y) {
    using namespace tanh_poly;
    std::size_t i = 0;
    const __m512d vlog2e = _mm512_set1_pd(kLog2e);
    const __m512d vhalf = _mm512_set1_pd(0.5);
    const __m512d vone = _mm512_set1_pd(1.0);
    const __m512d vlo = _mm512_set1_pd(-60.0), vhi = _mm512_set1_pd(60.0);
    for (; i + 8 <= m; i += 8) {
        __m512d v = _mm512_loadu_pd(x + i);
        __m512d yv = _mm512_mul_pd(
            _mm512_min_pd(_mm512_max_pd(_mm512_add_pd(v, v), vlo), vhi), vlog2e);
        __m512d k = _mm512_floor_pd(_mm512_add_pd(yv, vhalf));
        __m512d f = _mm512_sub_pd(yv, k);
        __m512d p = _mm512_set1_pd(coeff[0]);
        for (int c = 1; c < 11; ++c) p = _mm512_fmadd_pd(p, f, _mm512_set1_pd(coeff[c]));
        __m512i bits = _mm512_slli_epi64(
            _mm512_add_epi64(_mm512_cvtpd_epi64(k), _mm512_set1_epi64(1023)), 52);
        __m512d e2x = _mm512_mul_pd(p, _mm512_castsi512_pd(bits));
        __m512d t = _mm512_div_pd(_mm512_sub_pd(e2x, vone), _mm512_add_pd(e2x, vone));
        _mm512_storeu_pd(y + i, t);
    }
    for (; i < m; ++i) y[i] = fast_tanh(x[i]);
}
#else
inline void tanh_block(const double* __restrict x, std::size_t m, double* __restrict y) {
    for (std::size_t i = 0; i < m; ++i) y[i] = fast_tanh(x[i]);
}
#endif

// y[i] = tanh(x[i]); independent elements, identical order per element.
void tanh_map(const double* x, std::size_t m, double* y) {
#ifdef _OPENMP
    if (m >= kElementwiseParallelCutoff && !omp_in_parallel()) {
        const std::size_t half = (m / 2) & ~std::size_t(7); // lane-aligned split
#pragma omp parallel num_threads(2)
        {
#pragma omp sections
            {
#pragma omp section
                tanh_block(x, half, y);
#pragma omp section
                tanh_block(x + half, m - half, y + half);
            }
        }
        return;
    }
#endif
    tanh_block(x, m, y);
}

void mul_map(const double* x, const double* f, std::size_t m, double* y) {
#pragma omp parallel for schedule(static) if (m >= kElementwiseParallelCutoff)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i) y[i] = x[i] * f[i];
}
} // namespace

MlpTopology MlpTopology::make(int inputs, const std::vector<int>& hidden, bool softplus_out) {
    MlpTopology t;
    t.widths.push_back(inputs);
    for (int h : hidden) {
        if (h <= 0) throw std::invalid_argument("MlpTopology: non-positive hidden width");
        t.widths.push_back(h);
    }
    t.widths.push_back(1);
    t.softplus_output = softplus_out;
    return t;
}

std::size_t MlpTopology::param_count() const {
    std::size_t c = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        c += static_cast<std::size_t>(widths[l + 1]) * widths[l] + widths[l + 1];
    return c;
}

std::size_t MlpTopology::weight_offset(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < l; ++k)
        off += static_cast<std::size_t>(widths[k + 1]) * widths[k] + widths[k + 1];
    return off;
}

std::size_t MlpTopology::bias_offset(std::size_t l) const {
    return weight_offset(l) + static_cast<std::size_t>(widths[l + 1]) * widths[l];
}

DropoutMasks make_dropout_masks(const MlpTopology& topo, std::size_t n, double rate, Rng& rng) {
    DropoutMasks m;
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    m.layer.resize(topo.layers() - 1);
    for (std::size_t l = 0; l + 1 < topo.layers(); ++l) {
        const std::size_t w = static_cast<std::size_t>(topo.widths[l + 1]);
        auto& mk = m.layer[l];
        mk.resize(n * w);
        for (std::size_t i = 0; i < n * w; ++i) mk[i] = rng.uniform01() < keep ? scale : 0.0;
    }
    return m;
}

void mlp_forward(const MlpTopology& topo, const double* params, const double* X, std::size_t n,
                 MlpWorkspace& ws, const DropoutMasks* masks) {
    const std::size_t L = topo.layers();
    ws.h.resize(L - 1);
    ws.a.resize(L - 1);
    const double* input = X;
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const std::size_t in = static_cast<std::size_t>(topo.widths[l]);
        const std::size_t out = static_cast<std::size_t>(topo.widths[l + 1]);
        ws.h[l].resize(n * out);
        kernels::affine_forward(input, n, in, params + topo.weight_offset(l),
                                params + topo.bias_offset(l), out, ws.h[l].data());
        tanh_map(ws.h[l].data(), n * out, ws.h[l].data());
        if (masks) {
            ws.a[l].resize(n * out);
            mul_map(ws.h[l].data(), masks->layer[l].data(), n * out, ws.a[l].data());
            input = ws.a[l].data();
        } else {
            input = ws.h[l].data();
        }
    }
    // output layer, width 1
    const std::size_t l = L - 1;
    const std::size_t in = static_cast<std::size_t>(topo.widths[l]);
    ws.out_pre.resize(n);
    ws.out.resize(n);
    kernels::affine_forward(input, n, in, params + topo.weight_offset(l),
                            params + topo.bias_offset(l), 1, ws.out_pre.data());
    if (topo.softplus_output) {
#pragma omp parallel for schedule(static) if (n >= kElementwiseParallelCutoff)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
            ws.out[i] = softplus(ws.out_pre[i]);
    } else {
        ws.out = ws.out_pre;
    }
}

void mlp_backward(const MlpTopology& topo, const double* params, const double* X, std::size_t n,
                  MlpWorkspace& ws, const double* out_delta, const DropoutMasks* masks,
                  double* grad) {
    const std::size_t L = topo.layers();
    ws.delta.resize(L);

    // output layer
    auto& d_out = ws.delta[L - 1];
    d_out.resize(n);
    if (topo.softplus_output) {
#pragma omp parallel for schedule(static) if (n >= kElementwiseParallelCutoff)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
            d_out[i] = out_delta[i] * sigmoid(ws.out_pre[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) d_out[i] = out_delta[i];
    }

    const double* up_delta = d_out.data();
    for (std::size_t l = L; l-- > 0;) {
        const std::size_t in = static_cast<std::size_t>(topo.widths[l]);
        const std::size_t out = static_cast<std::size_t>(topo.widths[l + 1]);
        const double* layer_input =
            (l == 0) ? X : (masks ? ws.a[l - 1].data() : ws.h[l - 1].data());
        kernels::weight_grad(up_delta, layer_input, n, out, in, grad + topo.weight_offset(l));
        kernels::col_sum(up_delta, n, out, grad + topo.bias_offset(l));
        if (l == 0) break;

        auto& d_in = ws.delta[l - 1];
        d_in.resize(n * in);
        kernels::backprop_input(up_delta, n, out, params + topo.weight_offset(l), in, d_in.data());
        // through dropout then tanh
        const double* mask = (masks && l - 1 < masks->layer.size()) ? masks->layer[l - 1].data() : nullptr;
        const auto& h = ws.h[l - 1];
#pragma omp parallel for schedule(static) if (n * in >= kElementwiseParallelCutoff)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n * in); ++i) {
            double d = d_in[i];
            if (mask) d *= mask[i];
            d_in[i] = d * (1.0 - h[i] * h[i]);
        }
        up_delta = d_in.data();
    }
}

double mlp_loss_grad(const MlpTopology& topo, const std::vector<double>& params, const double* X,
                     std::size_t n, const double* y, const double* weights, double weight_decay,
                     const DropoutMasks* masks, MlpWorkspace& ws, std::vector<double>* grad) {
    mlp_forward(topo, params.data(), X, n, ws, masks);

    double wsum = 0.0;
    if (weights)
        for (std::size_t i = 0; i < n; ++i) wsum += weights[i];
    else
        wsum = static_cast<double>(n);

    double loss = 0.0;
    ws.out_delta_scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ws.out[i] - y[i];
        const double w = weights ? weights[i] : 1.0;
        loss += w * r * r;
        ws.out_delta_scratch[i] = 2.0 * w * r / wsum;
    }
    loss /= wsum;

    if (weight_decay > 0.0)
        for (double p : params) loss += weight_decay * p * p;

    if (grad) {
        grad->assign(params.size(), 0.0);
        mlp_backward(topo, params.data(), X, n, ws, ws.out_delta_scratch.data(), masks,
                     grad->data());
        if (weight_decay > 0.0)
            for (std::size_t k = 0; k < params.size(); ++k)
                (*grad)[k] += 2.0 * weight_decay * params[k];
    }
    return loss;
}

void mlp_init_params(const MlpTopology& topo, std::vector<double>& params, Rng& rng) {
    params.assign(topo.param_count(), 0.0);
    for (std::size_t l = 0; l < topo.layers(); ++l) {
        const std::size_t in = static_cast<std::size_t>(topo.widths[l]);
        const std::size_t out = static_cast<std::size_t>(topo.widths[l + 1]);
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        double* w = params.data() + topo.weight_offset(l);
        for (std::size_t k = 0; k < in * out; ++k) w[k] = rng.uniform(-bound, bound);
        // biases stay zero
    }
}

} // namespace chm::learn
