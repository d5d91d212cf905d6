#include "chm/kernels.hpp"

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace chm::kernels {

namespace {
// Below this many multiply-adds the fork/join overhead dominates on small
// batches, so the dispatchers stay serial. Inside an active parallel region
// (replication-level concurrency) nested teams would have one thread anyway,
// so the serial reference is used directly.
constexpr std::size_t kMinParallelWork = 1u << 16;

inline bool can_parallelize() {
#ifdef _OPENMP
    return !omp_in_parallel();
#else
    return false;
#endif
}

inline void affine_row(const double* x, std::size_t in, const double* W,
                       const double* b, std::size_t out, double* y) {
    for (std::size_t o = 0; o < out; ++o) {
        const double* w = W + o * in;
        double acc = b[o];
        for (std::size_t j = 0; j < in; ++j) acc += x[j] * w[j];
        y[o] = acc;
    }
}

// Wide-output path: with W transposed once per call the unit loop is
// contiguous and the batch loop turns into broadcast-FMA over output lanes.
// The accumulation order per (row, unit) is j-ascending, identical to
// affine_row, so both paths and all thread counts agree bit-exactly.
inline void affine_rows_transposed(const double* __restrict X, std::size_t r0, std::size_t r1,
                                   std::size_t in, const double* __restrict WT,
                                   const double* __restrict b, std::size_t out,
                                   double* __restrict Y) {
    for (std::size_t r = r0; r < r1; ++r) {
        const double* __restrict x = X + r * in;
        double* __restrict y = Y + r * out;
        for (std::size_t o = 0; o < out; ++o) y[o] = b[o];
        for (std::size_t j = 0; j < in; ++j) {
            const double xv = x[j];
            const double* __restrict wt = WT + j * out;
            for (std::size_t o = 0; o < out; ++o) y[o] += xv * wt[o];
        }
    }
}

constexpr std::size_t kTransposeMinOut = 8;

thread_local std::vector<double> g_wt_scratch;

const double* transpose_weights(const double* W, std::size_t out, std::size_t in) {
    g_wt_scratch.resize(in * out);
    for (std::size_t o = 0; o < out; ++o)
        for (std::size_t j = 0; j < in; ++j) g_wt_scratch[j * out + o] = W[o * in + j];
    return g_wt_scratch.data();
}

inline void backprop_row(const double* __restrict d, std::size_t out,
                         const double* __restrict W, std::size_t in, double* __restrict dx) {
    for (std::size_t j = 0; j < in; ++j) dx[j] = 0.0;
    for (std::size_t o = 0; o < out; ++o) {
        const double* __restrict w = W + o * in;
        const double dv = d[o];
        for (std::size_t j = 0; j < in; ++j) dx[j] += dv * w[j];
    }
}
} // namespace

void affine_forward_serial(const double* X, std::size_t n, std::size_t in,
                           const double* W, const double* b, std::size_t out, double* Y) {
    if (out >= kTransposeMinOut) {
        const double* WT = transpose_weights(W, out, in);
        affine_rows_transposed(X, 0, n, in, WT, b, out, Y);
        return;
    }
    for (std::size_t r = 0; r < n; ++r) affine_row(X + r * in, in, W, b, out, Y + r * out);
}

void affine_forward_omp(const double* X, std::size_t n, std::size_t in,
                        const double* W, const double* b, std::size_t out, double* Y) {
    if (out >= kTransposeMinOut) {
#pragma omp parallel
        {
            const double* WT = transpose_weights(W, out, in); // thread-local scratch
#pragma omp for schedule(static)
            for (std::int64_t r = 0; r < static_cast<std::int64_t>(n); ++r)
                affine_rows_transposed(X, r, r + 1, in, WT, b, out, Y);
        }
        return;
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(n); ++r)
        affine_row(X + r * in, in, W, b, out, Y + r * out);
}

void affine_forward(const double* X, std::size_t n, std::size_t in,
                    const double* W, const double* b, std::size_t out, double* Y) {
    if (n * in * out >= kMinParallelWork && can_parallelize())
        affine_forward_omp(X, n, in, W, b, out, Y);
    else
        affine_forward_serial(X, n, in, W, b, out, Y);
}

void backprop_input_serial(const double* delta, std::size_t n, std::size_t out,
                           const double* W, std::size_t in, double* dX) {
    for (std::size_t r = 0; r < n; ++r) backprop_row(delta + r * out, out, W, in, dX + r * in);
}

void backprop_input_omp(const double* delta, std::size_t n, std::size_t out,
                        const double* W, std::size_t in, double* dX) {
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(n); ++r)
        backprop_row(delta + r * out, out, W, in, dX + r * in);
}

void backprop_input(const double* delta, std::size_t n, std::size_t out,
                    const double* W, std::size_t in, double* dX) {
    if (n * in * out >= kMinParallelWork && can_parallelize())
        backprop_input_omp(delta, n, out, W, in, dX);
    else
        backprop_input_serial(delta, n, out, W, in, dX);
}

// Both variants stream delta and X row-major; for every dW entry the
// accumulation order over rows is ascending, so serial and parallel agree
// bit-exactly.
void weight_grad_serial(const double* delta, const double* X, std::size_t n,
                        std::size_t out, std::size_t in, double* dW) {
    for (std::size_t k = 0; k < out * in; ++k) dW[k] = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* __restrict x = X + r * in;
        const double* __restrict d = delta + r * out;
        for (std::size_t o = 0; o < out; ++o) {
            const double dv = d[o];
            double* __restrict w = dW + o * in;
            for (std::size_t j = 0; j < in; ++j) w[j] += dv * x[j];
        }
    }
}

void weight_grad_omp(const double* delta, const double* X, std::size_t n,
                     std::size_t out, std::size_t in, double* dW) {
#pragma omp parallel for schedule(static)
    for (std::int64_t o = 0; o < static_cast<std::int64_t>(out); ++o) {
        double* __restrict w = dW + o * in;
        for (std::size_t j = 0; j < in; ++j) w[j] = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double dv = delta[r * out + o];
            const double* __restrict x = X + r * in;
            for (std::size_t j = 0; j < in; ++j) w[j] += dv * x[j];
        }
    }
}

void weight_grad(const double* delta, const double* X, std::size_t n,
                 std::size_t out, std::size_t in, double* dW) {
    if (n * in * out >= kMinParallelWork && out > 1 && can_parallelize())
        weight_grad_omp(delta, X, n, out, in, dW);
    else
        weight_grad_serial(delta, X, n, out, in, dW);
}

void col_sum_serial(const double* delta, std::size_t n, std::size_t out, double* db) {
    for (std::size_t o = 0; o < out; ++o) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += delta[r * out + o];
        db[o] = acc;
    }
}

void col_sum_omp(const double* delta, std::size_t n, std::size_t out, double* db) {
#pragma omp parallel for schedule(static)
    for (std::int64_t o = 0; o < static_cast<std::int64_t>(out); ++o) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += delta[r * out + o];
        db[o] = acc;
    }
}

void col_sum(const double* delta, std::size_t n, std::size_t out, double* db) {
    if (n * out >= kMinParallelWork && out > 1 && can_parallelize())
        col_sum_omp(delta, n, out, db);
    else
        col_sum_serial(delta, n, out, db);
}

void windowed_mean_serial(const double* prefix, std::size_t n, std::size_t half, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = (i + half < n) ? i + half : n - 1;
        out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }
}

void windowed_mean_omp(const double* prefix, std::size_t n, std::size_t half, double* out) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        const std::size_t lo = ui >= half ? ui - half : 0;
        const std::size_t hi = (ui + half < n) ? ui + half : n - 1;
        out[ui] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }
}

void windowed_mean(const double* prefix, std::size_t n, std::size_t half, double* out) {
    if (n >= 1u << 14 && can_parallelize())
        windowed_mean_omp(prefix, n, half, out);
    else
        windowed_mean_serial(prefix, n, half, out);
}

} // namespace chm::kernels
