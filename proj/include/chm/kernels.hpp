#pragma once

#include <cstddef>

// Dense batch kernels used by the learners. Every kernel comes in two
// variants: a serial reference (`*_serial`) and an OpenMP one (`*_omp`).
// The parallel variants split work over independent output elements and
// keep the per-element arithmetic order identical to the serial code, so
// both produce bit-identical results; tests assert this. The unsuffixed
// entry points dispatch on problem size.

namespace chm::kernels {

// Y[n x out] = X[n x in] * W^T + b, W stored [out x in]
void affine_forward_serial(const double* X, std::size_t n, std::size_t in,
                           const double* W, const double* b, std::size_t out, double* Y);
void affine_forward_omp(const double* X, std::size_t n, std::size_t in,
                        const double* W, const double* b, std::size_t out, double* Y);
void affine_forward(const double* X, std::size_t n, std::size_t in,
                    const double* W, const double* b, std::size_t out, double* Y);

// dX[n x in] = delta[n x out] * W, W stored [out x in]
void backprop_input_serial(const double* delta, std::size_t n, std::size_t out,
                           const double* W, std::size_t in, double* dX);
void backprop_input_omp(const double* delta, std::size_t n, std::size_t out,
                        const double* W, std::size_t in, double* dX);
void backprop_input(const double* delta, std::size_t n, std::size_t out,
                    const double* W, std::size_t in, double* dX);

// dW[o,i] = sum_r delta[r,o] * X[r,i]
void weight_grad_serial(const double* delta, const double* X, std::size_t n,
                        std::size_t out, std::size_t in, double* dW);
void weight_grad_omp(const double* delta, const double* X, std::size_t n,
                     std::size_t out, std::size_t in, double* dW);
void weight_grad(const double* delta, const double* X, std::size_t n,
                 std::size_t out, std::size_t in, double* dW);

// db[o] = sum_r delta[r,o]
void col_sum_serial(const double* delta, std::size_t n, std::size_t out, double* db);
void col_sum_omp(const double* delta, std::size_t n, std::size_t out, double* db);
void col_sum(const double* delta, std::size_t n, std::size_t out, double* db);

// out[i] = mean(s[max(0,i-half) .. min(n-1,i+half)]) computed from a prefix
// sum supplied by the caller (prefix[k] = s[0]+...+s[k-1], length n+1).
void windowed_mean_serial(const double* prefix, std::size_t n, std::size_t half, double* out);
void windowed_mean_omp(const double* prefix, std::size_t n, std::size_t half, double* out);
void windowed_mean(const double* prefix, std::size_t n, std::size_t half, double* out);

} // namespace chm::kernels
