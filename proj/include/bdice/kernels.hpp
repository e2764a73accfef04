#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Vector kernels behind the training and sampling inner loops. Each kernel
// has a scalar reference implementation and an AVX2 variant; the dispatcher
// picks one at process start based on CPUID and can be overridden (tests,
// BAYESDICE_KERNELS=scalar in the environment).
//
// The elementwise kernels (exp, softplus, sigmoid, reparam, adam, gather)
// are written so the scalar and AVX2 paths execute the same sequence of
// IEEE operations per element and agree bit for bit. Reductions use a
// different accumulation order per backend and agree only to rounding.

namespace bdice::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
void set_backend(Backend b);  // throws std::invalid_argument if unsupported
bool avx2_supported();
std::string backend_name(Backend b);

// out[i] = exp(x[i]); clamps to 0 / +inf outside the finite range.
void vexp(const double* x, double* out, std::size_t n);
// out[i] = log(1 + exp(x[i])), evaluated stably for large |x|.
void vsoftplus(const double* x, double* out, std::size_t n);
// out[i] = 1 / (1 + exp(-x[i]))
void vsigmoid(const double* x, double* out, std::size_t n);
// w[i] = mu[i] + sigma[i] * xi[i]
void vreparam(const double* mu, const double* sigma, const double* xi, double* w,
              std::size_t n);
// dst[i] += a * x[i]
void vaxpy(double a, const double* x, double* dst, std::size_t n);
// dst[i] += scale * gw[i] * xi[i] * sigma[i]
void vgrad_scale(const double* gw, const double* xi, const double* sigma, double scale,
                 double* dst, std::size_t n);
// out[i] = table[idx[i]]
void vgather(const double* table, const std::int32_t* idx, double* out, std::size_t n);

double vsum(const double* x, std::size_t n);
double vdot(const double* x, const double* y, std::size_t n);
double vsumsq(const double* x, std::size_t n);

// One first-order update with decoupled moment estimates. inv_bias1/2 are the
// 1/(1-beta^t) corrections, precomputed by the caller once per step.
void adam_step(double* param, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double inv_bias1,
               double inv_bias2);

namespace scalar {
void vexp(const double* x, double* out, std::size_t n);
void vsoftplus(const double* x, double* out, std::size_t n);
void vsigmoid(const double* x, double* out, std::size_t n);
void vreparam(const double* mu, const double* sigma, const double* xi, double* w,
              std::size_t n);
void vaxpy(double a, const double* x, double* dst, std::size_t n);
void vgrad_scale(const double* gw, const double* xi, const double* sigma, double scale,
                 double* dst, std::size_t n);
void vgather(const double* table, const std::int32_t* idx, double* out, std::size_t n);
double vsum(const double* x, std::size_t n);
double vdot(const double* x, const double* y, std::size_t n);
double vsumsq(const double* x, std::size_t n);
void adam_step(double* param, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double inv_bias1,
               double inv_bias2);
}  // namespace scalar

#if defined(BDICE_HAVE_AVX2_TU)
namespace avx2 {
void vexp(const double* x, double* out, std::size_t n);
void vsoftplus(const double* x, double* out, std::size_t n);
void vsigmoid(const double* x, double* out, std::size_t n);
void vreparam(const double* mu, const double* sigma, const double* xi, double* w,
              std::size_t n);
void vaxpy(double a, const double* x, double* dst, std::size_t n);
void vgrad_scale(const double* gw, const double* xi, const double* sigma, double scale,
                 double* dst, std::size_t n);
void vgather(const double* table, const std::int32_t* idx, double* out, std::size_t n);
double vsum(const double* x, std::size_t n);
double vdot(const double* x, const double* y, std::size_t n);
double vsumsq(const double* x, std::size_t n);
void adam_step(double* param, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double inv_bias1,
               double inv_bias2);
}  // namespace avx2
#endif

}  // namespace bdice::kernels
