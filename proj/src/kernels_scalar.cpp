#include <bit>
#include <cmath>
#include <cstdint>

#include "bdice/kernels.hpp"
#include "kernels_poly.hpp"

// Scalar reference kernels. Comparisons are spelled as ternaries (not
// fmin/fmax) to reproduce the NaN semantics of the AVX2 min/max/blend ops,
// and every fused multiply-add is an explicit std::fma.

namespace bdice::kernels::scalar {

namespace {

using namespace bdice::kernels::detail;

inline double load_pow2(std::int32_t e) {
  return std::bit_cast<double>(static_cast<std::uint64_t>(
                                   static_cast<std::int64_t>(e) + 1023)
                               << 52);
}

inline double exp_one(double x) {
  double xc = x < kExpClampHi ? x : kExpClampHi;
  xc = xc > kExpClampLo ? xc : kExpClampLo;
  const double nd = std::nearbyint(xc * kLog2E);
  const auto n = static_cast<std::int32_t>(nd);
  double r = std::fma(nd, -kLn2Hi, xc);
  r = std::fma(nd, -kLn2Lo, r);
  double p = kExpC[12];
  for (int k = 11; k >= 0; --k) p = std::fma(p, r, kExpC[k]);
  const std::int32_t n1 = n >> 1;
  const std::int32_t n2 = n - n1;
  double y = (p * load_pow2(n1)) * load_pow2(n2);
  y = x > kExpHi ? std::numeric_limits<double>::infinity() : y;
  y = x < kExpLo ? 0.0 : y;
  y = std::isnan(x) ? x : y;
  return y;
}

// log(1 + e) for e in (0, 1] via the atanh expansion; exact relative error
// stays within a few ulp because s = e/(2+e) <= 1/3.
inline double log1p_unit(double e) {
  const double s = e / (2.0 + e);
  const double t = s * s;
  double q = kLogC[15];
  for (int k = 14; k >= 0; --k) q = std::fma(q, t, kLogC[k]);
  return (2.0 * s) * q;
}

inline double softplus_one(double x) {
  const double ax = std::fabs(x);
  const double e = exp_one(-ax);
  const double base = x > 0.0 ? x : 0.0;
  double y = base + log1p_unit(e);
  y = x < kSoftplusTiny ? e : y;
  y = std::isnan(x) ? x : y;
  return y;
}

}  // namespace

void vexp(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = exp_one(x[i]);
}

void vsoftplus(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = softplus_one(x[i]);
}

void vsigmoid(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + exp_one(-x[i]));
}

void vreparam(const double* mu, const double* sigma, const double* xi, double* w,
              std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) w[i] = std::fma(sigma[i], xi[i], mu[i]);
}

void vaxpy(double a, const double* x, double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::fma(a, x[i], dst[i]);
}

void vgrad_scale(const double* gw, const double* xi, const double* sigma, double scale,
                 double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double t = gw[i] * xi[i];
    const double t2 = t * sigma[i];
    dst[i] = std::fma(t2, scale, dst[i]);
  }
}

void vgather(const double* table, const std::int32_t* idx, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = table[idx[i]];
}

double vsum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double vdot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc = std::fma(x[i], y[i], acc);
  return acc;
}

double vsumsq(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc = std::fma(x[i], x[i], acc);
  return acc;
}

void adam_step(double* param, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double inv_bias1,
               double inv_bias2) {
  const double omb1 = 1.0 - beta1;
  const double omb2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double t1 = omb1 * g[i];
    m[i] = std::fma(beta1, m[i], t1);
    const double g2 = g[i] * g[i];
    const double t2 = omb2 * g2;
    v[i] = std::fma(beta2, v[i], t2);
    const double mhat = m[i] * inv_bias1;
    const double vhat = v[i] * inv_bias2;
    const double denom = std::sqrt(vhat) + eps;
    const double upd = (lr * mhat) / denom;
    param[i] = param[i] - upd;
  }
}

}  // namespace bdice::kernels::scalar
