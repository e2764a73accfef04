#include <immintrin.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "bdice/kernels.hpp"
#include "kernels_poly.hpp"

// AVX2/FMA kernels. Lane arithmetic mirrors the scalar reference op for op
// (same clamps, same fma placement, same blend semantics), so elementwise
// kernels agree with the scalar backend bit for bit; only reduction order
// differs. Remainder elements run through scalar helpers compiled here.

namespace bdice::kernels::avx2 {

namespace {

using namespace bdice::kernels::detail;

inline double load_pow2_s(std::int32_t e) {
  return std::bit_cast<double>(static_cast<std::uint64_t>(
                                   static_cast<std::int64_t>(e) + 1023)
                               << 52);
}

inline double exp_one_s(double x) {
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
  double y = (p * load_pow2_s(n1)) * load_pow2_s(n2);
  y = x > kExpHi ? std::numeric_limits<double>::infinity() : y;
  y = x < kExpLo ? 0.0 : y;
  y = std::isnan(x) ? x : y;
  return y;
}

inline double log1p_unit_s(double e) {
  const double s = e / (2.0 + e);
  const double t = s * s;
  double q = kLogC[15];
  for (int k = 14; k >= 0; --k) q = std::fma(q, t, kLogC[k]);
  return (2.0 * s) * q;
}

inline double softplus_one_s(double x) {
  const double ax = std::fabs(x);
  const double e = exp_one_s(-ax);
  const double base = x > 0.0 ? x : 0.0;
  double y = base + log1p_unit_s(e);
  y = x < kSoftplusTiny ? e : y;
  y = std::isnan(x) ? x : y;
  return y;
}

inline __m256d pow2_from_epi32(__m128i e) {
  const __m256i wide = _mm256_cvtepi32_epi64(e);
  const __m256i bits =
      _mm256_slli_epi64(_mm256_add_epi64(wide, _mm256_set1_epi64x(1023)), 52);
  return _mm256_castsi256_pd(bits);
}

inline __m256d exp_vec(__m256d x) {
  __m256d xc = _mm256_min_pd(x, _mm256_set1_pd(kExpClampHi));
  xc = _mm256_max_pd(xc, _mm256_set1_pd(kExpClampLo));
  const __m256d nd = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(kLog2E)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m128i n = _mm256_cvtpd_epi32(nd);
  __m256d r = _mm256_fmadd_pd(nd, _mm256_set1_pd(-kLn2Hi), xc);
  r = _mm256_fmadd_pd(nd, _mm256_set1_pd(-kLn2Lo), r);
  __m256d p = _mm256_set1_pd(kExpC[12]);
  for (int k = 11; k >= 0; --k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kExpC[k]));
  const __m128i n1 = _mm_srai_epi32(n, 1);
  const __m128i n2 = _mm_sub_epi32(n, n1);
  __m256d y = _mm256_mul_pd(_mm256_mul_pd(p, pow2_from_epi32(n1)), pow2_from_epi32(n2));
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  const __m256d hi = _mm256_cmp_pd(x, _mm256_set1_pd(kExpHi), _CMP_GT_OQ);
  y = _mm256_blendv_pd(y, inf, hi);
  const __m256d lo = _mm256_cmp_pd(x, _mm256_set1_pd(kExpLo), _CMP_LT_OQ);
  y = _mm256_blendv_pd(y, _mm256_setzero_pd(), lo);
  const __m256d nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  return _mm256_blendv_pd(y, x, nan);
}

inline __m256d log1p_unit_vec(__m256d e) {
  const __m256d s = _mm256_div_pd(e, _mm256_add_pd(_mm256_set1_pd(2.0), e));
  const __m256d t = _mm256_mul_pd(s, s);
  __m256d q = _mm256_set1_pd(kLogC[15]);
  for (int k = 14; k >= 0; --k) q = _mm256_fmadd_pd(q, t, _mm256_set1_pd(kLogC[k]));
  return _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(2.0), s), q);
}

inline __m256d softplus_vec(__m256d x) {
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFLL));
  const __m256d sign = _mm256_castsi256_pd(_mm256_set1_epi64x(0x8000000000000000LL));
  const __m256d ax = _mm256_and_pd(x, abs_mask);
  const __m256d e = exp_vec(_mm256_xor_pd(ax, sign));
  const __m256d base = _mm256_max_pd(x, _mm256_setzero_pd());
  __m256d y = _mm256_add_pd(base, log1p_unit_vec(e));
  const __m256d tiny = _mm256_cmp_pd(x, _mm256_set1_pd(kSoftplusTiny), _CMP_LT_OQ);
  y = _mm256_blendv_pd(y, e, tiny);
  const __m256d nan = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  return _mm256_blendv_pd(y, x, nan);
}

inline double hsum(__m256d v) {
  const __m128d low = _mm256_castpd256_pd128(v);
  const __m128d high = _mm256_extractf128_pd(v, 1);
  const __m128d sum2 = _mm_add_pd(low, high);
  const __m128d swapped = _mm_unpackhi_pd(sum2, sum2);
  return _mm_cvtsd_f64(_mm_add_sd(sum2, swapped));
}

}  // namespace

void vexp(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_vec(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = exp_one_s(x[i]);
}

void vsoftplus(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, softplus_vec(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = softplus_one_s(x[i]);
}

void vsigmoid(const double* x, double* out, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign = _mm256_castsi256_pd(_mm256_set1_epi64x(0x8000000000000000LL));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d e = exp_vec(_mm256_xor_pd(_mm256_loadu_pd(x + i), sign));
    _mm256_storeu_pd(out + i, _mm256_div_pd(one, _mm256_add_pd(one, e)));
  }
  for (; i < n; ++i) out[i] = 1.0 / (1.0 + exp_one_s(-x[i]));
}

void vreparam(const double* mu, const double* sigma, const double* xi, double* w,
              std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d res = _mm256_fmadd_pd(_mm256_loadu_pd(sigma + i),
                                        _mm256_loadu_pd(xi + i), _mm256_loadu_pd(mu + i));
    _mm256_storeu_pd(w + i, res);
  }
  for (; i < n; ++i) w[i] = std::fma(sigma[i], xi[i], mu[i]);
}

void vaxpy(double a, const double* x, double* dst, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d res =
        _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(dst + i));
    _mm256_storeu_pd(dst + i, res);
  }
  for (; i < n; ++i) dst[i] = std::fma(a, x[i], dst[i]);
}

void vgrad_scale(const double* gw, const double* xi, const double* sigma, double scale,
                 double* dst, std::size_t n) {
  const __m256d sc = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_mul_pd(_mm256_loadu_pd(gw + i), _mm256_loadu_pd(xi + i));
    const __m256d t2 = _mm256_mul_pd(t, _mm256_loadu_pd(sigma + i));
    _mm256_storeu_pd(dst + i, _mm256_fmadd_pd(t2, sc, _mm256_loadu_pd(dst + i)));
  }
  for (; i < n; ++i) {
    const double t = gw[i] * xi[i];
    const double t2 = t * sigma[i];
    dst[i] = std::fma(t2, scale, dst[i]);
  }
}

void vgather(const double* table, const std::int32_t* idx, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i ix = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
    _mm256_storeu_pd(out + i, _mm256_i32gather_pd(table, ix, 8));
  }
  for (; i < n; ++i) out[i] = table[idx[i]];
}

double vsum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double result = hsum(acc);
  for (; i < n; ++i) result += x[i];
  return result;
}

double vdot(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double result = hsum(acc);
  for (; i < n; ++i) result = std::fma(x[i], y[i], result);
  return result;
}

double vsumsq(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double result = hsum(acc);
  for (; i < n; ++i) result = std::fma(x[i], x[i], result);
  return result;
}

void adam_step(double* param, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double inv_bias1,
               double inv_bias2) {
  const double omb1 = 1.0 - beta1;
  const double omb2 = 1.0 - beta2;
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d o1 = _mm256_set1_pd(omb1);
  const __m256d o2 = _mm256_set1_pd(omb2);
  const __m256d ib1 = _mm256_set1_pd(inv_bias1);
  const __m256d ib2 = _mm256_set1_pd(inv_bias2);
  const __m256d epsv = _mm256_set1_pd(eps);
  const __m256d lrv = _mm256_set1_pd(lr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d t1 = _mm256_mul_pd(o1, gv);
    const __m256d mv = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), t1);
    _mm256_storeu_pd(m + i, mv);
    const __m256d g2 = _mm256_mul_pd(gv, gv);
    const __m256d t2 = _mm256_mul_pd(o2, g2);
    const __m256d vv = _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i), t2);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, ib1);
    const __m256d vhat = _mm256_mul_pd(vv, ib2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    const __m256d upd = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), upd));
  }
  for (; i < n; ++i) {
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

}  // namespace bdice::kernels::avx2
