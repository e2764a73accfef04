#include <cstdlib>
#include <stdexcept>
#include <string>

#include "bdice/kernels.hpp"

namespace bdice::kernels {

namespace {

Backend detect_backend() {
  if (const char* env = std::getenv("BAYESDICE_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return Backend::scalar;
    if (want == "avx2" && avx2_supported()) return Backend::avx2;
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend& backend_slot() {
  static Backend current = detect_backend();
  return current;
}

}  // namespace

bool avx2_supported() {
#if defined(BDICE_HAVE_AVX2_TU)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() { return backend_slot(); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported())
    throw std::invalid_argument("avx2 kernels are not available on this cpu/build");
  backend_slot() = b;
}

std::string backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

#if defined(BDICE_HAVE_AVX2_TU)
#define BDICE_DISPATCH(call) \
  (backend_slot() == Backend::avx2 ? avx2::call : scalar::call)
#else
#define BDICE_DISPATCH(call) (scalar::call)
#endif

void vexp(const double* x, double* out, std::size_t n) {
  BDICE_DISPATCH(vexp(x, out, n));
}
void vsoftplus(const double* x, double* out, std::size_t n) {
  BDICE_DISPATCH(vsoftplus(x, out, n));
}
void vsigmoid(const double* x, double* out, std::size_t n) {
  BDICE_DISPATCH(vsigmoid(x, out, n));
}
void vreparam(const double* mu, const double* sigma, const double* xi, double* w,
              std::size_t n) {
  BDICE_DISPATCH(vreparam(mu, sigma, xi, w, n));
}
void vaxpy(double a, const double* x, double* dst, std::size_t n) {
  BDICE_DISPATCH(vaxpy(a, x, dst, n));
}
void vgrad_scale(const double* gw, const double* xi, const double* sigma, double scale,
                 double* dst, std::size_t n) {
  BDICE_DISPATCH(vgrad_scale(gw, xi, sigma, scale, dst, n));
}
void vgather(const double* table, const std::int32_t* idx, double* out, std::size_t n) {
  BDICE_DISPATCH(vgather(table, idx, out, n));
}
double vsum(const double* x, std::size_t n) { return BDICE_DISPATCH(vsum(x, n)); }
double vdot(const double* x, const double* y, std::size_t n) {
  return BDICE_DISPATCH(vdot(x, y, n));
}
double vsumsq(const double* x, std::size_t n) { return BDICE_DISPATCH(vsumsq(x, n)); }
void adam_step(double* param, double* m, double* v, const double* g, std::size_t n,
               double lr, double beta1, double beta2, double eps, double inv_bias1,
               double inv_bias2) {
  BDICE_DISPATCH(adam_step(param, m, v, g, n, lr, beta1, beta2, eps, inv_bias1, inv_bias2));
}

#undef BDICE_DISPATCH

}  // namespace bdice::kernels
