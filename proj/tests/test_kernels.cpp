#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "bdice/kernels.hpp"
#include "bdice/rng.hpp"

using namespace bdice;
namespace k = bdice::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo,
                                  double hi) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = lo + (hi - lo) * rng.uniform01();
  return out;
}

const std::vector<std::size_t> kSizes = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 257, 1000};

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("vexp matches std::exp closely") {
  auto xs = random_values(4096, 11, -700.0, 700.0);
  xs.insert(xs.end(), {0.0, -0.0, 1.0, -1.0, 709.0, -745.0, 710.0, -746.0, 1000.0,
                       -1000.0, 0.5 * std::log(2.0)});
  std::vector<double> got(xs.size());
  k::scalar::vexp(xs.data(), got.data(), xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double ref = std::exp(xs[i]);
    if (ref == 0.0 || std::isinf(ref)) {
      CHECK(got[i] == ref);
    } else {
      CHECK(std::abs(got[i] - ref) <= 1e-13 * ref);
    }
  }
}

TEST_CASE("softplus and sigmoid basic identities") {
  auto xs = random_values(2048, 21, -60.0, 60.0);
  std::vector<double> sp(xs.size()), sg(xs.size());
  k::scalar::vsoftplus(xs.data(), sp.data(), xs.size());
  k::scalar::vsigmoid(xs.data(), sg.data(), xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(sp[i] >= 0.0);
    CHECK(sg[i] >= 0.0);
    CHECK(sg[i] <= 1.0);
    if (std::fabs(xs[i]) < 30.0) {
      CHECK(sg[i] > 0.0);
      CHECK(sg[i] < 1.0);
    }
    const double ref = static_cast<double>(
        std::log1p(std::exp(static_cast<long double>(xs[i]) > 0.0L
                                ? -std::fabs(static_cast<long double>(xs[i]))
                                : static_cast<long double>(xs[i]))) +
        (xs[i] > 0.0 ? static_cast<long double>(xs[i]) : 0.0L));
    CHECK(sp[i] == doctest::Approx(ref).epsilon(1e-13));
    // derivative of softplus is the sigmoid
    const double h = 1e-6;
    double lohi[2] = {xs[i] - h, xs[i] + h};
    double vals[2];
    k::scalar::vsoftplus(lohi, vals, 2);
    CHECK((vals[1] - vals[0]) / (2 * h) == doctest::Approx(sg[i]).epsilon(1e-6));
  }
  double big = 40.0, out = 0.0;
  k::scalar::vsoftplus(&big, &out, 1);
  CHECK(out == big);
}

#if defined(BDICE_HAVE_AVX2_TU)
TEST_CASE("avx2 elementwise kernels are bit-exact against scalar") {
  if (!k::avx2_supported()) return;
  for (std::size_t n : kSizes) {
    auto xs = random_values(n, 100 + n, -80.0, 80.0);
    if (n >= 8) {
      xs[0] = 800.0;
      xs[1] = -800.0;
      xs[2] = 0.0;
      xs[3] = std::numeric_limits<double>::infinity();
      xs[4] = -std::numeric_limits<double>::infinity();
      xs[5] = 709.7827;
      xs[6] = -745.1;
      xs[7] = 1e-300;
    }
    std::vector<double> a(n), b(n);

    k::scalar::vexp(xs.data(), a.data(), n);
    k::avx2::vexp(xs.data(), b.data(), n);
    CHECK(bitwise_equal(a, b));

    k::scalar::vsoftplus(xs.data(), a.data(), n);
    k::avx2::vsoftplus(xs.data(), b.data(), n);
    CHECK(bitwise_equal(a, b));

    k::scalar::vsigmoid(xs.data(), a.data(), n);
    k::avx2::vsigmoid(xs.data(), b.data(), n);
    CHECK(bitwise_equal(a, b));

    auto mu = random_values(n, 7 * n + 1, -2.0, 2.0);
    auto sigma = random_values(n, 7 * n + 2, 0.0, 3.0);
    auto xi = random_values(n, 7 * n + 3, -3.0, 3.0);
    k::scalar::vreparam(mu.data(), sigma.data(), xi.data(), a.data(), n);
    k::avx2::vreparam(mu.data(), sigma.data(), xi.data(), b.data(), n);
    CHECK(bitwise_equal(a, b));

    a = mu;
    b = mu;
    k::scalar::vaxpy(0.37, xi.data(), a.data(), n);
    k::avx2::vaxpy(0.37, xi.data(), b.data(), n);
    CHECK(bitwise_equal(a, b));

    a = mu;
    b = mu;
    k::scalar::vgrad_scale(xs.data(), xi.data(), sigma.data(), 0.125, a.data(), n);
    k::avx2::vgrad_scale(xs.data(), xi.data(), sigma.data(), 0.125, b.data(), n);
    CHECK(bitwise_equal(a, b));
  }
}

TEST_CASE("avx2 gather and adam are bit-exact against scalar") {
  if (!k::avx2_supported()) return;
  auto table = random_values(512, 3, -5.0, 5.0);
  Rng rng(9);
  for (std::size_t n : kSizes) {
    std::vector<std::int32_t> idx(n);
    for (auto& ix : idx) ix = static_cast<std::int32_t>(rng.below(table.size()));
    std::vector<double> a(n), b(n);
    k::scalar::vgather(table.data(), idx.data(), a.data(), n);
    k::avx2::vgather(table.data(), idx.data(), b.data(), n);
    CHECK(bitwise_equal(a, b));

    auto p1 = random_values(n, n + 31, -1.0, 1.0);
    auto m1 = random_values(n, n + 32, -0.1, 0.1);
    auto v1 = random_values(n, n + 33, 0.0, 0.1);
    auto g = random_values(n, n + 34, -2.0, 2.0);
    auto p2 = p1;
    auto m2 = m1;
    auto v2 = v1;
    k::scalar::adam_step(p1.data(), m1.data(), v1.data(), g.data(), n, 1e-3, 0.99,
                         0.999, 1e-8, 1.7, 1.2);
    k::avx2::adam_step(p2.data(), m2.data(), v2.data(), g.data(), n, 1e-3, 0.99, 0.999,
                       1e-8, 1.7, 1.2);
    CHECK(bitwise_equal(p1, p2));
    CHECK(bitwise_equal(m1, m2));
    CHECK(bitwise_equal(v1, v2));
  }
}

TEST_CASE("avx2 reductions agree with scalar to rounding") {
  if (!k::avx2_supported()) return;
  for (std::size_t n : kSizes) {
    auto x = random_values(n, n + 41, -1.0, 1.0);
    auto y = random_values(n, n + 42, -1.0, 1.0);
    const double tol = 1e-12 * (1.0 + static_cast<double>(n));
    CHECK(std::abs(k::scalar::vsum(x.data(), n) - k::avx2::vsum(x.data(), n)) <= tol);
    CHECK(std::abs(k::scalar::vdot(x.data(), y.data(), n) -
                   k::avx2::vdot(x.data(), y.data(), n)) <= tol);
    CHECK(std::abs(k::scalar::vsumsq(x.data(), n) - k::avx2::vsumsq(x.data(), n)) <=
          tol);
  }
}
#endif

TEST_CASE("backend dispatch and override") {
  const k::Backend original = k::active_backend();
  k::set_backend(k::Backend::scalar);
  CHECK(k::active_backend() == k::Backend::scalar);
  double x = 1.0, out = 0.0;
  k::vexp(&x, &out, 1);
  CHECK(out == doctest::Approx(std::exp(1.0)));
  if (k::avx2_supported()) {
    k::set_backend(k::Backend::avx2);
    CHECK(k::active_backend() == k::Backend::avx2);
  }
  k::set_backend(original);
  CHECK(k::backend_name(k::Backend::scalar) == "scalar");
}
