#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fwnet/kernels.hpp"
#include "fwnet/rng.hpp"

using namespace fwnet;
namespace k = fwnet::kernels;

namespace {

std::vector<float> random_vec(Rng& rng, size_t n, float lo = -1.f, float hi = 1.f) {
  std::vector<float> v(n);
  for (auto& x : v) x = rng.uniform_f(lo, hi);
  return v;
}

// plain triple loop, the oracle for all gemm layouts
void gemm_oracle(int m, int n, int kk, const std::vector<float>& a, const std::vector<float>& b,
                 std::vector<float>& c, bool ta, bool tb, bool acc) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = acc ? c[static_cast<size_t>(i) * n + j] : 0.0;
      for (int p = 0; p < kk; ++p) {
        float av = ta ? a[static_cast<size_t>(p) * m + i] : a[static_cast<size_t>(i) * kk + p];
        float bv = tb ? b[static_cast<size_t>(j) * kk + p] : b[static_cast<size_t>(p) * n + j];
        s += static_cast<double>(av) * bv;
      }
      c[static_cast<size_t>(i) * n + j] = static_cast<float>(s);
    }
}

void check_close(const std::vector<float>& got, const std::vector<float>& want, float tol) {
  REQUIRE(got.size() == want.size());
  float worst = 0.f;
  for (size_t i = 0; i < got.size(); ++i) {
    float denom = std::max(1.f, std::fabs(want[i]));
    worst = std::max(worst, std::fabs(got[i] - want[i]) / denom);
  }
  CHECK(worst < tol);
}

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

}  // namespace

TEST_CASE("gemm variants match the triple-loop oracle on both backends") {
  Rng rng(42);
  BackendGuard guard;
  const std::vector<k::Backend> backends = k::avx2_supported()
                                               ? std::vector<k::Backend>{k::Backend::scalar,
                                                                         k::Backend::avx2}
                                               : std::vector<k::Backend>{k::Backend::scalar};
  for (auto backend : backends) {
    k::set_backend(backend);
    for (auto [m, n, kk] : {std::tuple{3, 70, 11}, {8, 96, 72}, {1, 33, 5}, {16, 129, 64},
                            {5, 32, 1}, {2, 8, 256}}) {
      auto a = random_vec(rng, static_cast<size_t>(m) * kk);
      auto b = random_vec(rng, static_cast<size_t>(kk) * n);
      auto at = random_vec(rng, static_cast<size_t>(kk) * m);
      auto bt = random_vec(rng, static_cast<size_t>(n) * kk);
      std::vector<float> c(static_cast<size_t>(m) * n), want(c.size());

      for (bool acc : {false, true}) {
        auto seed_c = random_vec(rng, c.size());
        c = seed_c;
        want = seed_c;
        k::sgemm_nn(m, n, kk, a.data(), b.data(), c.data(), acc);
        gemm_oracle(m, n, kk, a, b, want, false, false, acc);
        check_close(c, want, 1e-5f);

        c = seed_c;
        want = seed_c;
        k::sgemm_tn(m, n, kk, at.data(), b.data(), c.data(), acc);
        gemm_oracle(m, n, kk, at, b, want, true, false, acc);
        check_close(c, want, 1e-5f);

        c = seed_c;
        want = seed_c;
        k::sgemm_nt(m, n, kk, a.data(), bt.data(), c.data(), acc);
        gemm_oracle(m, n, kk, a, bt, want, false, true, acc);
        check_close(c, want, 1e-5f);
      }
    }
  }
}

TEST_CASE("avx2 and scalar backends agree elementwise") {
  if (!k::avx2_supported()) return;
  Rng rng(7);
  BackendGuard guard;

  SUBCASE("gemm") {
    const int m = 9, n = 203, kk = 37;
    auto a = random_vec(rng, static_cast<size_t>(m) * kk);
    auto b = random_vec(rng, static_cast<size_t>(kk) * n);
    std::vector<float> cs(static_cast<size_t>(m) * n), cv(cs.size());
    k::detail::sgemm_nn_scalar(m, n, kk, a.data(), b.data(), cs.data(), false);
    k::detail::sgemm_nn_avx2(m, n, kk, a.data(), b.data(), cv.data(), false);
    check_close(cv, cs, 1e-5f);
  }

  SUBCASE("elementwise ops are bitwise equal") {
    const size_t n = 1003;
    auto x = random_vec(rng, n);
    auto y = x;
    k::detail::relu_forward_scalar(x.data(), n);
    k::detail::relu_forward_avx2(y.data(), n);
    CHECK(x == y);

    auto g1 = random_vec(rng, n);
    auto g2 = g1;
    k::detail::relu_backward_scalar(x.data(), g1.data(), n);
    k::detail::relu_backward_avx2(y.data(), g2.data(), n);
    CHECK(g1 == g2);

    auto w1 = random_vec(rng, n), buf1 = random_vec(rng, n), grad = random_vec(rng, n);
    auto w2 = w1, buf2 = buf1;
    k::detail::sgd_momentum_update_scalar(w1.data(), buf1.data(), grad.data(), n, 0.01f, 0.9f);
    k::detail::sgd_momentum_update_avx2(w2.data(), buf2.data(), grad.data(), n, 0.01f, 0.9f);
    CHECK(w1 == w2);
    CHECK(buf1 == buf2);

    auto s1 = random_vec(rng, n);
    auto s2 = s1;
    k::detail::add_inplace_scalar(s1.data(), grad.data(), n);
    k::detail::add_inplace_avx2(s2.data(), grad.data(), n);
    CHECK(s1 == s2);
    k::detail::scale_inplace_scalar(s1.data(), 0.37f, n);
    k::detail::scale_inplace_avx2(s2.data(), 0.37f, n);
    CHECK(s1 == s2);
  }

  SUBCASE("warp forward agrees across backends") {
    for (auto [c, h, w] : {std::tuple{3, 17, 23}, {1, 5, 5}, {8, 32, 32}}) {
      auto src = random_vec(rng, static_cast<size_t>(c) * h * w);
      std::vector<float> flow(static_cast<size_t>(h) * w * 2);
      for (auto& f : flow) f = rng.uniform_f(-3.f, 3.f);
      std::vector<float> d1(src.size()), d2(src.size());
      k::detail::warp_forward_scalar(src.data(), c, h, w, flow.data(), d1.data());
      k::detail::warp_forward_avx2(src.data(), c, h, w, flow.data(), d2.data());
      for (size_t i = 0; i < d1.size(); ++i) CHECK(d1[i] == d2[i]);
    }
  }
}

TEST_CASE("backend selection") {
  BackendGuard guard;
  k::set_backend(k::Backend::scalar);
  CHECK(k::active_backend() == k::Backend::scalar);
  CHECK(std::string(k::backend_name(k::active_backend())) == "scalar");
  if (k::avx2_supported()) {
    k::set_backend(k::Backend::avx2);
    CHECK(k::active_backend() == k::Backend::avx2);
  }
}
