#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "pevlm/attention.hpp"
#include "pevlm/reference.hpp"
#include "pevlm/synth.hpp"

using namespace pevlm;

namespace {

Matrix to32(const Matrix64& src) {
  Matrix m(src.rows(), src.cols());
  for (std::size_t i = 0; i < src.data().size(); ++i) {
    m.data()[i] = static_cast<float>(src.data()[i]);
  }
  return m;
}

}  // namespace

TEST_CASE("stable_softmax: single element is 1") {
  std::vector<float> logits{42.0f};
  auto p = stable_softmax<float>(logits, 1.0f);
  REQUIRE(p.size() == 1);
  CHECK(p[0] == doctest::Approx(1.0));
}

TEST_CASE("stable_softmax: equal logits split evenly") {
  std::vector<float> logits{3.0f, 3.0f};
  auto p = stable_softmax<float>(logits, 1.0f);
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
}

TEST_CASE("stable_softmax: closed-form 1:3 ratio") {
  std::vector<float> logits{0.0f, std::log(3.0f)};
  auto p = stable_softmax<float>(logits, 1.0f);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("stable_softmax: empty and non-finite inputs rejected") {
  std::vector<float> empty;
  CHECK_THROWS_WITH_AS(stable_softmax<float>(empty, 1.0f), "empty softmax row",
                       std::invalid_argument);
  std::vector<float> bad{1.0f, std::numeric_limits<float>::infinity()};
  CHECK_THROWS_AS(stable_softmax<float>(bad, 1.0f), std::invalid_argument);
  std::vector<float> ok{1.0f};
  CHECK_THROWS_AS(stable_softmax<float>(ok, 0.0f), std::invalid_argument);
}

TEST_CASE("stable_softmax: rows sum to one across temperatures") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-30.0, 30.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng() % 50;
    std::vector<float> logits(n);
    for (float& v : logits) v = static_cast<float>(dist(rng));
    for (float temp : {0.1f, 1.0f, 7.0f}) {
      auto p = stable_softmax<float>(logits, temp);
      double sum = 0.0;
      for (float w : p) sum += w;
      CHECK(std::fabs(sum - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("stable_softmax: shift invariance within float drift") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> dist(-5.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n = 1 + rng() % 20;
    float shift = static_cast<float>(dist(rng));
    std::vector<float> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<float>(dist(rng));
      b[i] = a[i] + shift;
    }
    auto pa = stable_softmax<float>(a, 2.0f);
    auto pb = stable_softmax<float>(b, 2.0f);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::fabs(double(pa[i]) - double(pb[i])) <= 1e-6);
    }
  }
}

TEST_CASE("sdpa: one key passes its value through") {
  Matrix q(1, 1), k(1, 1), v(1, 1);
  q.at(0, 0) = 1.0f;
  k.at(0, 0) = 0.0f;
  v.at(0, 0) = 7.0f;
  Matrix out = sdpa(q, k, v, MaskSpec::full(1, 1), 1.0f);
  CHECK(out.at(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("sdpa: closed-form softmax weights 0.25/0.75") {
  Matrix q(1, 1), k(2, 1), v(2, 1);
  q.at(0, 0) = 1.0f;
  k.at(0, 0) = 0.0f;
  k.at(1, 0) = std::log(3.0f);
  v.at(0, 0) = 1.0f;
  v.at(1, 0) = 5.0f;
  Matrix out = sdpa(q, k, v, MaskSpec::full(1, 2), 1.0f);
  CHECK(out.at(0, 0) == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("sdpa: random causal case matches the serial reference") {
  std::mt19937_64 rng(13);
  Matrix q = to32(random_matrix(rng, 8, 8));
  Matrix k = to32(random_matrix(rng, 8, 8));
  Matrix v = to32(random_matrix(rng, 8, 8));
  MaskSpec causal = MaskSpec::causal(8);
  Matrix fast = sdpa(q, k, v, causal, 1.0f);
  Matrix slow = ref::sdpa(q, k, v, causal, 1.0f);
  CHECK(max_abs_diff(fast, slow) <= 1e-6);
}

TEST_CASE("sdpa: all-true mask equals the unmasked formula") {
  std::mt19937_64 rng(14);
  const std::size_t m = 12, n = 10, d = 6;
  Matrix q = to32(random_matrix(rng, m, d));
  Matrix k = to32(random_matrix(rng, n, d));
  Matrix v = to32(random_matrix(rng, n, d));
  Matrix masked = sdpa(q, k, v, MaskSpec::full(m, n), 1.0f);

  // direct softmax(QK^T / sqrt(d)) V evaluation
  for (std::size_t r = 0; r < m; ++r) {
    std::vector<double> logits(n);
    double max_logit = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        s += double(q.at(r, c)) * double(k.at(j, c));
      }
      logits[j] = s / std::sqrt(double(d));
      max_logit = std::max(max_logit, logits[j]);
    }
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - max_logit);
    for (std::size_t c = 0; c < d; ++c) {
      double want = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        want += std::exp(logits[j] - max_logit) / denom * double(v.at(j, c));
      }
      CHECK(std::fabs(want - double(masked.at(r, c))) <= 1e-6);
    }
  }
}

TEST_CASE("sdpa: a row with no allowed keys is rejected") {
  Matrix q(2, 2), k(2, 2), v(2, 2);
  MaskSpec mask(2, 2);
  mask.set(0, 0);
  CHECK_THROWS_WITH_AS(sdpa(q, k, v, mask, 1.0f), "unattended query",
                       std::invalid_argument);
}

TEST_CASE("sdpa: outputs are convex combinations of allowed values") {
  std::mt19937_64 rng(15);
  const std::size_t m = 16, n = 16, d = 4;
  Matrix q = to32(random_matrix(rng, m, d));
  Matrix k = to32(random_matrix(rng, n, d));
  Matrix v = to32(random_matrix(rng, n, d));
  MaskSpec mask = MaskSpec::causal(n);
  Matrix out = sdpa(q, k, v, mask, 0.7f);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      double lo = 1e300, hi = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        if (!mask.allowed(r, j)) continue;
        lo = std::min(lo, double(v.at(j, c)));
        hi = std::max(hi, double(v.at(j, c)));
      }
      CHECK(double(out.at(r, c)) >= lo - 1e-6);
      CHECK(double(out.at(r, c)) <= hi + 1e-6);
    }
  }
}

TEST_CASE("mha: one head is exactly sdpa") {
  std::mt19937_64 rng(16);
  Matrix q = to32(random_matrix(rng, 6, 8));
  Matrix k = to32(random_matrix(rng, 6, 8));
  Matrix v = to32(random_matrix(rng, 6, 8));
  MaskSpec mask = MaskSpec::causal(6);
  Matrix a = mha(q, k, v, HeadLayout{1, 8}, mask, 1.0f);
  Matrix b = sdpa(q, k, v, mask, 1.0f);
  CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("mha: identical heads produce identical slices") {
  std::mt19937_64 rng(17);
  Matrix64 src = random_matrix(rng, 5, 1);
  Matrix q(5, 2), k(5, 2), v(5, 2);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t h = 0; h < 2; ++h) {
      q.at(r, h) = static_cast<float>(src.at(r, 0));
      k.at(r, h) = static_cast<float>(src.at(r, 0)) * 0.5f;
      v.at(r, h) = static_cast<float>(src.at(r, 0)) - 0.25f;
    }
  }
  Matrix out = mha(q, k, v, HeadLayout{2, 1}, MaskSpec::causal(5), 1.0f);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(out.at(r, 0) == out.at(r, 1));
  }
}

TEST_CASE("mha: four heads match a per-head sdpa loop") {
  std::mt19937_64 rng(18);
  const std::size_t n = 16, h = 4, d = 4;
  Matrix q = to32(random_matrix(rng, n, h * d));
  Matrix k = to32(random_matrix(rng, n, h * d));
  Matrix v = to32(random_matrix(rng, n, h * d));
  MaskSpec mask = MaskSpec::causal(n);
  Matrix fused = mha(q, k, v, HeadLayout{h, d}, mask, 1.0f);
  for (std::size_t head = 0; head < h; ++head) {
    Matrix qh(n, d), kh(n, d), vh(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        qh.at(r, c) = q.at(r, head * d + c);
        kh.at(r, c) = k.at(r, head * d + c);
        vh.at(r, c) = v.at(r, head * d + c);
      }
    }
    Matrix oh = sdpa(qh, kh, vh, mask, 1.0f);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        CHECK(std::fabs(oh.at(r, c) - fused.at(r, head * d + c)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("mha: hidden size must divide into heads") {
  CHECK_THROWS_AS(make_head_layout(10, 3), std::invalid_argument);
  CHECK(make_head_layout(12, 3).head_dim == 4);
}

TEST_CASE("mha: 32-bit mode tracks the 64-bit oracle") {
  std::mt19937_64 rng(19);
  const std::size_t n = 96, h = 2, d = 16;
  Matrix64 q64 = random_matrix(rng, n, h * d);
  Matrix64 k64 = random_matrix(rng, n, h * d);
  Matrix64 v64 = random_matrix(rng, n, h * d);
  MaskSpec mask = MaskSpec::causal(n);
  Matrix64 wide = mha(q64, k64, v64, HeadLayout{h, d}, mask, 1.0);
  Matrix narrow =
      mha(to32(q64), to32(k64), to32(v64), HeadLayout{h, d}, mask, 1.0f);
  CHECK(max_abs_diff(wide, narrow) <= 1e-5);
}
