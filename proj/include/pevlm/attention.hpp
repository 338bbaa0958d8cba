#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pevlm/mask.hpp"
#include "pevlm/matrix.hpp"

namespace pevlm {

// Split of the hidden dimension into attention heads.
struct HeadLayout {
  std::size_t num_heads = 1;
  std::size_t head_dim = 64;

  std::size_t hidden() const { return num_heads * head_dim; }
};

// Derives the head layout from a hidden size; errors when hidden is not a
// multiple of the head count.
inline HeadLayout make_head_layout(std::size_t hidden, std::size_t num_heads) {
  if (num_heads == 0 || hidden == 0 || hidden % num_heads != 0) {
    throw std::invalid_argument("hidden size not divisible by head count");
  }
  return HeadLayout{num_heads, hidden / num_heads};
}

namespace detail {

template <typename Real>
inline Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc = Real(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename Real>
inline void axpy(Real* out, const Real* v, std::size_t n, Real coef) {
  for (std::size_t i = 0; i < n; ++i) out[i] += coef * v[i];
}

// In-place max-subtracted softmax with an attention temperature. The same
// routine backs the dense oracle and the block engine so both sides see
// identical arithmetic.
template <typename Real>
void softmax_inplace(Real* logits, std::size_t n, Real temperature) {
  if (n == 0) throw std::invalid_argument("empty softmax row");
  if (!(temperature > Real(0))) {
    throw std::invalid_argument("softmax temperature must be > 0");
  }
  Real max_logit = logits[0];
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(static_cast<double>(logits[i]))) {
      throw std::invalid_argument("non-finite softmax input");
    }
    if (logits[i] > max_logit) max_logit = logits[i];
  }
  Real denom = Real(0);
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = std::exp((logits[i] - max_logit) / temperature);
    denom += logits[i];
  }
  Real inv = Real(1) / denom;
  for (std::size_t i = 0; i < n; ++i) logits[i] *= inv;
}

}  // namespace detail

// Max-subtracted softmax; entries sum to 1.
template <typename Real>
std::vector<Real> stable_softmax(std::span<const Real> logits, Real temperature) {
  std::vector<Real> out(logits.begin(), logits.end());
  detail::softmax_inplace(out.data(), out.size(), temperature);
  return out;
}

// Single-head scaled dot-product attention over an explicit boolean mask.
// Keys excluded by the mask never enter the softmax. Every query row must
// keep at least one allowed key.
template <typename Real>
MatrixT<Real> sdpa(const MatrixT<Real>& q, const MatrixT<Real>& k,
                   const MatrixT<Real>& v, const MaskSpec& mask,
                   Real temperature) {
  const std::size_t m = q.rows();
  const std::size_t n = k.rows();
  const std::size_t d = q.cols();
  if (k.cols() != d) throw std::invalid_argument("sdpa: K width mismatch");
  if (v.rows() != n) throw std::invalid_argument("sdpa: V row mismatch");
  if (mask.rows() != m || mask.cols() != n) {
    throw std::invalid_argument("sdpa: mask shape mismatch");
  }
  require_finite(q, "sdpa Q");
  require_finite(k, "sdpa K");
  require_finite(v, "sdpa V");

  const std::size_t dv = v.cols();
  const Real inv_sqrt_d = Real(1) / std::sqrt(Real(d));
  MatrixT<Real> out(m, dv);

  bool failed = false;
  std::string error;

#pragma omp parallel
  {
    std::vector<Real> logits;
    std::vector<std::size_t> keys;
#pragma omp for schedule(dynamic, 8)
    for (std::size_t r = 0; r < m; ++r) {
      if (failed) continue;
      logits.clear();
      keys.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (!mask.allowed(r, j)) continue;
        keys.push_back(j);
        logits.push_back(detail::dot(q.row(r), k.row(j), d) * inv_sqrt_d);
      }
      if (keys.empty()) {
#pragma omp critical
        {
          failed = true;
          error = "unattended query";
        }
        continue;
      }
      detail::softmax_inplace(logits.data(), logits.size(), temperature);
      Real* o = out.row(r);
      for (std::size_t i = 0; i < keys.size(); ++i) {
        detail::axpy(o, v.row(keys[i]), dv, logits[i]);
      }
    }
  }
  if (failed) throw std::invalid_argument(error);
  return out;
}

// Multi-head attention: contiguous head slices of the hidden dimension run
// through sdpa independently and are re-concatenated. No output projection.
template <typename Real>
MatrixT<Real> mha(const MatrixT<Real>& q, const MatrixT<Real>& k,
                  const MatrixT<Real>& v, const HeadLayout& heads,
                  const MaskSpec& mask, Real temperature) {
  const std::size_t hidden = heads.hidden();
  if (q.cols() != hidden || k.cols() != hidden || v.cols() != hidden) {
    throw std::invalid_argument("mha: hidden size mismatch");
  }
  if (k.rows() != v.rows()) throw std::invalid_argument("mha: K/V row mismatch");
  if (mask.rows() != q.rows() || mask.cols() != k.rows()) {
    throw std::invalid_argument("mha: mask shape mismatch");
  }
  require_finite(q, "mha Q");
  require_finite(k, "mha K");
  require_finite(v, "mha V");

  const std::size_t m = q.rows();
  const std::size_t n = k.rows();
  const std::size_t d = heads.head_dim;
  const Real inv_sqrt_d = Real(1) / std::sqrt(Real(d));
  MatrixT<Real> out(m, hidden);

  bool failed = false;
  std::string error;

#pragma omp parallel
  {
    std::vector<Real> logits;
    std::vector<std::size_t> keys;
#pragma omp for schedule(dynamic, 8)
    for (std::size_t r = 0; r < m; ++r) {
      if (failed) continue;
      keys.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (mask.allowed(r, j)) keys.push_back(j);
      }
      if (keys.empty()) {
#pragma omp critical
        {
          failed = true;
          error = "unattended query";
        }
        continue;
      }
      for (std::size_t h = 0; h < heads.num_heads; ++h) {
        const std::size_t off = h * d;
        logits.resize(keys.size());
        for (std::size_t i = 0; i < keys.size(); ++i) {
          logits[i] =
              detail::dot(q.row(r) + off, k.row(keys[i]) + off, d) * inv_sqrt_d;
        }
        detail::softmax_inplace(logits.data(), logits.size(), temperature);
        Real* o = out.row(r) + off;
        for (std::size_t i = 0; i < keys.size(); ++i) {
          detail::axpy(o, v.row(keys[i]) + off, d, logits[i]);
        }
      }
    }
  }
  if (failed) throw std::invalid_argument(error);
  return out;
}

}  // namespace pevlm
