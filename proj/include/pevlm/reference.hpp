#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pevlm/attention.hpp"
#include "pevlm/mask.hpp"
#include "pevlm/matrix.hpp"

// Serial reference attention. Deliberately naive: two explicit passes per
// query row, no parallelism, no shared helpers with the production kernels.
// Tests verify the OpenMP kernels against this path, and the kernel
// benchmark compares their wall times.
namespace pevlm::ref {

template <typename Real>
MatrixT<Real> sdpa(const MatrixT<Real>& q, const MatrixT<Real>& k,
                   const MatrixT<Real>& v, const MaskSpec& mask,
                   Real temperature) {
  const std::size_t m = q.rows();
  const std::size_t n = k.rows();
  const std::size_t d = q.cols();
  MatrixT<Real> out(m, v.cols());

  for (std::size_t r = 0; r < m; ++r) {
    // pass 1: scaled logits for allowed keys, tracking the max
    std::vector<double> logits(n, 0.0);
    std::vector<bool> on(n, false);
    double max_logit = -HUGE_VAL;
    std::size_t allowed = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask.allowed(r, j)) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        s += static_cast<double>(q.at(r, c)) * static_cast<double>(k.at(j, c));
      }
      s /= std::sqrt(static_cast<double>(d));
      logits[j] = s;
      on[j] = true;
      ++allowed;
      if (s > max_logit) max_logit = s;
    }
    if (allowed == 0) throw std::invalid_argument("unattended query");

    // pass 2: normalized weights, then the value combination
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (on[j]) denom += std::exp((logits[j] - max_logit) / temperature);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!on[j]) continue;
      double w = std::exp((logits[j] - max_logit) / temperature) / denom;
      for (std::size_t c = 0; c < v.cols(); ++c) {
        out.at(r, c) += static_cast<Real>(w * static_cast<double>(v.at(j, c)));
      }
    }
  }
  return out;
}

// Per-head loop around ref::sdpa.
template <typename Real>
MatrixT<Real> mha(const MatrixT<Real>& q, const MatrixT<Real>& k,
                  const MatrixT<Real>& v, const HeadLayout& heads,
                  const MaskSpec& mask, Real temperature) {
  const std::size_t d = heads.head_dim;
  MatrixT<Real> out(q.rows(), heads.hidden());
  for (std::size_t h = 0; h < heads.num_heads; ++h) {
    MatrixT<Real> qh(q.rows(), d), kh(k.rows(), d), vh(v.rows(), d);
    for (std::size_t r = 0; r < q.rows(); ++r) {
      for (std::size_t c = 0; c < d; ++c) qh.at(r, c) = q.at(r, h * d + c);
    }
    for (std::size_t r = 0; r < k.rows(); ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        kh.at(r, c) = k.at(r, h * d + c);
        vh.at(r, c) = v.at(r, h * d + c);
      }
    }
    MatrixT<Real> oh = ref::sdpa(qh, kh, vh, mask, temperature);
    for (std::size_t r = 0; r < out.rows(); ++r) {
      for (std::size_t c = 0; c < d; ++c) out.at(r, h * d + c) = oh.at(r, c);
    }
  }
  return out;
}

}  // namespace pevlm::ref
