#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pevlm/layout.hpp"
#include "pevlm/matrix.hpp"
#include "pevlm/method.hpp"

namespace pevlm {

// Per-token position identifier. Text tokens carry (p, p, p); visual tokens
// under the 3D scheme carry (temporal, height, width).
struct TokenPos {
  std::int64_t t = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  bool operator==(const TokenPos&) const = default;
};

// How the d/2 rotation pairs of a head split across the three axes.
struct MRopeSplit {
  std::size_t temporal_pairs = 0;
  std::size_t height_pairs = 0;
  std::size_t width_pairs = 0;

  std::size_t total_pairs() const {
    return temporal_pairs + height_pairs + width_pairs;
  }

  // Roughly 2:1:1 over d/2 pairs, every section non-empty.
  static MRopeSplit default_for(std::size_t head_dim) {
    if (head_dim % 2 != 0) {
      throw std::invalid_argument("rotary head dim must be even");
    }
    std::size_t pairs = head_dim / 2;
    if (pairs < 3) {
      throw std::invalid_argument("3D rotary needs at least 6 head dims");
    }
    std::size_t h = std::max<std::size_t>(1, pairs / 4);
    std::size_t w = std::max<std::size_t>(1, pairs / 4);
    return MRopeSplit{pairs - h - w, h, w};
  }
};

struct PositionMap {
  PositionMode mode = PositionMode::kSequential;
  RopeScheme scheme = RopeScheme::kRope1D;
  double rope_base = 10000.0;
  std::vector<TokenPos> ids;
  // Scalar id a decode token after the prefill would receive.
  std::int64_t next_id = 0;

  std::span<const TokenPos> slice(const TokenRange& r) const {
    return {ids.data() + r.begin, r.size()};
  }
};

PositionMap assign_positions(const BlockPartition& part,
                             const SequenceLayout& layout, PositionMode mode,
                             RopeScheme scheme, double rope_base = 10000.0,
                             std::size_t grid_h = 0, std::size_t grid_w = 0);

namespace detail {

// Rotates consecutive coordinate pairs of each row in place. `split` selects
// which axis position drives each pair slot; null means 1D (all pairs use t).
// Angles are evaluated in double regardless of Real.
template <typename Real>
void rotate_rows(Real* data, std::size_t row_stride, std::size_t n_rows,
                 std::size_t d, std::span<const TokenPos> pos,
                 const MRopeSplit* split, double rope_base) {
  if (d % 2 != 0) throw std::invalid_argument("rotary width must be even");
  if (pos.size() != n_rows) {
    throw std::invalid_argument("position map does not cover the rows");
  }
  const std::size_t pairs = d / 2;
  if (split && split->total_pairs() != pairs) {
    throw std::invalid_argument("rotary split does not cover the head dim");
  }
  std::vector<double> inv_freq(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    inv_freq[i] = std::pow(rope_base, -2.0 * static_cast<double>(i) /
                                          static_cast<double>(d));
  }
  for (std::size_t r = 0; r < n_rows; ++r) {
    Real* row = data + r * row_stride;
    for (std::size_t i = 0; i < pairs; ++i) {
      double p;
      if (!split) {
        p = static_cast<double>(pos[r].t);
      } else if (i < split->temporal_pairs) {
        p = static_cast<double>(pos[r].t);
      } else if (i < split->temporal_pairs + split->height_pairs) {
        p = static_cast<double>(pos[r].h);
      } else {
        p = static_cast<double>(pos[r].w);
      }
      const double angle = p * inv_freq[i];
      const Real c = static_cast<Real>(std::cos(angle));
      const Real s = static_cast<Real>(std::sin(angle));
      const Real x = row[2 * i];
      const Real y = row[2 * i + 1];
      row[2 * i] = x * c - y * s;
      row[2 * i + 1] = x * s + y * c;
    }
  }
}

}  // namespace detail

// 1D rotary embedding over the full matrix width.
template <typename Real>
MatrixT<Real> apply_rope(const MatrixT<Real>& x, std::span<const TokenPos> pos,
                         double rope_base = 10000.0) {
  MatrixT<Real> out = x;
  detail::rotate_rows(out.data().data(), out.cols(), out.rows(), out.cols(),
                      pos, nullptr, rope_base);
  return out;
}

// 3D rotary embedding: pair slots split across temporal/height/width axes.
template <typename Real>
MatrixT<Real> apply_mrope3d(const MatrixT<Real>& x,
                            std::span<const TokenPos> pos,
                            const MRopeSplit& split,
                            double rope_base = 10000.0) {
  MatrixT<Real> out = x;
  detail::rotate_rows(out.data().data(), out.cols(), out.rows(), out.cols(),
                      pos, &split, rope_base);
  return out;
}

}  // namespace pevlm
