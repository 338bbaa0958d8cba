#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pevlm/engine.hpp"
#include "pevlm/matrix.hpp"

namespace pevlm {

// Seeded random projected states. Values are drawn in double and cast, so
// the 32- and 64-bit pipelines see the same inputs for a given seed.
inline Matrix64 random_matrix(std::mt19937_64& rng, std::size_t rows,
                              std::size_t cols) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix64 m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

template <typename Real>
std::vector<LayerStates<Real>> random_states(std::uint64_t seed,
                                             std::size_t tokens,
                                             std::size_t hidden,
                                             std::size_t layers) {
  std::mt19937_64 rng(seed);
  std::vector<LayerStates<Real>> states(layers);
  for (LayerStates<Real>& s : states) {
    for (MatrixT<Real>* m : {&s.q, &s.k, &s.v}) {
      Matrix64 src = random_matrix(rng, tokens, hidden);
      *m = MatrixT<Real>(tokens, hidden);
      for (std::size_t i = 0; i < src.data().size(); ++i) {
        m->data()[i] = static_cast<Real>(src.data()[i]);
      }
    }
  }
  return states;
}

}  // namespace pevlm
