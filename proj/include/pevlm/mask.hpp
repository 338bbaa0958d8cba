#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pevlm {

// Dense boolean attention mask, one bit per (query, key) pair.
// rows = queries, cols = keys.
class MaskSpec {
 public:
  MaskSpec() = default;
  MaskSpec(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), words_per_row_((cols + 63) / 64),
        bits_(rows * words_per_row_, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool allowed(std::size_t r, std::size_t c) const {
    return (word(r, c) >> (c & 63)) & 1u;
  }

  void set(std::size_t r, std::size_t c, bool value = true) {
    std::uint64_t m = std::uint64_t(1) << (c & 63);
    if (value) {
      word(r, c) |= m;
    } else {
      word(r, c) &= ~m;
    }
  }

  // Allows keys [begin, end) for query row r.
  void set_range(std::size_t r, std::size_t begin, std::size_t end) {
    if (end > cols_) throw std::out_of_range("MaskSpec::set_range");
    for (std::size_t c = begin; c < end && (c & 63); ++c) set(r, c);
    std::size_t c = (begin + 63) & ~std::size_t(63);
    for (; c + 64 <= end; c += 64) {
      bits_[r * words_per_row_ + c / 64] = ~std::uint64_t(0);
    }
    for (; c < end; ++c) set(r, c);
  }

  void flip(std::size_t r, std::size_t c) {
    word(r, c) ^= std::uint64_t(1) << (c & 63);
  }

  std::size_t count_allowed() const {
    std::size_t n = 0;
    for (std::uint64_t w : bits_) n += std::popcount(w);
    return n;
  }

  std::size_t row_allowed_count(std::size_t r) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < words_per_row_; ++i) {
      n += std::popcount(bits_[r * words_per_row_ + i]);
    }
    return n;
  }

  static MaskSpec full(std::size_t rows, std::size_t cols) {
    MaskSpec m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) m.set_range(r, 0, cols);
    return m;
  }

  // Lower-triangular mask including the diagonal.
  static MaskSpec causal(std::size_t n) {
    MaskSpec m(n, n);
    for (std::size_t r = 0; r < n; ++r) m.set_range(r, 0, r + 1);
    return m;
  }

  bool operator==(const MaskSpec& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && bits_ == o.bits_;
  }

 private:
  std::uint64_t& word(std::size_t r, std::size_t c) {
    return bits_[r * words_per_row_ + c / 64];
  }
  std::uint64_t word(std::size_t r, std::size_t c) const {
    return bits_[r * words_per_row_ + c / 64];
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> bits_;
};

}  // namespace pevlm
