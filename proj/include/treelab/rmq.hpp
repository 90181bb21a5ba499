#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace treelab {

// Sparse-table range minimum over a fixed array of doubles.
// O(n log n) build, O(1) query. Ties resolve to the smaller index so that
// repeated queries are stable.
class SparseRmq {
 public:
  SparseRmq() = default;

  explicit SparseRmq(const std::vector<double>& values) : vals_(values) {
    const std::size_t n = vals_.size();
    if (n == 0) throw std::invalid_argument("SparseRmq: empty array");
    levels_ = 1;
    while ((std::size_t{1} << levels_) <= n) ++levels_;
    idx_.resize(levels_ * n);
    for (std::size_t i = 0; i < n; ++i) idx_[i] = static_cast<std::uint32_t>(i);
    for (std::size_t k = 1; k < levels_; ++k) {
      const std::size_t half = std::size_t{1} << (k - 1);
      const std::size_t span = half << 1;
      std::uint32_t* cur = idx_.data() + k * n;
      const std::uint32_t* prev = idx_.data() + (k - 1) * n;
      for (std::size_t i = 0; i + span <= n; ++i) {
        const std::uint32_t a = prev[i];
        const std::uint32_t b = prev[i + half];
        cur[i] = (vals_[b] < vals_[a]) ? b : a;
      }
    }
  }

  bool empty() const { return vals_.empty(); }
  std::size_t size() const { return vals_.size(); }
  double value(std::size_t i) const { return vals_[i]; }

  // argmin over the closed index range [lo, hi]
  std::size_t argmin(std::size_t lo, std::size_t hi) const {
    if (lo > hi || hi >= vals_.size())
      throw std::out_of_range("SparseRmq::argmin: bad range");
    const std::size_t len = hi - lo + 1;
    const std::size_t k = log2_floor(len);
    const std::uint32_t a = idx_[k * vals_.size() + lo];
    const std::uint32_t b = idx_[k * vals_.size() + hi + 1 - (std::size_t{1} << k)];
    if (vals_[b] < vals_[a]) return b;
    return (a <= b) ? a : b;
  }

  double min_value(std::size_t lo, std::size_t hi) const {
    return vals_[argmin(lo, hi)];
  }

 private:
  static std::size_t log2_floor(std::size_t x) {
    std::size_t k = 0;
    while ((std::size_t{2} << k) <= x) ++k;
    return k;
  }
  std::vector<double> vals_;
  std::vector<std::uint32_t> idx_;
  std::size_t levels_ = 0;
};

}  // namespace treelab
