#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace dsm {

// Dense n×n matrix of doubles, row-major.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0)
      : n_(n), values_(n * n, fill) {}
  SquareMatrix(std::size_t n, std::vector<double> values)
      : n_(n), values_(std::move(values)) {
    assert(values_.size() == n_ * n_);
  }

  std::size_t size() const noexcept { return n_; }

  double& operator()(std::size_t i, std::size_t j) {
    return values_[i * n_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return values_[i * n_ + j];
  }

  std::span<double> row(std::size_t i) {
    return {values_.data() + i * n_, n_};
  }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * n_, n_};
  }

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

}  // namespace dsm
