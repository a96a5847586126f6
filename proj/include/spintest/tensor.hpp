#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <span>
#include <vector>

#include "spintest/error.hpp"

namespace spintest {

/// Dense row-major matrix. Shape is fixed at construction.
template <typename T>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat from_rows(const std::vector<std::vector<T>>& rows) {
    if (rows.empty()) return Mat{};
    Mat m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_) throw contract_error("Mat::from_rows: ragged rows");
      for (std::size_t c = 0; c < m.cols_; ++c) m(r, c) = rows[r][c];
    }
    return m;
  }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Logical binary value: exactly -1 or +1.
using Bit = std::int8_t;

using RealVec = std::vector<double>;
using RealMat = Mat<double>;
using BitVec = std::vector<Bit>;
using BitMat = Mat<Bit>;

/// sign with sign(0) = +1; total on the binary alphabet.
inline Bit sign_bit(double z) { return z >= 0.0 ? Bit{1} : Bit{-1}; }

inline bool is_binary(std::span<const Bit> v) {
  for (Bit b : v)
    if (b != 1 && b != -1) return false;
  return true;
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw contract_error("mean_of: empty input");
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

/// Population variance (1/n). Two-pass with origin shift, so a run of
/// bit-identical values yields exactly 0.0.
inline double population_variance(std::span<const double> xs) {
  if (xs.empty()) throw contract_error("population_variance: empty input");
  const double origin = xs[0];
  double m = 0.0;
  for (double x : xs) m += x - origin;
  m /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (double x : xs) {
    const double d = (x - origin) - m;
    acc += d * d;
  }
  return acc / static_cast<double>(xs.size());
}

inline double population_std(std::span<const double> xs) {
  return std::sqrt(population_variance(xs));
}

}  // namespace spintest
