#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dd {

// Dense row-major matrix of doubles. All model math runs in double precision;
// 32-bit floats only appear at the embedding-cache boundary.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  void fill(double v);
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
};

// Gathers the listed rows of `m` into a new matrix.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx);

// FNV-1a over the raw bytes of a sequence of doubles.
std::uint64_t hash_doubles(std::span<const double> values, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace dd
