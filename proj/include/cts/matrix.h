// cts/matrix.h

// Copyright 2026  ctskit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef CTS_MATRIX_H_
#define CTS_MATRIX_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cts/base.h"

namespace cts {

/// Dense row-major matrix of doubles.  Used for log-likelihoods, posteriors,
/// gradients and alpha/beta tables.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  size_t NumRows() const { return rows_; }
  size_t NumCols() const { return cols_; }
  bool Empty() const { return data_.empty(); }

  double &operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> Row(size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> Row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> Data() { return data_; }
  std::span<const double> Data() const { return data_; }

  void Resize(size_t rows, size_t cols, double value = 0.0) {
    rows_ = rows;
    cols_ = cols;
    data_.assign(rows * cols, value);
  }
  void Fill(double value) { data_.assign(data_.size(), value); }

  bool SameShape(const Matrix &o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  /// this += alpha * other.
  void AddScaled(const Matrix &other, double alpha);

  friend bool operator==(const Matrix &a, const Matrix &b) = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

/// Row-wise softmax of a matrix of unnormalized log scores.
Matrix RowSoftmax(const Matrix &x);

/// Binary matrix format: little-endian uint64 rows, uint64 cols, then
/// rows*cols little-endian float64 values in row-major order.
void WriteMatrixBinary(const Matrix &m, std::ostream &os);
Matrix ReadMatrixBinary(std::istream &is);
void WriteMatrixBinaryFile(const Matrix &m, const std::string &path);
Matrix ReadMatrixBinaryFile(const std::string &path);

/// Text format: first line "rows cols", then one row per line.
void WriteMatrixText(const Matrix &m, std::ostream &os);
Matrix ReadMatrixText(std::istream &is);

}  // namespace cts

#endif  // CTS_MATRIX_H_
