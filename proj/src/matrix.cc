// src/matrix.cc

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

#include "cts/matrix.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

namespace cts {

static_assert(std::endian::native == std::endian::little,
              "binary matrix I/O assumes a little-endian host");

void Matrix::AddScaled(const Matrix &other, double alpha) {
  if (!SameShape(other))
    ThrowError("AddScaled: shape mismatch ", rows_, "x", cols_, " vs ",
               other.rows_, "x", other.cols_);
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
}

Matrix RowSoftmax(const Matrix &x) {
  Matrix out(x.NumRows(), x.NumCols());
  for (size_t t = 0; t < x.NumRows(); ++t) {
    auto in = x.Row(t);
    auto row = out.Row(t);
    double lse = LogSumExp(in);
    for (size_t s = 0; s < in.size(); ++s) row[s] = std::exp(in[s] - lse);
  }
  return out;
}

void WriteMatrixBinary(const Matrix &m, std::ostream &os) {
  uint64_t header[2] = {m.NumRows(), m.NumCols()};
  os.write(reinterpret_cast<const char *>(header), sizeof(header));
  auto data = m.Data();
  os.write(reinterpret_cast<const char *>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!os) ThrowError("failed writing binary matrix");
}

Matrix ReadMatrixBinary(std::istream &is) {
  uint64_t header[2];
  if (!is.read(reinterpret_cast<char *>(header), sizeof(header)))
    ThrowError("truncated binary matrix header");
  Matrix m(header[0], header[1]);
  auto data = m.Data();
  if (!is.read(reinterpret_cast<char *>(data.data()),
               static_cast<std::streamsize>(data.size() * sizeof(double))))
    ThrowError("truncated binary matrix body (expected ", header[0], "x",
               header[1], ")");
  return m;
}

void WriteMatrixBinaryFile(const Matrix &m, const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) ThrowError("cannot open ", path, " for writing");
  WriteMatrixBinary(m, os);
}

Matrix ReadMatrixBinaryFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) ThrowError("cannot open ", path);
  return ReadMatrixBinary(is);
}

void WriteMatrixText(const Matrix &m, std::ostream &os) {
  os << m.NumRows() << ' ' << m.NumCols() << '\n';
  os << std::setprecision(17);
  for (size_t r = 0; r < m.NumRows(); ++r) {
    auto row = m.Row(r);
    for (size_t c = 0; c < row.size(); ++c) os << (c ? " " : "") << row[c];
    os << '\n';
  }
}

Matrix ReadMatrixText(std::istream &is) {
  size_t rows = 0, cols = 0;
  if (!(is >> rows >> cols)) ThrowError("bad text matrix header");
  Matrix m(rows, cols);
  for (auto &v : m.Data())
    if (!(is >> v)) ThrowError("truncated text matrix");
  return m;
}

}  // namespace cts
