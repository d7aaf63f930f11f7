// cts/onebit-sgd.h

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


#ifndef CTS_ONEBIT_SGD_H_
#define CTS_ONEBIT_SGD_H_

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "cts/matrix.h"

namespace cts {

/// Sign bits plus per-column reconstruction values.  Entry (r, c) decodes to
/// pos_scale[c] if its bit is set and to -neg_scale[c] otherwise.
struct QuantizedGradient {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<uint8_t> bits;  // row-major, packed 8 per byte
  std::vector<double> pos_scale;
  std::vector<double> neg_scale;

  bool Bit(size_t r, size_t c) const {
    size_t i = r * cols + c;
    return (bits[i >> 3] >> (i & 7)) & 1;
  }
  Matrix Dequantize() const;

  /// Bytes on the wire: the packed bits plus two float64 scales per column.
  size_t WireBytes() const;
  /// 1 + 128 / rows.
  double BitsPerEntry() const;
};

/// Quantizes a = g + residual: bit = (a >= 0), scales are the per-column
/// means of the positive entries and of the magnitudes of the negative ones
/// (0 when there are none).  On return residual = a - Dequantize().  With
/// error_feedback false the incoming residual is ignored and left at zero.
QuantizedGradient Quantize(const Matrix &g, Matrix *residual,
                           bool error_feedback = true);

/// Sum of the dequantized gradients, added in the given order.
Matrix Aggregate(std::span<const QuantizedGradient> parts);

/// Dense float32 exchange of the same matrix, for comparison.
inline size_t DenseWireBytes(size_t rows, size_t cols) {
  return rows * cols * 4;
}

/// Least squares: loss(x) = 1/(2n) sum_i (a_i . x - b_i)^2, x is dim x 1.
class LsqProblem {
 public:
  LsqProblem(Matrix a, std::vector<double> b);

  size_t Dim() const { return a_.NumCols(); }
  size_t NumSamples() const { return a_.NumRows(); }

  double Loss(const Matrix &x) const;
  double Loss(const Matrix &x, std::span<const size_t> samples) const;
  /// Summed (not averaged) gradient over the given samples.
  Matrix Gradient(const Matrix &x, std::span<const size_t> samples) const;

 private:
  Matrix a_;
  std::vector<double> b_;
};

/// Gaussian rows, b = A x* + noise.
LsqProblem MakeLsqProblem(size_t dim, size_t samples, uint64_t seed,
                          double noise = 0.1);

struct SgdOptions {
  int workers = 4;
  int steps = 2000;
  size_t minibatch = 64;        // samples per update, split over workers
  double learning_rate = 0.001;  // per sample; gradients are summed
  bool quantize = true;
  bool error_feedback = true;
  uint64_t seed = 7;
  int num_threads = 1;
  // Automatic minibatch scaling.
  bool auto_minibatch = false;
  int auto_interval = 500;  // steps between probes
  size_t max_minibatch = 1024;
};

/// Replicas, residuals and sample cursors of the simulated workers.
struct WorkerPool {
  std::vector<Matrix> replicas;
  std::vector<Matrix> residuals;
  std::vector<std::vector<size_t>> shards;
  std::vector<size_t> cursors;
  size_t minibatch = 0;

  WorkerPool(const LsqProblem &p, const SgdOptions &opts);
  /// Throws unless every replica is byte-identical to the first.
  void CheckReplicas() const;
};

/// One synchronous update; returns the bytes sent by the workers.
uint64_t SgdStep(const LsqProblem &p, WorkerPool &pool,
                 const SgdOptions &opts);

struct AutoMinibatchOptions {
  int probe_updates = 200;
  double tolerance = 0.01;
};

/// Runs probe_updates updates from a copy of `pool` for every candidate size
/// (ascending, current size first) on the probe samples, and returns the
/// largest size whose probe loss is within (1 + tolerance) of the first
/// candidate's.  A probe that diverges never qualifies.  `pool` is not
/// modified.
size_t AutoMinibatch(const LsqProblem &p, const WorkerPool &pool,
                     std::span<const size_t> probe,
                     std::span<const size_t> candidates,
                     const SgdOptions &opts,
                     const AutoMinibatchOptions &aopts = {});

struct TraceRow {
  int step = 0;
  double loss = 0.0;
  uint64_t bytes_exchanged = 0;  // cumulative
  size_t minibatch_size = 0;
};

struct SgdTrace {
  std::vector<TraceRow> rows;
  Matrix params;
  double final_loss = 0.0;
  uint64_t bytes_exchanged = 0;
  uint64_t dense_bytes = 0;  // what float32 exchange would have cost
};

inline constexpr double kDivergenceLoss = 1e6;

/// Full simulation; throws with the step index if the loss exceeds
/// kDivergenceLoss.
SgdTrace SimTrain(const LsqProblem &p, const SgdOptions &opts);

/// CSV with header `step,loss,bytes_exchanged,minibatch_size`.
void WriteTraceCsv(const SgdTrace &t, std::ostream &os);

}  // namespace cts

#endif  // CTS_ONEBIT_SGD_H_
