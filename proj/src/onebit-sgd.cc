// src/onebit-sgd.cc

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


#include "cts/onebit-sgd.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "cts/base.h"
#include "cts/parallel.h"
#include "cts/text-util.h"

namespace cts {

Matrix QuantizedGradient::Dequantize() const {
  Matrix out(rows, cols);
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c)
      out(r, c) = Bit(r, c) ? pos_scale[c] : -neg_scale[c];
  return out;
}

size_t QuantizedGradient::WireBytes() const {
  return (rows * cols + 7) / 8 + 2 * sizeof(double) * cols;
}

double QuantizedGradient::BitsPerEntry() const {
  return 8.0 * static_cast<double>(WireBytes() - (rows * cols + 7) / 8) /
             static_cast<double>(rows * cols) +
         1.0;
}

QuantizedGradient Quantize(const Matrix &g, Matrix *residual,
                           bool error_feedback) {
  CTS_ASSERT(residual != nullptr);
  if (residual->Empty()) residual->Resize(g.NumRows(), g.NumCols());
  if (!g.SameShape(*residual))
    ThrowError("Quantize: gradient ", g.NumRows(), "x", g.NumCols(),
               " vs residual ", residual->NumRows(), "x",
               residual->NumCols());
  const size_t R = g.NumRows(), C = g.NumCols();
  Matrix a = g;
  if (error_feedback) a.AddScaled(*residual, 1.0);
  for (double v : a.Data())
    if (!std::isfinite(v)) ThrowError("Quantize: non-finite gradient entry");
  QuantizedGradient q;
  q.rows = R;
  q.cols = C;
  q.bits.assign((R * C + 7) / 8, 0);
  q.pos_scale.assign(C, 0.0);
  q.neg_scale.assign(C, 0.0);
  std::vector<size_t> npos(C, 0), nneg(C, 0);
  for (size_t r = 0; r < R; ++r)
    for (size_t c = 0; c < C; ++c) {
      double v = a(r, c);
      if (v >= 0.0) {
        size_t i = r * C + c;
        q.bits[i >> 3] |= static_cast<uint8_t>(1u << (i & 7));
        q.pos_scale[c] += v;
        ++npos[c];
      } else {
        q.neg_scale[c] -= v;
        ++nneg[c];
      }
    }
  for (size_t c = 0; c < C; ++c) {
    if (npos[c]) q.pos_scale[c] /= static_cast<double>(npos[c]);
    if (nneg[c]) q.neg_scale[c] /= static_cast<double>(nneg[c]);
  }
  Matrix deq = q.Dequantize();
  if (error_feedback) {
    for (size_t i = 0; i < a.Data().size(); ++i)
      residual->Data()[i] = a.Data()[i] - deq.Data()[i];
  } else {
    residual->Fill(0.0);
  }
  return q;
}

Matrix Aggregate(std::span<const QuantizedGradient> parts) {
  if (parts.empty()) ThrowError("Aggregate: no inputs");
  Matrix sum(parts[0].rows, parts[0].cols);
  for (const auto &q : parts) {
    if (q.rows != sum.NumRows() || q.cols != sum.NumCols())
      ThrowError("Aggregate: shape mismatch");
    sum.AddScaled(q.Dequantize(), 1.0);
  }
  return sum;
}

LsqProblem::LsqProblem(Matrix a, std::vector<double> b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.NumRows() != b_.size())
    ThrowError("LsqProblem: ", a_.NumRows(), " rows but ", b_.size(),
               " targets");
  if (a_.NumRows() == 0 || a_.NumCols() == 0)
    ThrowError("LsqProblem: empty problem");
}

double LsqProblem::Loss(const Matrix &x, std::span<const size_t> samples) const {
  double sum = 0.0;
  for (size_t i : samples) {
    auto row = a_.Row(i);
    double r = -b_[i];
    for (size_t j = 0; j < row.size(); ++j) r += row[j] * x(j, 0);
    sum += r * r;
  }
  return 0.5 * sum / static_cast<double>(samples.size());
}

double LsqProblem::Loss(const Matrix &x) const {
  std::vector<size_t> all(NumSamples());
  std::iota(all.begin(), all.end(), 0);
  return Loss(x, all);
}

Matrix LsqProblem::Gradient(const Matrix &x,
                            std::span<const size_t> samples) const {
  Matrix g(Dim(), 1);
  for (size_t i : samples) {
    auto row = a_.Row(i);
    double r = -b_[i];
    for (size_t j = 0; j < row.size(); ++j) r += row[j] * x(j, 0);
    for (size_t j = 0; j < row.size(); ++j) g(j, 0) += r * row[j];
  }
  return g;
}

LsqProblem MakeLsqProblem(size_t dim, size_t samples, uint64_t seed,
                          double noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix a(samples, dim);
  for (double &v : a.Data()) v = z(rng);
  std::vector<double> truth(dim);
  for (double &v : truth) v = z(rng);
  std::vector<double> b(samples);
  for (size_t i = 0; i < samples; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < dim; ++j) s += a(i, j) * truth[j];
    b[i] = s + noise * z(rng);
  }
  return LsqProblem(std::move(a), std::move(b));
}

WorkerPool::WorkerPool(const LsqProblem &p, const SgdOptions &opts) {
  if (opts.workers < 1) ThrowError("need at least one worker");
  if (opts.minibatch < 1) ThrowError("minibatch size must be positive");
  const size_t K = opts.workers;
  replicas.assign(K, Matrix(p.Dim(), 1));
  residuals.assign(K, Matrix(p.Dim(), 1));
  std::vector<size_t> order(p.NumSamples());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opts.seed);
  std::shuffle(order.begin(), order.end(), rng);
  shards.assign(K, {});
  for (size_t i = 0; i < order.size(); ++i) shards[i % K].push_back(order[i]);
  cursors.assign(K, 0);
  minibatch = opts.minibatch;
}

void WorkerPool::CheckReplicas() const {
  for (size_t k = 1; k < replicas.size(); ++k) {
    auto a = replicas[0].Data(), b = replicas[k].Data();
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0)
      ThrowError("replica ", k, " diverged from replica 0");
  }
}

uint64_t SgdStep(const LsqProblem &p, WorkerPool &pool,
                 const SgdOptions &opts) {
  const size_t K = pool.replicas.size();
  std::vector<Matrix> grads(K);
  std::vector<QuantizedGradient> quants(opts.quantize ? K : 0);
  ParallelFor(K, opts.num_threads, [&](size_t k) {
    size_t take = pool.minibatch / K + (k < pool.minibatch % K ? 1 : 0);
    const auto &shard = pool.shards[k];
    std::vector<size_t> batch;
    batch.reserve(take);
    for (size_t i = 0; i < take && !shard.empty(); ++i) {
      batch.push_back(shard[pool.cursors[k]]);
      pool.cursors[k] = (pool.cursors[k] + 1) % shard.size();
    }
    grads[k] = p.Gradient(pool.replicas[k], batch);
    if (opts.quantize)
      quants[k] = Quantize(grads[k], &pool.residuals[k], opts.error_feedback);
  });
  Matrix agg;
  uint64_t bytes = 0;
  if (opts.quantize) {
    agg = Aggregate(quants);
    for (const auto &q : quants) bytes += q.WireBytes();
  } else {
    agg = Matrix(p.Dim(), 1);
    for (const auto &g : grads) {
      agg.AddScaled(g, 1.0);
      bytes += DenseWireBytes(g.NumRows(), g.NumCols());
    }
  }
  for (auto &x : pool.replicas) x.AddScaled(agg, -opts.learning_rate);
  return bytes;
}

size_t AutoMinibatch(const LsqProblem &p, const WorkerPool &pool,
                     std::span<const size_t> probe,
                     std::span<const size_t> candidates,
                     const SgdOptions &opts,
                     const AutoMinibatchOptions &aopts) {
  if (candidates.empty()) ThrowError("AutoMinibatch: no candidate sizes");
  if (probe.empty()) ThrowError("AutoMinibatch: empty probe set");
  for (size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i] <= candidates[i - 1])
      ThrowError("AutoMinibatch: candidates must be strictly increasing");
  const size_t K = pool.replicas.size();
  auto probe_loss = [&](size_t size) {
    WorkerPool trial = pool;  // checkpoint copy
    trial.minibatch = size;
    trial.shards.assign(K, {});
    for (size_t i = 0; i < probe.size(); ++i)
      trial.shards[i % K].push_back(probe[i]);
    trial.cursors.assign(K, 0);
    for (int u = 0; u < aopts.probe_updates; ++u) {
      SgdStep(p, trial, opts);
      double l = p.Loss(trial.replicas[0], probe);
      if (!std::isfinite(l) || l > kDivergenceLoss)
        return std::numeric_limits<double>::infinity();
    }
    return p.Loss(trial.replicas[0], probe);
  };
  double base = probe_loss(candidates[0]);
  size_t chosen = candidates[0];
  for (size_t i = 1; i < candidates.size(); ++i) {
    double l = probe_loss(candidates[i]);
    if (std::isfinite(l) && l <= (1.0 + aopts.tolerance) * base)
      chosen = candidates[i];
  }
  return chosen;
}

SgdTrace SimTrain(const LsqProblem &p, const SgdOptions &opts) {
  WorkerPool pool(p, opts);
  SgdTrace t;
  const uint64_t dense_step =
      static_cast<uint64_t>(opts.workers) * DenseWireBytes(p.Dim(), 1);
  std::vector<size_t> probe;
  for (size_t i = 0; i < p.NumSamples(); i += 8) probe.push_back(i);
  t.rows.push_back({0, p.Loss(pool.replicas[0]), 0, pool.minibatch});
  for (int step = 1; step <= opts.steps; ++step) {
    if (opts.auto_minibatch && step > 1 &&
        (step - 1) % opts.auto_interval == 0) {
      std::vector<size_t> cand;
      for (size_t m = pool.minibatch; m <= opts.max_minibatch && cand.size() < 3;
           m *= 2)
        cand.push_back(m);
      if (cand.size() > 1) pool.minibatch = AutoMinibatch(p, pool, probe, cand, opts);
    }
    t.bytes_exchanged += SgdStep(p, pool, opts);
    t.dense_bytes += dense_step;
    double loss = p.Loss(pool.replicas[0]);
    if (!std::isfinite(loss) || loss > kDivergenceLoss)
      ThrowError("training diverged at step ", step, " (loss ", loss, ")");
    pool.CheckReplicas();
    t.rows.push_back({step, loss, t.bytes_exchanged, pool.minibatch});
  }
  t.params = pool.replicas[0];
  t.final_loss = t.rows.back().loss;
  return t;
}

void WriteTraceCsv(const SgdTrace &t, std::ostream &os) {
  os << "step,loss,bytes_exchanged,minibatch_size\n";
  for (const auto &r : t.rows)
    os << r.step << ',' << FormatDouble(r.loss) << ',' << r.bytes_exchanged
       << ',' << r.minibatch_size << '\n';
}

}  // namespace cts
