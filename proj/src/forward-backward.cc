// src/forward-backward.cc

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

#include "cts/forward-backward.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cts/base.h"
#include "cts/parallel.h"
#include "json.hpp"

namespace cts {

namespace {

void CheckInputs(const DenominatorFsa &fsa, const Matrix &x) {
  if (x.NumRows() == 0) ThrowError("forward-backward: zero frames");
  if (fsa.MaxLabel() >= static_cast<SenoneId>(x.NumCols()))
    ThrowError("forward-backward: graph label ", fsa.MaxLabel(),
               " out of range for ", x.NumCols(), " senone columns");
}

// Terms more than this far below the maximum cannot change a double sum
// that already contains exp(0) = 1.
constexpr double kNegligible = -40.0;

// log sum_k exp(terms[k] - m) where m = max_k terms[k].
inline double LogSumShifted(const double *terms, int32_t n, double m) {
  double sum = 0.0;
  for (int32_t k = 0; k < n; ++k) {
    double d = terms[k] - m;
    if (d > kNegligible) sum += std::exp(d);
  }
  return std::log(sum);
}

size_t MaxFanIn(const DenominatorFsa &fsa) {
  const auto &off = fsa.InOffsets();
  size_t best = 0;
  for (size_t j = 0; j + 1 < off.size(); ++j)
    best = std::max<size_t>(best, off[j + 1] - off[j]);
  return best;
}

Matrix ForwardLog(const DenominatorFsa &fsa, const Matrix &x) {
  const size_t T = x.NumRows();
  const int32_t N = fsa.NumStates();
  const auto &in_off = fsa.InOffsets();
  const auto &in_src = fsa.InSources();
  const auto &in_w = fsa.InLogWeights();
  const auto &label = fsa.StateLabels();
  Matrix alpha(T + 1, N, kLogZero);
  alpha(0, fsa.Start()) = 0.0;
  std::vector<double> terms(MaxFanIn(fsa));
  for (size_t t = 0; t < T; ++t) {
    auto prev = alpha.Row(t);
    auto cur = alpha.Row(t + 1);
    auto xr = x.Row(t);
    for (int32_t j = 0; j < N; ++j) {
      const int32_t lo = in_off[j], hi = in_off[j + 1];
      double m = kLogZero;
      for (int32_t k = lo; k < hi; ++k) {
        terms[k - lo] = prev[in_src[k]] + in_w[k];
        m = std::max(m, terms[k - lo]);
      }
      if (m == kLogZero) continue;
      cur[j] = m + LogSumShifted(terms.data(), hi - lo, m) + xr[label[j]];
    }
  }
  return alpha;
}

Matrix BackwardLog(const DenominatorFsa &fsa, const Matrix &x) {
  const size_t T = x.NumRows();
  const int32_t N = fsa.NumStates();
  const auto &arcs = fsa.Arcs();
  const auto &off = fsa.OutOffsets();
  Matrix beta(T + 1, N, kLogZero);
  for (int32_t j = 0; j < N; ++j) beta(T, j) = fsa.FinalLogWeight(j);
  size_t max_out = 0;
  for (int32_t i = 0; i < N; ++i)
    max_out = std::max<size_t>(max_out, off[i + 1] - off[i]);
  std::vector<double> terms(max_out);
  for (size_t t = T; t-- > 0;) {
    auto next = beta.Row(t + 1);
    auto cur = beta.Row(t);
    auto xr = x.Row(t);
    for (int32_t i = 0; i < N; ++i) {
      const int32_t lo = off[i], hi = off[i + 1];
      double m = kLogZero;
      for (int32_t k = lo; k < hi; ++k) {
        const FsaArc &a = arcs[k];
        terms[k - lo] = a.log_weight + xr[a.label] + next[a.dst];
        m = std::max(m, terms[k - lo]);
      }
      if (m == kLogZero) continue;
      cur[i] = m + LogSumShifted(terms.data(), hi - lo, m);
    }
  }
  return beta;
}

// Linear-domain variants.  Each frame's vector is renormalised to sum to one
// and the log of the normaliser is accumulated separately.

double SafeLog(double v) { return v > 0.0 ? std::log(v) : kLogZero; }

Matrix ForwardScaled(const DenominatorFsa &fsa, const Matrix &x) {
  const size_t T = x.NumRows();
  const int32_t N = fsa.NumStates();
  const auto &in_off = fsa.InOffsets();
  const auto &in_src = fsa.InSources();
  const auto &in_lw = fsa.InLogWeights();
  const auto &label = fsa.StateLabels();
  std::vector<double> in_w(in_lw.size());
  for (size_t k = 0; k < in_lw.size(); ++k) in_w[k] = std::exp(in_lw[k]);

  Matrix alpha(T + 1, N, kLogZero);
  alpha(0, fsa.Start()) = 0.0;
  std::vector<double> prev(N, 0.0), cur(N, 0.0);
  prev[fsa.Start()] = 1.0;
  double log_scale = 0.0;
  for (size_t t = 0; t < T; ++t) {
    auto xr = x.Row(t);
    double m = kLogZero;
    for (int32_t j = 0; j < N; ++j)
      if (label[j] >= 0) m = std::max(m, xr[label[j]]);
    double z = 0.0;
    for (int32_t j = 0; j < N; ++j) {
      double acc = 0.0;
      for (int32_t k = in_off[j]; k < in_off[j + 1]; ++k)
        acc += prev[in_src[k]] * in_w[k];
      cur[j] = acc == 0.0 ? 0.0 : acc * std::exp(xr[label[j]] - m);
      z += cur[j];
    }
    if (z == 0.0) break;  // remaining rows stay at log zero
    log_scale += m + std::log(z);
    auto row = alpha.Row(t + 1);
    for (int32_t j = 0; j < N; ++j) {
      cur[j] /= z;
      row[j] = cur[j] > 0.0 ? std::log(cur[j]) + log_scale : kLogZero;
    }
    std::swap(prev, cur);
  }
  return alpha;
}

Matrix BackwardScaled(const DenominatorFsa &fsa, const Matrix &x) {
  const size_t T = x.NumRows();
  const int32_t N = fsa.NumStates();
  const auto &arcs = fsa.Arcs();
  const auto &off = fsa.OutOffsets();
  const auto &label = fsa.StateLabels();
  std::vector<double> w(arcs.size());
  for (size_t k = 0; k < arcs.size(); ++k) w[k] = std::exp(arcs[k].log_weight);

  Matrix beta(T + 1, N, kLogZero);
  double mf = kLogZero;
  for (int32_t j = 0; j < N; ++j) {
    beta(T, j) = fsa.FinalLogWeight(j);
    mf = std::max(mf, fsa.FinalLogWeight(j));
  }
  if (mf == kLogZero) return beta;
  std::vector<double> next(N), cur(N), emit(N);
  for (int32_t j = 0; j < N; ++j) next[j] = std::exp(fsa.FinalLogWeight(j) - mf);
  double log_scale = mf;
  for (size_t t = T; t-- > 0;) {
    auto xr = x.Row(t);
    double m = kLogZero;
    for (int32_t j = 0; j < N; ++j)
      if (label[j] >= 0) m = std::max(m, xr[label[j]]);
    for (int32_t j = 0; j < N; ++j)
      emit[j] = label[j] >= 0 ? next[j] * std::exp(xr[label[j]] - m) : 0.0;
    double z = 0.0;
    for (int32_t i = 0; i < N; ++i) {
      double acc = 0.0;
      for (int32_t k = off[i]; k < off[i + 1]; ++k) acc += w[k] * emit[arcs[k].dst];
      cur[i] = acc;
      z += acc;
    }
    if (z == 0.0) break;
    log_scale += m + std::log(z);
    auto row = beta.Row(t);
    for (int32_t i = 0; i < N; ++i) {
      cur[i] /= z;
      row[i] = SafeLog(cur[i]) + log_scale;
    }
    std::swap(next, cur);
  }
  return beta;
}

}  // namespace

Matrix Forward(const DenominatorFsa &fsa, const Matrix &loglikes,
               const FbOptions &opts) {
  CheckInputs(fsa, loglikes);
  return opts.kernel == FbKernel::kLog ? ForwardLog(fsa, loglikes)
                                       : ForwardScaled(fsa, loglikes);
}

Matrix Backward(const DenominatorFsa &fsa, const Matrix &loglikes,
                const FbOptions &opts) {
  CheckInputs(fsa, loglikes);
  return opts.kernel == FbKernel::kLog ? BackwardLog(fsa, loglikes)
                                       : BackwardScaled(fsa, loglikes);
}

double LogTotalFromAlpha(const DenominatorFsa &fsa, const Matrix &alpha) {
  auto last = alpha.Row(alpha.NumRows() - 1);
  std::vector<double> terms(last.size());
  for (size_t j = 0; j < last.size(); ++j)
    terms[j] = last[j] + fsa.FinalLogWeight(static_cast<int32_t>(j));
  return LogSumExp(terms);
}

FbResult Posteriors(const DenominatorFsa &fsa, const Matrix &loglikes,
                    const Matrix &alpha, const Matrix &beta) {
  const size_t T = loglikes.NumRows();
  const auto N = static_cast<size_t>(fsa.NumStates());
  if (alpha.NumRows() != T + 1 || beta.NumRows() != T + 1 ||
      alpha.NumCols() != N || beta.NumCols() != N)
    ThrowError("Posteriors: alpha/beta shape does not match graph and frames");
  FbResult res;
  res.log_total = LogTotalFromAlpha(fsa, alpha);
  if (res.log_total == kLogZero)
    ThrowError("Posteriors: no complete path of ", T, " frames");
  res.gamma.Resize(T, loglikes.NumCols());
  const auto &label = fsa.StateLabels();
  for (size_t t = 0; t < T; ++t) {
    auto a = alpha.Row(t + 1);
    auto b = beta.Row(t + 1);
    auto g = res.gamma.Row(t);
    for (size_t j = 0; j < N; ++j) {
      if (label[j] < 0) continue;
      double lp = a[j] + b[j] - res.log_total;
      if (lp == kLogZero) continue;
      g[label[j]] += std::exp(lp);
    }
  }
  return res;
}

FbResult ForwardBackward(const DenominatorFsa &fsa, const Matrix &loglikes,
                         const FbOptions &opts) {
  Matrix alpha = Forward(fsa, loglikes, opts);
  Matrix beta = Backward(fsa, loglikes, opts);
  return Posteriors(fsa, loglikes, alpha, beta);
}

NumeratorChain MakeNumeratorChain(const AlignedUtterance &ali,
                                  size_t num_frames, size_t num_senones,
                                  const TransitionModel *tm,
                                  NumeratorWeights weights) {
  if (ali.frames.size() != num_frames)
    ThrowError("numerator ", ali.utt_id, ": alignment has ", ali.frames.size(),
               " frames, log-likelihoods have ", num_frames);
  if (num_frames == 0) ThrowError("numerator ", ali.utt_id, ": zero frames");
  NumeratorChain num;
  num.alignment = ali.frames;
  num.posterior.Resize(num_frames, num_senones);
  for (size_t t = 0; t < num_frames; ++t) {
    SenoneId s = ali.frames[t];
    if (s < 0 || static_cast<size_t>(s) >= num_senones)
      ThrowError("numerator ", ali.utt_id, ": senone ", s, " out of range");
    num.posterior(t, s) = 1.0;
  }
  if (weights == NumeratorWeights::kTransitions) {
    if (!tm) ThrowError("numerator: transition weights need a transition model");
    double lw = 0.0;
    for (size_t t = 1; t < num_frames; ++t) {
      SenoneId prev = ali.frames[t - 1];
      lw += std::log(ali.frames[t] == prev ? tm->SelfLoop(prev) : tm->Exit(prev));
    }
    lw += std::log(tm->Exit(ali.frames.back()));
    num.log_transition_weight = lw;
  }
  return num;
}

double NumeratorLogProb(const NumeratorChain &num, const Matrix &loglikes) {
  if (loglikes.NumRows() != num.alignment.size())
    ThrowError("numerator: frame count mismatch");
  double lp = num.log_transition_weight;
  for (size_t t = 0; t < num.alignment.size(); ++t)
    lp += loglikes(t, num.alignment[t]);
  return lp;
}

MmiStats ComputeMmiStats(const NumeratorChain &num, const FbResult &den,
                         const Matrix &loglikes) {
  if (!num.posterior.SameShape(den.gamma) || !loglikes.SameShape(den.gamma))
    ThrowError("mmi: numerator, denominator and log-likelihood shapes differ");
  MmiStats stats;
  stats.log_num = NumeratorLogProb(num, loglikes);
  stats.log_den = den.log_total;
  stats.objective = stats.log_num - stats.log_den;
  stats.grad = num.posterior;
  stats.grad.AddScaled(den.gamma, -1.0);
  stats.frames = loglikes.NumRows();
  return stats;
}

MmiStats CeRegularize(MmiStats stats, const NumeratorChain &num,
                      const Matrix &loglikes, double lambda) {
  if (!(lambda >= 0.0)) ThrowError("cross-entropy weight must be >= 0, got ", lambda);
  if (lambda == 0.0) return stats;
  if (!stats.grad.SameShape(loglikes) || !num.posterior.SameShape(loglikes))
    ThrowError("ce-regularize: shape mismatch");
  for (size_t t = 0; t < loglikes.NumRows(); ++t) {
    auto x = loglikes.Row(t);
    double lse = LogSumExp(x);
    auto g = stats.grad.Row(t);
    auto n = num.posterior.Row(t);
    for (size_t s = 0; s < x.size(); ++s)
      g[s] += lambda * (n[s] - std::exp(x[s] - lse));
    stats.objective += lambda * (x[num.alignment[t]] - lse);
  }
  return stats;
}

MmiBatchResult ComputeMmiBatch(const DenominatorFsa &fsa,
                               const TransitionModel &tm,
                               std::span<const AlignedUtterance> alignments,
                               std::span<const Matrix> loglikes,
                               const MmiOptions &opts) {
  if (alignments.size() != loglikes.size())
    ThrowError("mmi batch: ", alignments.size(), " alignments but ",
               loglikes.size(), " log-likelihood matrices");
  MmiBatchResult res;
  res.per_utterance.resize(alignments.size());
  ParallelFor(alignments.size(), opts.num_threads, [&](size_t u) {
    const Matrix &x = loglikes[u];
    auto num = MakeNumeratorChain(alignments[u], x.NumRows(), x.NumCols(), &tm,
                                  opts.numerator);
    auto den = ForwardBackward(fsa, x, opts.fb);
    res.per_utterance[u] =
        CeRegularize(ComputeMmiStats(num, den, x), num, x, opts.ce_lambda);
  });
  for (const auto &s : res.per_utterance) {
    res.objective += s.objective;
    res.frames += s.frames;
  }
  return res;
}

std::string BenchReport::ToJson() const {
  nlohmann::ordered_json j;
  j["frames"] = frames;
  j["states"] = states;
  j["arcs"] = arcs;
  j["senones"] = senones;
  j["kernel"] = kernel;
  j["seconds"] = seconds;
  j["frames_per_second"] = frames_per_second;
  j["realtime_factor"] = realtime_factor;
  return j.dump(2);
}

BenchReport BenchThroughput(const DenominatorFsa &fsa,
                            std::span<const Matrix> chunks,
                            const FbOptions &opts) {
  BenchReport rep;
  rep.states = fsa.NumStates();
  rep.arcs = fsa.NumArcs();
  rep.kernel = opts.kernel == FbKernel::kLog ? "log" : "scaled";
  if (!chunks.empty()) rep.senones = chunks[0].NumCols();
  auto t0 = std::chrono::steady_clock::now();
  double checksum = 0.0;
  for (const auto &x : chunks) {
    auto res = ForwardBackward(fsa, x, opts);
    checksum += res.log_total;
    rep.frames += x.NumRows();
  }
  auto t1 = std::chrono::steady_clock::now();
  if (!std::isfinite(checksum)) ThrowError("bench: non-finite total");
  rep.seconds = std::chrono::duration<double>(t1 - t0).count();
  rep.frames_per_second = rep.seconds > 0 ? rep.frames / rep.seconds : 0.0;
  rep.realtime_factor = rep.frames_per_second * 0.01;
  return rep;
}

}  // namespace cts
