// cts/forward-backward.h

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

#ifndef CTS_FORWARD_BACKWARD_H_
#define CTS_FORWARD_BACKWARD_H_

#include <span>
#include <string>
#include <vector>

#include "cts/den-graph.h"
#include "cts/matrix.h"
#include "cts/senone-lm.h"

namespace cts {

enum class FbKernel {
  kLog,     // log-domain accumulation, one log-sum-exp per state and frame
  kScaled,  // linear-domain sparse products with per-frame rescaling
};

struct FbOptions {
  FbKernel kernel = FbKernel::kLog;
};

// Alpha and beta are (T+1) x NumStates log-domain tables.  Row t holds the
// values after t frames have been consumed: alpha row 0 is the start state
// alone, beta row T is the final weights.

/// alpha[t+1][j] = x[t][label(j)] + log sum_{i->j} exp(alpha[t][i] + w(i->j)).
Matrix Forward(const DenominatorFsa &fsa, const Matrix &loglikes,
               const FbOptions &opts = {});

/// beta[t][i] = log sum_{i->j} exp(w(i->j) + x[t][label(j)] + beta[t+1][j]).
Matrix Backward(const DenominatorFsa &fsa, const Matrix &loglikes,
                const FbOptions &opts = {});

/// log sum_j exp(alpha[T][j] + final(j)).
double LogTotalFromAlpha(const DenominatorFsa &fsa, const Matrix &alpha);

struct FbResult {
  double log_total = kLogZero;
  Matrix gamma;  // T x S per-frame senone posteriors
};

/// gamma[t][s] = sum over states j labelled s of
/// exp(alpha[t+1][j] + beta[t+1][j] - log_total).
FbResult Posteriors(const DenominatorFsa &fsa, const Matrix &loglikes,
                    const Matrix &alpha, const Matrix &beta);

/// Forward, Backward and Posteriors in one call.  Throws if no path of
/// length T reaches a final state.
FbResult ForwardBackward(const DenominatorFsa &fsa, const Matrix &loglikes,
                         const FbOptions &opts = {});

enum class NumeratorWeights {
  kTransitions,     // chain includes HMM self-loop / exit probabilities
  kLikelihoodOnly,  // chain score is the sum of aligned log-likelihoods
};

/// Forced-alignment chain for one utterance.
struct NumeratorChain {
  std::vector<SenoneId> alignment;
  double log_transition_weight = 0.0;
  Matrix posterior;  // T x S one-hot
};

/// Builds the one-hot numerator for an alignment of exactly num_frames
/// frames.  The transition weight is sum_t log P(a_t | a_{t-1}) under the
/// HMM, plus the exit probability of the final senone.  `tm` may be null
/// only with kLikelihoodOnly.
NumeratorChain MakeNumeratorChain(const AlignedUtterance &ali,
                                  size_t num_frames, size_t num_senones,
                                  const TransitionModel *tm,
                                  NumeratorWeights weights =
                                      NumeratorWeights::kTransitions);

double NumeratorLogProb(const NumeratorChain &num, const Matrix &loglikes);

struct MmiStats {
  double objective = 0.0;  // log numerator - log denominator (+ CE term)
  double log_num = 0.0;
  double log_den = 0.0;
  Matrix grad;  // d objective / d loglikes
  size_t frames = 0;
};

/// grad = num - den.gamma; objective = log_num - den.log_total.
MmiStats ComputeMmiStats(const NumeratorChain &num, const FbResult &den,
                         const Matrix &loglikes);

inline constexpr double kDefaultCeLambda = 0.1;

/// Adds lambda * frame cross-entropy of the alignment under the row softmax
/// of the log-likelihoods to objective and gradient.
MmiStats CeRegularize(MmiStats stats, const NumeratorChain &num,
                      const Matrix &loglikes, double lambda);

struct MmiOptions {
  double ce_lambda = kDefaultCeLambda;
  NumeratorWeights numerator = NumeratorWeights::kTransitions;
  FbOptions fb;
  int num_threads = 1;
};

struct MmiBatchResult {
  std::vector<MmiStats> per_utterance;
  double objective = 0.0;
  size_t frames = 0;
};

/// Per-utterance statistics, computed concurrently; totals are reduced in
/// utterance order so the result does not depend on the thread count.
MmiBatchResult ComputeMmiBatch(const DenominatorFsa &fsa,
                               const TransitionModel &tm,
                               std::span<const AlignedUtterance> alignments,
                               std::span<const Matrix> loglikes,
                               const MmiOptions &opts);

struct BenchReport {
  size_t frames = 0;
  int32_t states = 0;
  size_t arcs = 0;
  size_t senones = 0;
  double seconds = 0.0;
  double frames_per_second = 0.0;
  double realtime_factor = 0.0;  // speech seconds / wall seconds at 10 ms
  std::string kernel;

  std::string ToJson() const;
};

/// Times forward + backward + posteriors over the given chunks.
BenchReport BenchThroughput(const DenominatorFsa &fsa,
                            std::span<const Matrix> chunks,
                            const FbOptions &opts = {});

}  // namespace cts

#endif  // CTS_FORWARD_BACKWARD_H_
