// cts/confnet.h

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


#ifndef CTS_CONFNET_H_
#define CTS_CONFNET_H_

#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cts/nbest.h"
#include "cts/scoring.h"

namespace cts {

/// The null word of a slot.
inline constexpr const char *kNullWord = "*DELETE*";

/// word (or kNullWord) -> posterior.
using SlotDist = std::map<std::string, double>;

struct ConfusionNetwork {
  std::string utt_id;
  std::vector<SlotDist> slots;

  /// Throws unless every slot sums to 1 within tol and no slot is all-null.
  void Check(double tol = 1e-9) const;
};

inline constexpr double kDefaultPosteriorScale = 0.1;

/// softmax(scale * score) over a list of total scores.
std::vector<double> HypPosteriors(std::span<const double> scores,
                                  double scale = kDefaultPosteriorScale);

/// Pivot alignment.  Hypotheses are taken in order of decreasing posterior
/// (list order among equals); the first one seeds the slots and each later
/// one is aligned to the current slots by a weighted edit distance:
/// aligning word w to a slot costs 1 - P(w), skipping a slot costs
/// 1 - P(null), and opening a new slot costs 1.  Slots are normalized at the
/// end and all-null slots are dropped.
ConfusionNetwork BuildCn(const NBestList &list,
                         std::span<const double> posteriors);

/// Combination of several networks for one utterance with the per-slot
/// distribution of each input system on the combined slots.
struct CombinedCn {
  ConfusionNetwork cn;
  // system_slots[i][k]: system k's distribution at combined slot i, or
  // {null: 1} where system k has no slot there.
  std::vector<std::vector<SlotDist>> system_slots;
};

/// Weighted voting.  Systems are merged in order of decreasing weight (ties
/// by the network text) so the result does not depend on input order.  Each
/// network is aligned to the running combination with slot-to-slot cost
/// 1 - sum_w min(P(w), Q(w)); systems with zero weight are ignored.
CombinedCn CombineDetailed(std::span<const ConfusionNetwork> cns,
                           std::span<const double> weights);
ConfusionNetwork Combine(std::span<const ConfusionNetwork> cns,
                         std::span<const double> weights);

/// Best word per slot; ties go to the lexicographically smallest entry.
/// Null slots emit nothing.
WordSeq DecodeCn(const ConfusionNetwork &cn);

/// Per system, one network per dev utterance, in the same utterance order
/// for every system.
using SystemCns = std::vector<std::vector<ConfusionNetwork>>;

struct EmOptions {
  int max_iterations = 50;
  double tolerance = 1e-6;  // on max |weight change|
};

struct EmResult {
  std::vector<double> weights;
  std::vector<double> log_scores;  // objective before each update and at end
  int iterations = 0;
  size_t observations = 0;
};

/// Mixture weights of the given systems.  The networks are aligned once
/// with uniform weights; the reference is aligned to the combined network to
/// label each slot with its reference word (or null).  With those labels
/// fixed, EM maximizes sum_slots log sum_k w_k P_k(ref word).
EmResult EmWeights(const SystemCns &systems, std::span<const size_t> members,
                   const Transcripts &refs, const EmOptions &opts = {});

/// Combined networks of `members` with `weights`, one per utterance.
std::vector<ConfusionNetwork> CombineSystems(const SystemCns &systems,
                                             std::span<const size_t> members,
                                             std::span<const double> weights);

ErrorCounts CnErrors(std::span<const ConfusionNetwork> cns,
                     const Transcripts &refs);

struct GreedyOptions {
  double mu = 0.5;  // weight of the fresh EM estimate when smoothing
  EmOptions em;
  int num_threads = 1;
};

struct SystemSet {
  std::vector<size_t> members;
  std::vector<double> weights;
  ErrorCounts errors;
};

struct GreedyResult {
  SystemSet best;
  std::vector<SystemSet> trace;  // accepted set after each step
  std::vector<ErrorCounts> single;  // each candidate alone
};

/// Starts from the best single system and keeps adding the candidate whose
/// addition gives the lowest dev errors (lowest index on ties), as long as
/// that strictly improves.  New weights are mu * EM + (1 - mu) * previous
/// weights extended with a zero.
GreedyResult GreedySelect(const SystemCns &candidates, const Transcripts &refs,
                          const GreedyOptions &opts = {});

// CN file: per utterance `utt_id num_slots` then one line per slot of
// `word:posterior` pairs.  Words may contain ':'; the last one separates.
std::vector<ConfusionNetwork> ReadCns(std::istream &is,
                                      const std::string &name = "");
std::vector<ConfusionNetwork> ReadCnsFile(const std::string &path);
void WriteCns(std::span<const ConfusionNetwork> cns, std::ostream &os);

}  // namespace cts

#endif  // CTS_CONFNET_H_
