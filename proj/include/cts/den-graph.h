// cts/den-graph.h

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

#ifndef CTS_DEN_GRAPH_H_
#define CTS_DEN_GRAPH_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cts/senone-lm.h"

namespace cts {

/// Per-senone HMM self-loop probabilities; exit = 1 - self-loop.
class TransitionModel {
 public:
  static constexpr double kDefaultSelfLoop = 0.5;

  TransitionModel() = default;
  explicit TransitionModel(std::map<SenoneId, double> self_loop);

  /// Throws for a senone that never occurred in the counted data.
  double SelfLoop(SenoneId s) const;
  double Exit(SenoneId s) const { return 1.0 - SelfLoop(s); }
  bool Covers(SenoneId s) const { return self_loop_.count(s) != 0; }
  const std::map<SenoneId, double> &SelfLoops() const { return self_loop_; }

 private:
  std::map<SenoneId, double> self_loop_;
};

struct TransitionOptions {
  // Used for senones that occur but never have a successor frame.
  double default_self_loop = TransitionModel::kDefaultSelfLoop;
  // Senones never observed leaving would otherwise get self-loop 1 and
  // trap all mass; the estimate is capped here.
  double max_self_loop = 0.999;
};

/// self_loop(s) = #(s followed by s) / #(frames labelled s with a successor).
TransitionModel CountTransitions(std::span<const AlignedUtterance> corpus,
                                 const TransitionOptions &opts = {});

struct FsaArc {
  int32_t src = 0;
  int32_t dst = 0;
  SenoneId label = 0;
  double log_weight = 0.0;
};

/// Frame-level acceptor.  Every state except the start state emits exactly
/// one senone (the label of all its incoming arcs).  Arcs are kept sorted by
/// (src, label, dst) and indexed both by source and by destination so the
/// per-frame recursions are sparse matrix-vector products.
class DenominatorFsa {
 public:
  DenominatorFsa() = default;
  /// Sorts arcs, infers state labels and builds the sparse indices.  Throws
  /// if a state receives arcs with different labels, if the start state has
  /// incoming arcs, or if a weight is NaN.
  DenominatorFsa(int32_t num_states, int32_t start, std::vector<FsaArc> arcs,
                 std::vector<double> final_log_weights);

  int32_t NumStates() const { return num_states_; }
  int32_t Start() const { return start_; }
  size_t NumArcs() const { return arcs_.size(); }
  const std::vector<FsaArc> &Arcs() const { return arcs_; }
  std::span<const FsaArc> ArcsFrom(int32_t state) const {
    return {arcs_.data() + out_offsets_[state],
            arcs_.data() + out_offsets_[state + 1]};
  }
  double FinalLogWeight(int32_t state) const { return final_[state]; }
  const std::vector<double> &FinalLogWeights() const { return final_; }
  /// Senone emitted on entering `state`; -1 for the start state and for
  /// states without incoming arcs.
  SenoneId StateLabel(int32_t state) const { return state_label_[state]; }
  const std::vector<SenoneId> &StateLabels() const { return state_label_; }
  SenoneId MaxLabel() const { return max_label_; }

  // Destination-major index: for state j, in_arcs()[in_offsets()[j] ..
  // in_offsets()[j+1]) are indices into Arcs() of arcs entering j.
  const std::vector<int32_t> &InOffsets() const { return in_offsets_; }
  const std::vector<int32_t> &InArcs() const { return in_arcs_; }
  const std::vector<int32_t> &OutOffsets() const { return out_offsets_; }
  // Destination-major copies of arc source and weight for the forward pass.
  const std::vector<int32_t> &InSources() const { return in_src_; }
  const std::vector<double> &InLogWeights() const { return in_log_weight_; }

  /// Text format:
  ///   states N start S
  ///   src dst senone logweight      (sorted by src, senone, dst)
  ///   final state logweight
  /// Log weights are natural logs printed with 17 significant digits.
  void Write(std::ostream &os) const;
  static DenominatorFsa Read(std::istream &is);

 private:
  int32_t num_states_ = 0;
  int32_t start_ = 0;
  std::vector<FsaArc> arcs_;
  std::vector<double> final_;
  std::vector<SenoneId> state_label_;
  std::vector<int32_t> out_offsets_;
  std::vector<int32_t> in_offsets_;
  std::vector<int32_t> in_arcs_;
  std::vector<int32_t> in_src_;
  std::vector<double> in_log_weight_;
  SenoneId max_label_ = -1;
};

/// Self-loop probabilities read back off a compiled graph.
TransitionModel TransitionModelFromGraph(const DenominatorFsa &fsa);

/// Product of the senone LM and the HMM transition model.  Each emitting
/// state is the history reached after emitting its senone; it carries the
/// senone's self-loop, cross arcs weighted exit * P(next | history), and
/// final weight exit * P(END | history).
DenominatorFsa Compile(const MixedHistoryLm &lm, const TransitionModel &tm,
                       const Inventory &inv);

/// As Compile, also returning the history of every state (start first).
DenominatorFsa Compile(const MixedHistoryLm &lm, const TransitionModel &tm,
                       const Inventory &inv,
                       std::vector<HistoryState> *state_histories);

struct ValidationFinding {
  enum class Kind { kStochasticity, kUnreachable, kDeadEnd };
  Kind kind;
  int32_t state;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationFinding> findings;
  bool Ok() const { return findings.empty(); }
  size_t Count(ValidationFinding::Kind kind) const;
};

/// Checks that every state's arcs plus final weight sum to 1 within `tol`,
/// every state is reachable from the start, and every state can reach a
/// state with a final weight.
ValidationReport Validate(const DenominatorFsa &fsa, double tol = 1e-10);

}  // namespace cts

#endif  // CTS_DEN_GRAPH_H_
