// src/den-graph.cc

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

#include "cts/den-graph.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>

#include "cts/base.h"
#include "cts/text-util.h"

namespace cts {

TransitionModel::TransitionModel(std::map<SenoneId, double> self_loop)
    : self_loop_(std::move(self_loop)) {
  for (const auto &[s, p] : self_loop_)
    if (!(p >= 0.0 && p < 1.0))
      ThrowError("self-loop probability for senone ", s, " outside [0,1): ", p);
}

double TransitionModel::SelfLoop(SenoneId s) const {
  auto it = self_loop_.find(s);
  if (it == self_loop_.end())
    ThrowError("no transition statistics for senone ", s);
  return it->second;
}

TransitionModel CountTransitions(std::span<const AlignedUtterance> corpus,
                                 const TransitionOptions &opts) {
  if (corpus.empty()) ThrowError("CountTransitions: empty corpus");
  // senone -> (self transitions, frames with a successor)
  std::map<SenoneId, std::pair<int64_t, int64_t>> counts;
  for (const auto &utt : corpus) {
    const auto &f = utt.frames;
    for (size_t t = 0; t < f.size(); ++t) {
      auto &c = counts[f[t]];
      if (t + 1 < f.size()) {
        ++c.second;
        if (f[t + 1] == f[t]) ++c.first;
      }
    }
  }
  std::map<SenoneId, double> self_loop;
  for (const auto &[s, c] : counts) {
    double p = c.second == 0 ? opts.default_self_loop
                             : static_cast<double>(c.first) /
                                   static_cast<double>(c.second);
    self_loop[s] = std::min(p, opts.max_self_loop);
  }
  return TransitionModel(std::move(self_loop));
}

DenominatorFsa::DenominatorFsa(int32_t num_states, int32_t start,
                               std::vector<FsaArc> arcs,
                               std::vector<double> final_log_weights)
    : num_states_(num_states),
      start_(start),
      arcs_(std::move(arcs)),
      final_(std::move(final_log_weights)) {
  if (num_states_ <= 0) ThrowError("fsa must have at least one state");
  if (start_ < 0 || start_ >= num_states_) ThrowError("bad start state");
  if (final_.size() != static_cast<size_t>(num_states_))
    ThrowError("final weight vector has ", final_.size(), " entries, want ",
               num_states_);
  std::sort(arcs_.begin(), arcs_.end(), [](const FsaArc &a, const FsaArc &b) {
    if (a.src != b.src) return a.src < b.src;
    if (a.label != b.label) return a.label < b.label;
    return a.dst < b.dst;
  });
  state_label_.assign(num_states_, -1);
  out_offsets_.assign(num_states_ + 1, 0);
  in_offsets_.assign(num_states_ + 1, 0);
  for (const auto &a : arcs_) {
    if (a.src < 0 || a.src >= num_states_ || a.dst < 0 || a.dst >= num_states_)
      ThrowError("arc ", a.src, "->", a.dst, " out of range");
    if (a.label < 0) ThrowError("negative arc label");
    if (std::isnan(a.log_weight)) ThrowError("NaN arc weight");
    if (a.dst == start_) ThrowError("start state may not have incoming arcs");
    SenoneId &lab = state_label_[a.dst];
    if (lab != -1 && lab != a.label)
      ThrowError("state ", a.dst, " has incoming arcs labelled ", lab, " and ",
                 a.label);
    lab = a.label;
    max_label_ = std::max(max_label_, a.label);
    ++out_offsets_[a.src + 1];
    ++in_offsets_[a.dst + 1];
  }
  for (int32_t s = 0; s < num_states_; ++s) {
    out_offsets_[s + 1] += out_offsets_[s];
    in_offsets_[s + 1] += in_offsets_[s];
  }
  in_arcs_.resize(arcs_.size());
  std::vector<int32_t> fill(in_offsets_.begin(), in_offsets_.end() - 1);
  for (size_t i = 0; i < arcs_.size(); ++i)
    in_arcs_[fill[arcs_[i].dst]++] = static_cast<int32_t>(i);
  in_src_.resize(arcs_.size());
  in_log_weight_.resize(arcs_.size());
  for (size_t k = 0; k < in_arcs_.size(); ++k) {
    in_src_[k] = arcs_[in_arcs_[k]].src;
    in_log_weight_[k] = arcs_[in_arcs_[k]].log_weight;
  }
}

void DenominatorFsa::Write(std::ostream &os) const {
  os << "states " << num_states_ << " start " << start_ << '\n';
  for (const auto &a : arcs_)
    os << a.src << ' ' << a.dst << ' ' << a.label << ' '
       << FormatDouble(a.log_weight) << '\n';
  for (int32_t s = 0; s < num_states_; ++s)
    if (final_[s] != kLogZero)
      os << "final " << s << ' ' << FormatDouble(final_[s]) << '\n';
}

DenominatorFsa DenominatorFsa::Read(std::istream &is) {
  std::string line;
  if (!std::getline(is, line)) ThrowError("empty graph file");
  auto head = SplitWhitespace(line);
  if (head.size() != 4 || head[0] != "states" || head[2] != "start")
    ThrowError("bad graph header '", line, "'");
  auto n = static_cast<int32_t>(ParseInt(head[1], "state count"));
  auto start = static_cast<int32_t>(ParseInt(head[3], "start state"));
  if (n <= 0) ThrowError("bad state count");
  std::vector<FsaArc> arcs;
  std::vector<double> finals(n, kLogZero);
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    auto tok = SplitWhitespace(line);
    if (tok.empty()) continue;
    if (tok[0] == "final") {
      if (tok.size() != 3) ThrowError("graph line ", line_no, ": bad final line");
      auto s = ParseInt(tok[1], "state");
      if (s < 0 || s >= n) ThrowError("graph line ", line_no, ": bad state");
      finals[s] = ParseDouble(tok[2], "log weight");
    } else {
      if (tok.size() != 4) ThrowError("graph line ", line_no, ": bad arc line");
      arcs.push_back({static_cast<int32_t>(ParseInt(tok[0], "src")),
                      static_cast<int32_t>(ParseInt(tok[1], "dst")),
                      static_cast<SenoneId>(ParseInt(tok[2], "senone")),
                      ParseDouble(tok[3], "log weight")});
    }
  }
  return DenominatorFsa(n, start, std::move(arcs), std::move(finals));
}

TransitionModel TransitionModelFromGraph(const DenominatorFsa &fsa) {
  std::map<SenoneId, double> self_loop;
  for (int32_t s = 0; s < fsa.NumStates(); ++s) {
    SenoneId lab = fsa.StateLabel(s);
    if (lab < 0) continue;
    double p = 0.0;
    for (const auto &a : fsa.ArcsFrom(s))
      if (a.dst == s) p = std::exp(a.log_weight);
    auto [it, inserted] = self_loop.emplace(lab, p);
    if (!inserted && std::abs(it->second - p) > 1e-12)
      ThrowError("graph has inconsistent self-loops for senone ", lab);
  }
  return TransitionModel(std::move(self_loop));
}

DenominatorFsa Compile(const MixedHistoryLm &lm, const TransitionModel &tm,
                       const Inventory &inv) {
  return Compile(lm, tm, inv, nullptr);
}

DenominatorFsa Compile(const MixedHistoryLm &lm, const TransitionModel &tm,
                       const Inventory &inv,
                       std::vector<HistoryState> *state_histories) {
  if (lm.Empty()) ThrowError("Compile: empty language model");
  const int max_history = lm.MaxHistory();
  std::map<HistoryState, int32_t> state_of;
  std::vector<HistoryState> histories;
  std::deque<int32_t> queue;
  histories.push_back(HistoryState{});  // start
  state_of[HistoryState{}] = -1;        // BEGIN history is not an emitting state

  auto get_state = [&](const HistoryState &h) {
    auto [it, inserted] =
        state_of.emplace(h, static_cast<int32_t>(histories.size()));
    if (inserted) {
      histories.push_back(h);
      queue.push_back(it->second);
    }
    return it->second;
  };

  std::vector<FsaArc> arcs;
  std::vector<double> finals;
  std::vector<std::string> dangling;

  const HistoryState begin;
  if (!lm.HasHistory(begin)) ThrowError("Compile: LM has no BEGIN history");
  for (const auto &[s, p] : lm.Successors(begin)) {
    if (s == kEndSenone) continue;  // empty utterances cannot be emitted
    int32_t dst = get_state(AdvanceHistory(begin, s, inv, max_history));
    arcs.push_back({0, dst, s, std::log(p)});
  }

  while (!queue.empty()) {
    int32_t j = queue.front();
    queue.pop_front();
    const HistoryState h = histories[j];
    SenoneId label = h.current_senones.back();
    double self = tm.SelfLoop(label);
    double exit = 1.0 - self;
    if (self > 0.0) arcs.push_back({j, j, label, std::log(self)});
    if (!lm.HasHistory(h)) {
      dangling.push_back(FormatHistory(h, inv));
      continue;
    }
    for (const auto &[s, p] : lm.Successors(h)) {
      if (s == kEndSenone) {
        if (finals.size() <= static_cast<size_t>(j))
          finals.resize(j + 1, kLogZero);
        finals[j] = std::log(exit * p);
        continue;
      }
      int32_t dst = get_state(AdvanceHistory(h, s, inv, max_history));
      arcs.push_back({j, dst, s, std::log(exit * p)});
    }
  }
  if (!dangling.empty()) {
    std::string msg;
    for (const auto &d : dangling) msg += " " + d;
    ThrowError("Compile: dangling histories:", msg);
  }
  finals.resize(histories.size(), kLogZero);
  if (state_histories) *state_histories = histories;
  return DenominatorFsa(static_cast<int32_t>(histories.size()), 0,
                        std::move(arcs), std::move(finals));
}

size_t ValidationReport::Count(ValidationFinding::Kind kind) const {
  return std::count_if(findings.begin(), findings.end(),
                       [kind](const auto &f) { return f.kind == kind; });
}

ValidationReport Validate(const DenominatorFsa &fsa, double tol) {
  using Kind = ValidationFinding::Kind;
  ValidationReport report;
  const int32_t n = fsa.NumStates();
  for (int32_t s = 0; s < n; ++s) {
    double mass = fsa.FinalLogWeight(s) == kLogZero
                      ? 0.0
                      : std::exp(fsa.FinalLogWeight(s));
    for (const auto &a : fsa.ArcsFrom(s)) mass += std::exp(a.log_weight);
    if (std::abs(mass - 1.0) > tol)
      report.findings.push_back(
          {Kind::kStochasticity, s, "outgoing mass " + FormatDouble(mass)});
  }
  std::vector<char> reached(n, 0);
  std::vector<int32_t> stack = {fsa.Start()};
  reached[fsa.Start()] = 1;
  while (!stack.empty()) {
    int32_t s = stack.back();
    stack.pop_back();
    for (const auto &a : fsa.ArcsFrom(s))
      if (!reached[a.dst]) {
        reached[a.dst] = 1;
        stack.push_back(a.dst);
      }
  }
  // Co-reachability: walk the reversed graph from final states.
  std::vector<char> alive(n, 0);
  for (int32_t s = 0; s < n; ++s)
    if (fsa.FinalLogWeight(s) != kLogZero) {
      alive[s] = 1;
      stack.push_back(s);
    }
  const auto &in_off = fsa.InOffsets();
  const auto &in_arcs = fsa.InArcs();
  while (!stack.empty()) {
    int32_t s = stack.back();
    stack.pop_back();
    for (int32_t k = in_off[s]; k < in_off[s + 1]; ++k) {
      int32_t src = fsa.Arcs()[in_arcs[k]].src;
      if (!alive[src]) {
        alive[src] = 1;
        stack.push_back(src);
      }
    }
  }
  for (int32_t s = 0; s < n; ++s) {
    if (!reached[s])
      report.findings.push_back({Kind::kUnreachable, s, "unreachable from start"});
    if (!alive[s])
      report.findings.push_back({Kind::kDeadEnd, s, "cannot reach a final state"});
  }
  return report;
}

}  // namespace cts
