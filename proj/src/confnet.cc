// src/confnet.cc

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


#include "cts/confnet.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cts/base.h"
#include "cts/parallel.h"
#include "cts/text-util.h"

namespace cts {

void ConfusionNetwork::Check(double tol) const {
  for (size_t i = 0; i < slots.size(); ++i) {
    double sum = 0.0, real = 0.0;
    for (const auto &[w, p] : slots[i]) {
      if (!(p >= 0.0)) ThrowError(utt_id, " slot ", i, ": bad posterior ", p);
      sum += p;
      if (w != kNullWord) real += p;
    }
    if (std::abs(sum - 1.0) > tol)
      ThrowError(utt_id, " slot ", i, " sums to ", sum);
    if (real == 0.0) ThrowError(utt_id, " slot ", i, " holds only the null word");
  }
}

std::vector<double> HypPosteriors(std::span<const double> scores,
                                  double scale) {
  if (!(scale > 0.0)) ThrowError("posterior scale must be positive");
  std::vector<double> out(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) out[i] = scale * scores[i];
  double lse = LogSumExp(out);
  for (double &x : out) x = std::exp(x - lse);
  return out;
}

namespace {

double Get(const SlotDist &d, const std::string &w) {
  auto it = d.find(w);
  return it == d.end() ? 0.0 : it->second;
}

enum class AlignOp { kMatch, kSkipSlot, kInsert };

struct AlignStep {
  AlignOp op;
  int slot;  // -1 for kInsert
  int item;  // -1 for kSkipSlot
};

// Minimum-cost monotone alignment of items to slots.  Ties prefer a match,
// then skipping a slot, then inserting an item.
template <typename MatchCost, typename SkipCost, typename InsCost>
std::vector<AlignStep> AlignToSlots(size_t n, size_t m, MatchCost match,
                                    SkipCost skip, InsCost ins) {
  std::vector<double> d((n + 1) * (m + 1));
  auto D = [&](size_t i, size_t j) -> double & { return d[i * (m + 1) + j]; };
  std::vector<double> skip_c(n), ins_c(m);
  for (size_t i = 0; i < n; ++i) skip_c[i] = skip(i);
  for (size_t j = 0; j < m; ++j) ins_c[j] = ins(j);
  std::vector<double> match_c(n * m);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < m; ++j) match_c[i * m + j] = match(i, j);
  D(0, 0) = 0.0;
  for (size_t i = 1; i <= n; ++i) D(i, 0) = D(i - 1, 0) + skip_c[i - 1];
  for (size_t j = 1; j <= m; ++j) D(0, j) = D(0, j - 1) + ins_c[j - 1];
  for (size_t i = 1; i <= n; ++i)
    for (size_t j = 1; j <= m; ++j)
      D(i, j) = std::min({D(i - 1, j - 1) + match_c[(i - 1) * m + j - 1],
                          D(i - 1, j) + skip_c[i - 1],
                          D(i, j - 1) + ins_c[j - 1]});
  std::vector<AlignStep> steps;
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        D(i, j) == D(i - 1, j - 1) + match_c[(i - 1) * m + j - 1]) {
      steps.push_back({AlignOp::kMatch, static_cast<int>(i - 1),
                       static_cast<int>(j - 1)});
      --i, --j;
    } else if (i > 0 && D(i, j) == D(i - 1, j) + skip_c[i - 1]) {
      steps.push_back({AlignOp::kSkipSlot, static_cast<int>(i - 1), -1});
      --i;
    } else {
      CTS_ASSERT(j > 0);
      steps.push_back({AlignOp::kInsert, -1, static_cast<int>(j - 1)});
      --j;
    }
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

// Divides by `total` and drops slots without non-null mass.  `keep`
// receives the surviving slot indices.
std::vector<SlotDist> Normalize(const std::vector<SlotDist> &mass, double total,
                                std::vector<size_t> *keep) {
  std::vector<SlotDist> out;
  for (size_t i = 0; i < mass.size(); ++i) {
    double real = 0.0;
    for (const auto &[w, p] : mass[i])
      if (w != kNullWord) real += p;
    if (real <= 0.0) continue;
    SlotDist s;
    for (const auto &[w, p] : mass[i])
      if (p > 0.0) s[w] = p / total;
    out.push_back(std::move(s));
    if (keep) keep->push_back(i);
  }
  return out;
}

std::string CnText(const ConfusionNetwork &cn) {
  std::ostringstream os;
  WriteCns(std::span<const ConfusionNetwork>(&cn, 1), os);
  return os.str();
}

}  // namespace

ConfusionNetwork BuildCn(const NBestList &list,
                         std::span<const double> posteriors) {
  if (list.hyps.empty()) ThrowError("BuildCn: empty N-best list");
  if (posteriors.size() != list.hyps.size())
    ThrowError("BuildCn: ", posteriors.size(), " posteriors for ",
               list.hyps.size(), " hypotheses");
  std::vector<size_t> order(list.hyps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return posteriors[a] > posteriors[b];
  });
  std::vector<SlotDist> mass;
  double total = 0.0;
  for (size_t idx : order) {
    const WordSeq &words = list.hyps[idx].words;
    const double p = posteriors[idx];
    if (!(p >= 0.0)) ThrowError("BuildCn: negative posterior");
    auto prob = [&](size_t i, const std::string &w) {
      return total > 0.0 ? Get(mass[i], w) / total : 0.0;
    };
    auto steps = AlignToSlots(
        mass.size(), words.size(),
        [&](size_t i, size_t j) { return 1.0 - prob(i, words[j]); },
        [&](size_t i) { return 1.0 - prob(i, kNullWord); },
        [&](size_t) { return 1.0; });
    std::vector<SlotDist> next;
    next.reserve(steps.size());
    for (const AlignStep &s : steps) {
      if (s.op == AlignOp::kMatch) {
        next.push_back(std::move(mass[s.slot]));
        next.back()[words[s.item]] += p;
      } else if (s.op == AlignOp::kSkipSlot) {
        next.push_back(std::move(mass[s.slot]));
        next.back()[kNullWord] += p;
      } else {
        SlotDist d;
        if (total > 0.0) d[kNullWord] = total;
        d[words[s.item]] += p;
        next.push_back(std::move(d));
      }
    }
    mass = std::move(next);
    total += p;
  }
  if (!(total > 0.0)) ThrowError("BuildCn: posteriors sum to zero");
  ConfusionNetwork cn;
  cn.utt_id = list.utt_id;
  cn.slots = Normalize(mass, total, nullptr);
  return cn;
}

CombinedCn CombineDetailed(std::span<const ConfusionNetwork> cns,
                           std::span<const double> weights) {
  if (cns.empty()) ThrowError("Combine: no systems");
  if (cns.size() != weights.size())
    ThrowError("Combine: ", cns.size(), " networks but ", weights.size(),
               " weights");
  for (const auto &cn : cns)
    if (cn.utt_id != cns[0].utt_id)
      ThrowError("Combine: utterance mismatch ", cn.utt_id, " vs ",
                 cns[0].utt_id);
  const size_t K = cns.size();
  std::vector<std::string> text(K);
  std::vector<size_t> order;
  for (size_t k = 0; k < K; ++k) {
    if (!(weights[k] >= 0.0)) ThrowError("Combine: negative weight");
    if (weights[k] > 0.0) order.push_back(k);
    text[k] = CnText(cns[k]);
  }
  if (order.empty()) ThrowError("Combine: all weights are zero");
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    if (text[a] != text[b]) return text[a] < text[b];
    return a < b;
  });

  const SlotDist null_slot{{kNullWord, 1.0}};
  std::vector<SlotDist> mass;
  std::vector<std::vector<SlotDist>> sys;
  double total = 0.0;
  for (size_t k : order) {
    const auto &q = cns[k].slots;
    const double wk = weights[k];
    auto steps = AlignToSlots(
        mass.size(), q.size(),
        [&](size_t i, size_t j) {
          double overlap = 0.0;
          for (const auto &[w, pq] : q[j])
            overlap += std::min(Get(mass[i], w) / total, pq);
          return 1.0 - overlap;
        },
        [&](size_t i) { return 1.0 - Get(mass[i], kNullWord) / total; },
        [&](size_t j) { return 1.0 - Get(q[j], kNullWord); });
    std::vector<SlotDist> next;
    std::vector<std::vector<SlotDist>> next_sys;
    for (const AlignStep &s : steps) {
      if (s.op == AlignOp::kInsert) {
        SlotDist d;
        if (total > 0.0) d[kNullWord] = total;
        for (const auto &[w, p] : q[s.item]) d[w] += wk * p;
        next.push_back(std::move(d));
        next_sys.emplace_back(K, null_slot);
        next_sys.back()[k] = q[s.item];
        continue;
      }
      next.push_back(std::move(mass[s.slot]));
      next_sys.push_back(std::move(sys[s.slot]));
      if (s.op == AlignOp::kMatch) {
        for (const auto &[w, p] : q[s.item]) next.back()[w] += wk * p;
        next_sys.back()[k] = q[s.item];
      } else {
        next.back()[kNullWord] += wk;
      }
    }
    mass = std::move(next);
    sys = std::move(next_sys);
    total += wk;
  }
  CombinedCn out;
  out.cn.utt_id = cns[0].utt_id;
  std::vector<size_t> keep;
  out.cn.slots = Normalize(mass, total, &keep);
  for (size_t i : keep) out.system_slots.push_back(std::move(sys[i]));
  return out;
}

ConfusionNetwork Combine(std::span<const ConfusionNetwork> cns,
                         std::span<const double> weights) {
  return CombineDetailed(cns, weights).cn;
}

WordSeq DecodeCn(const ConfusionNetwork &cn) {
  WordSeq out;
  for (const auto &slot : cn.slots) {
    const std::string *best = nullptr;
    double best_p = -1.0;
    // Map order is lexicographic, so strict > keeps the smallest on ties.
    for (const auto &[w, p] : slot)
      if (p > best_p) best = &w, best_p = p;
    if (best && *best != kNullWord) out.push_back(*best);
  }
  return out;
}

namespace {

void CheckSystems(const SystemCns &systems, std::span<const size_t> members) {
  if (systems.empty()) ThrowError("no systems");
  for (size_t k : members)
    if (k >= systems.size()) ThrowError("system index ", k, " out of range");
  for (const auto &s : systems) {
    if (s.size() != systems[0].size())
      ThrowError("systems cover different numbers of utterances");
    for (size_t u = 0; u < s.size(); ++u)
      if (s[u].utt_id != systems[0][u].utt_id)
        ThrowError("systems disagree on utterance order at ", u, ": ",
                   s[u].utt_id, " vs ", systems[0][u].utt_id);
  }
}

std::vector<ConfusionNetwork> Gather(const SystemCns &systems,
                                     std::span<const size_t> members,
                                     size_t u) {
  std::vector<ConfusionNetwork> out;
  for (size_t k : members) out.push_back(systems[k][u]);
  return out;
}

double EmObjective(const std::vector<std::vector<double>> &obs,
                   const std::vector<double> &w) {
  double l = 0.0;
  for (const auto &q : obs) {
    double s = 0.0;
    for (size_t k = 0; k < w.size(); ++k) s += w[k] * q[k];
    l += std::log(s);
  }
  return l;
}

}  // namespace

EmResult EmWeights(const SystemCns &systems, std::span<const size_t> members,
                   const Transcripts &refs, const EmOptions &opts) {
  if (members.empty()) ThrowError("EmWeights: no systems");
  CheckSystems(systems, members);
  const size_t K = members.size();
  const std::vector<double> uniform(K, 1.0 / static_cast<double>(K));
  // Each observation: P_k(reference word) for every member k.
  std::vector<std::vector<double>> obs;
  for (size_t u = 0; u < systems[0].size(); ++u) {
    const std::string &utt = systems[0][u].utt_id;
    auto ref_it = refs.find(utt);
    if (ref_it == refs.end()) ThrowError("EmWeights: no reference for ", utt);
    const WordSeq &ref = ref_it->second;
    auto comb = CombineDetailed(Gather(systems, members, u), uniform);
    const auto &slots = comb.cn.slots;
    auto steps = AlignToSlots(
        slots.size(), ref.size(),
        [&](size_t i, size_t j) { return 1.0 - Get(slots[i], ref[j]); },
        [&](size_t i) { return 1.0 - Get(slots[i], kNullWord); },
        [&](size_t) { return 1.0; });
    for (const AlignStep &s : steps) {
      if (s.op == AlignOp::kInsert) continue;
      const std::string &word =
          s.op == AlignOp::kMatch ? ref[s.item] : std::string(kNullWord);
      std::vector<double> q(K);
      double any = 0.0;
      for (size_t k = 0; k < K; ++k) {
        q[k] = Get(comb.system_slots[s.slot][k], word);
        any += q[k];
      }
      if (any > 0.0) obs.push_back(std::move(q));
    }
  }
  if (obs.empty()) ThrowError("EmWeights: no slots covered by the reference");

  EmResult res;
  res.observations = obs.size();
  std::vector<double> w = uniform;
  double l = EmObjective(obs, w);
  res.log_scores.push_back(l);
  for (int it = 0; it < opts.max_iterations; ++it) {
    std::vector<double> acc(K, 0.0);
    for (const auto &q : obs) {
      double s = 0.0;
      for (size_t k = 0; k < K; ++k) s += w[k] * q[k];
      for (size_t k = 0; k < K; ++k) acc[k] += w[k] * q[k] / s;
    }
    double delta = 0.0;
    std::vector<double> nw(K);
    for (size_t k = 0; k < K; ++k) {
      nw[k] = acc[k] / static_cast<double>(obs.size());
      delta = std::max(delta, std::abs(nw[k] - w[k]));
    }
    w = std::move(nw);
    double nl = EmObjective(obs, w);
    if (nl < l - 1e-9 * std::max(1.0, std::abs(l)))
      ThrowError("EmWeights: objective decreased from ", l, " to ", nl);
    l = nl;
    res.log_scores.push_back(l);
    res.iterations = it + 1;
    if (delta < opts.tolerance) break;
  }
  res.weights = std::move(w);
  return res;
}

std::vector<ConfusionNetwork> CombineSystems(const SystemCns &systems,
                                             std::span<const size_t> members,
                                             std::span<const double> weights) {
  CheckSystems(systems, members);
  if (members.size() != weights.size())
    ThrowError("CombineSystems: members and weights differ in size");
  std::vector<ConfusionNetwork> out;
  for (size_t u = 0; u < systems[0].size(); ++u)
    out.push_back(Combine(Gather(systems, members, u), weights));
  return out;
}

ErrorCounts CnErrors(std::span<const ConfusionNetwork> cns,
                     const Transcripts &refs) {
  Transcripts hyps;
  for (const auto &cn : cns)
    if (!hyps.emplace(cn.utt_id, DecodeCn(cn)).second)
      ThrowError("duplicate utterance ", cn.utt_id);
  return CorpusWer(refs, hyps);
}

GreedyResult GreedySelect(const SystemCns &candidates, const Transcripts &refs,
                          const GreedyOptions &opts) {
  if (candidates.empty()) ThrowError("GreedySelect: no candidates");
  CheckSystems(candidates, {});
  GreedyResult res;
  size_t seed = 0;
  for (size_t k = 0; k < candidates.size(); ++k) {
    res.single.push_back(CnErrors(candidates[k], refs));
    if (res.single[k].Errors() < res.single[seed].Errors()) seed = k;
  }
  SystemSet cur{{seed}, {1.0}, res.single[seed]};
  res.trace.push_back(cur);
  while (cur.members.size() < candidates.size()) {
    std::vector<size_t> rest;
    for (size_t k = 0; k < candidates.size(); ++k)
      if (std::find(cur.members.begin(), cur.members.end(), k) ==
          cur.members.end())
        rest.push_back(k);
    std::vector<SystemSet> trial(rest.size());
    ParallelFor(rest.size(), opts.num_threads, [&](size_t r) {
      SystemSet s;
      s.members = cur.members;
      s.members.push_back(rest[r]);
      auto em = EmWeights(candidates, s.members, refs, opts.em);
      s.weights.resize(s.members.size());
      for (size_t i = 0; i < s.members.size(); ++i) {
        double prev = i < cur.weights.size() ? cur.weights[i] : 0.0;
        s.weights[i] = opts.mu * em.weights[i] + (1.0 - opts.mu) * prev;
      }
      s.errors = CnErrors(CombineSystems(candidates, s.members, s.weights),
                          refs);
      trial[r] = std::move(s);
    });
    size_t best = 0;
    for (size_t r = 1; r < trial.size(); ++r)
      if (trial[r].errors.Errors() < trial[best].errors.Errors()) best = r;
    if (trial[best].errors.Errors() >= cur.errors.Errors()) break;
    cur = trial[best];
    res.trace.push_back(cur);
  }
  res.best = cur;
  return res;
}

std::vector<ConfusionNetwork> ReadCns(std::istream &is,
                                      const std::string &name) {
  std::vector<ConfusionNetwork> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto head = SplitWhitespace(line);
    if (head.empty()) continue;
    if (head.size() != 2)
      ThrowError(name, ":", lineno, ": expected `utt_id num_slots`");
    ConfusionNetwork cn;
    cn.utt_id = head[0];
    long long n = ParseInt(head[1], "slot count");
    if (n < 0) ThrowError(name, ":", lineno, ": negative slot count");
    for (long long i = 0; i < n; ++i) {
      if (!std::getline(is, line))
        ThrowError(name, ": truncated network for ", cn.utt_id);
      ++lineno;
      SlotDist slot;
      for (const auto &tok : SplitWhitespace(line)) {
        size_t colon = tok.rfind(':');
        if (colon == std::string::npos || colon == 0)
          ThrowError(name, ":", lineno, ": bad entry '", tok, "'");
        std::string word = tok.substr(0, colon);
        double p = ParseDouble(tok.substr(colon + 1), "posterior");
        if (!slot.emplace(word, p).second)
          ThrowError(name, ":", lineno, ": repeated word ", word);
      }
      if (slot.empty()) ThrowError(name, ":", lineno, ": empty slot");
      cn.slots.push_back(std::move(slot));
    }
    out.push_back(std::move(cn));
  }
  return out;
}

std::vector<ConfusionNetwork> ReadCnsFile(const std::string &path) {
  auto is = OpenInput(path);
  return ReadCns(is, path);
}

void WriteCns(std::span<const ConfusionNetwork> cns, std::ostream &os) {
  for (const auto &cn : cns) {
    os << cn.utt_id << ' ' << cn.slots.size() << '\n';
    for (const auto &slot : cn.slots) {
      bool first = true;
      for (const auto &[w, p] : slot) {
        os << (first ? "" : " ") << w << ':' << FormatDouble(p);
        first = false;
      }
      os << '\n';
    }
  }
}

}  // namespace cts
