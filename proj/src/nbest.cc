// src/nbest.cc

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


#include "cts/nbest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cts/base.h"
#include "cts/parallel.h"
#include "cts/text-util.h"
#include "json.hpp"

namespace cts {

void Hypothesis::Check() const {
  if (oov_count < 0 || static_cast<size_t>(oov_count) > words.size())
    ThrowError("oov count ", oov_count, " out of range for ", words.size(),
               " words");
  for (const auto &[name, probs] : word_probs)
    if (probs.size() != words.size() + 1)
      ThrowError("stream ", name, " has ", probs.size(), " values for ",
                 words.size(), " words (expected ", words.size() + 1, ")");
}

std::vector<double> InterpolateWordProbs(
    std::span<const std::vector<double>> streams, std::span<const double> w) {
  if (streams.empty()) ThrowError("interpolation needs at least one stream");
  if (streams.size() != w.size())
    ThrowError("interpolation: ", streams.size(), " streams but ", w.size(),
               " weights");
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) ThrowError("interpolation weight ", x, " is negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    ThrowError("interpolation weights sum to ", sum, ", not 1");
  const size_t n = streams[0].size();
  for (const auto &s : streams)
    if (s.size() != n) ThrowError("interpolation: stream length mismatch");
  std::vector<double> out(n);
  for (size_t k = 0; k < n; ++k) {
    double m = kLogZero;
    for (size_t i = 0; i < streams.size(); ++i)
      if (w[i] > 0.0) m = std::max(m, streams[i][k]);
    if (m == kLogZero) {
      out[k] = kLogZero;
      continue;
    }
    double acc = 0.0;
    for (size_t i = 0; i < streams.size(); ++i)
      if (w[i] > 0.0) acc += w[i] * std::pow(10.0, streams[i][k] - m);
    out[k] = m + std::log10(acc);
  }
  return out;
}

double TotalScore(const Hypothesis &hyp, const ScoreWeights &w,
                  double lm_score) {
  return w.am * hyp.am_score + w.lm * lm_score + w.pron * hyp.pron_score +
         w.oov * hyp.oov_count + w.wip * static_cast<double>(hyp.words.size());
}

std::vector<std::string> LmPipeline::StreamNames() const {
  std::vector<std::string> out;
  for (const auto &s : forward) out.push_back(s.stream);
  for (const auto &s : backward) out.push_back(s.stream);
  return out;
}

namespace {

double DirectionScore(const Hypothesis &hyp,
                      const std::vector<StreamWeight> &dir) {
  std::vector<std::vector<double>> streams;
  std::vector<double> weights;
  for (const auto &sw : dir) {
    auto it = hyp.word_probs.find(sw.stream);
    if (it == hyp.word_probs.end())
      ThrowError("missing LM stream '", sw.stream, "'");
    if (it->second.size() != hyp.words.size() + 1)
      ThrowError("stream ", sw.stream, " length mismatch");
    streams.push_back(it->second);
    weights.push_back(sw.weight);
  }
  const size_t n = hyp.words.size() + 1;
  std::vector<bool> skip(n, false);
  int skipped = 0;
  for (size_t k = 0; k < n; ++k) {
    for (const auto &s : streams)
      if (s[k] == kLogZero) skip[k] = true;
    if (skip[k]) ++skipped;
  }
  if (skip[n - 1]) ThrowError("end token has zero probability");
  if (skipped > hyp.oov_count)
    ThrowError(skipped, " out-of-set positions but oov count is ",
               hyp.oov_count);
  auto p = InterpolateWordProbs(streams, weights);
  double sum = 0.0;
  for (size_t k = 0; k < n; ++k)
    if (!skip[k]) sum += p[k];
  return sum;
}

}  // namespace

double LmScore(const Hypothesis &hyp, const LmPipeline &lm) {
  if (lm.forward.empty()) {
    if (!lm.backward.empty())
      ThrowError("LM pipeline has backward streams but no forward streams");
    return hyp.ng_score;
  }
  double fwd = DirectionScore(hyp, lm.forward);
  double bwd = lm.backward.empty() ? 0.0 : DirectionScore(hyp, lm.backward);
  return CombineDirections(fwd, bwd);
}

std::vector<double> TotalScores(const NBestList &list, const ScoreWeights &w,
                                const LmPipeline &lm) {
  std::vector<double> out;
  out.reserve(list.hyps.size());
  for (const auto &h : list.hyps) out.push_back(TotalScore(h, w, LmScore(h, lm)));
  return out;
}

NBestList Rescore(const NBestList &list, const ScoreWeights &w,
                  const LmPipeline &lm) {
  auto totals = TotalScores(list, w, lm);
  std::vector<size_t> order(list.hyps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return totals[a] > totals[b]; });
  NBestList out;
  out.utt_id = list.utt_id;
  for (size_t i : order) out.hyps.push_back(list.hyps[i]);
  return out;
}

size_t BestIndex(std::span<const double> totals) {
  if (totals.empty()) ThrowError("empty N-best list");
  size_t best = 0;
  for (size_t i = 1; i < totals.size(); ++i)
    if (totals[i] > totals[best]) best = i;
  return best;
}

namespace {

constexpr int kNumFeatures = 5;  // am, lm, pron, oov, #words

struct DevCache {
  // Per list, per hypothesis.
  std::vector<std::vector<std::array<double, kNumFeatures>>> feats;
  std::vector<std::vector<ErrorCounts>> errors;
};

DevCache BuildCache(std::span<const NBestList> dev, const Transcripts &refs,
                    const LmPipeline &lm) {
  if (dev.empty()) ThrowError("empty dev set");
  DevCache c;
  for (const auto &list : dev) {
    if (list.hyps.empty()) ThrowError("empty N-best list for ", list.utt_id);
    auto ref = refs.find(list.utt_id);
    if (ref == refs.end()) ThrowError("no reference for ", list.utt_id);
    auto &f = c.feats.emplace_back();
    auto &e = c.errors.emplace_back();
    for (const auto &h : list.hyps) {
      f.push_back({h.am_score, LmScore(h, lm), h.pron_score,
                   static_cast<double>(h.oov_count),
                   static_cast<double>(h.words.size())});
      e.push_back(CountErrors(ref->second, h.words));
    }
  }
  return c;
}

ErrorCounts Evaluate(const DevCache &c,
                     const std::array<double, kNumFeatures> &w) {
  ErrorCounts total;
  for (size_t l = 0; l < c.feats.size(); ++l) {
    const auto &f = c.feats[l];
    size_t best = 0;
    double best_score = kLogZero;
    for (size_t h = 0; h < f.size(); ++h) {
      double s = 0.0;
      for (int k = 0; k < kNumFeatures; ++k) s += w[k] * f[h][k];
      if (h == 0 || s > best_score) best = h, best_score = s;
    }
    total += c.errors[l][best];
  }
  return total;
}

std::array<double, kNumFeatures> ToArray(const ScoreWeights &w) {
  return {w.am, w.lm, w.pron, w.oov, w.wip};
}

ScoreWeights FromArray(const std::array<double, kNumFeatures> &a) {
  return {a[0], a[1], a[2], a[3], a[4]};
}

std::vector<double> GlobalGrid() {
  std::vector<double> g{0.0};
  for (int k = -8; k <= 8; ++k) {
    double v = std::pow(10.0, 0.25 * k);
    g.push_back(v);
    g.push_back(-v);
  }
  return g;
}

// Strict "better" on (errors, |w|, negative-before-positive is worse).
bool Better(long long err, double w, long long best_err, double best_w) {
  if (err != best_err) return err < best_err;
  if (std::abs(w) != std::abs(best_w)) return std::abs(w) < std::abs(best_w);
  return w > best_w;
}

}  // namespace

ErrorCounts OneBestErrors(std::span<const NBestList> dev,
                          const Transcripts &refs, const ScoreWeights &w,
                          const LmPipeline &lm) {
  return Evaluate(BuildCache(dev, refs, lm), ToArray(w));
}

ErrorCounts OracleErrors(std::span<const NBestList> dev,
                         const Transcripts &refs) {
  ErrorCounts total;
  for (const auto &list : dev) {
    auto ref = refs.find(list.utt_id);
    if (ref == refs.end()) ThrowError("no reference for ", list.utt_id);
    ErrorCounts best;
    bool first = true;
    for (const auto &h : list.hyps) {
      auto e = CountErrors(ref->second, h.words);
      if (first || e.Errors() < best.Errors()) best = e, first = false;
    }
    total += best;
  }
  return total;
}

OptimizeResult OptimizeWeights(std::span<const NBestList> dev,
                               const Transcripts &refs, const LmPipeline &lm,
                               const ScoreWeights &start,
                               const OptimizeOptions &opts) {
  DevCache cache = BuildCache(dev, refs, lm);
  auto w = ToArray(start);
  w[0] = 1.0;
  OptimizeResult result;
  result.initial = Evaluate(cache, w);
  long long best_err = result.initial.Errors();
  const auto grid = GlobalGrid();
  for (int pass = 0; pass < opts.passes; ++pass) {
    for (int k = 1; k < kNumFeatures; ++k) {
      std::vector<double> cand = grid;
      cand.push_back(w[k]);
      if (pass > 0 && w[k] != 0.0) {
        double step = 0.25 / std::pow(2.0, pass);
        for (int j = -3; j <= 3; ++j)
          if (j != 0) cand.push_back(w[k] * std::pow(10.0, step * j));
      }
      std::vector<long long> errs(cand.size());
      ParallelFor(cand.size(), opts.num_threads, [&](size_t i) {
        auto trial = w;
        trial[k] = cand[i];
        errs[i] = Evaluate(cache, trial).Errors();
      });
      double best_w = w[k];
      long long err_k = best_err;
      for (size_t i = 0; i < cand.size(); ++i)
        if (Better(errs[i], cand[i], err_k, best_w))
          err_k = errs[i], best_w = cand[i];
      w[k] = best_w;
      best_err = err_k;
    }
  }
  result.weights = FromArray(w);
  result.final = Evaluate(cache, w);
  return result;
}

std::vector<NBestList> ReadNBest(std::istream &is, const std::string &name) {
  std::vector<NBestList> out;
  std::string line;
  size_t lineno = 0;
  auto next_line = [&]() {
    while (std::getline(is, line)) {
      ++lineno;
      if (!SplitWhitespace(line).empty()) return true;
    }
    return false;
  };
  while (next_line()) {
    auto head = SplitWhitespace(line);
    if (head.size() != 2)
      ThrowError(name, ":", lineno, ": expected `utt_id N` header");
    NBestList list;
    list.utt_id = head[0];
    long long n = ParseInt(head[1], "hypothesis count");
    if (n <= 0) ThrowError(name, ":", lineno, ": empty N-best list");
    for (long long i = 0; i < n; ++i) {
      if (!next_line())
        ThrowError(name, ": truncated list for ", list.utt_id);
      auto tok = SplitWhitespace(line);
      if (tok.size() < 4)
        ThrowError(name, ":", lineno, ": expected `am ng pron oov words`");
      Hypothesis h;
      h.am_score = ParseDouble(tok[0], "am score");
      h.ng_score = ParseDouble(tok[1], "ngram score");
      h.pron_score = ParseDouble(tok[2], "pron score");
      h.oov_count = static_cast<int>(ParseInt(tok[3], "oov count"));
      h.words.assign(tok.begin() + 4, tok.end());
      try {
        h.Check();
      } catch (const Error &e) {
        ThrowError(name, ":", lineno, ": ", e.what());
      }
      list.hyps.push_back(std::move(h));
    }
    out.push_back(std::move(list));
  }
  return out;
}

std::vector<NBestList> ReadNBestFile(const std::string &path) {
  auto is = OpenInput(path);
  return ReadNBest(is, path);
}

void WriteNBest(std::span<const NBestList> lists, std::ostream &os) {
  for (const auto &l : lists) {
    os << l.utt_id << ' ' << l.hyps.size() << '\n';
    for (const auto &h : l.hyps) {
      os << FormatDouble(h.am_score) << ' ' << FormatDouble(h.ng_score) << ' '
         << FormatDouble(h.pron_score) << ' ' << h.oov_count;
      for (const auto &w : h.words) os << ' ' << w;
      os << '\n';
    }
  }
}

void AttachStream(std::vector<NBestList> &lists, const std::string &name,
                  std::istream &is, const std::string &file_name) {
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < lists.size(); ++i) index[lists[i].utt_id] = i;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto tok = SplitWhitespace(line);
    if (tok.empty()) continue;
    if (tok.size() < 3)
      ThrowError(file_name, ":", lineno, ": expected `utt_id idx p1 ...`");
    auto it = index.find(tok[0]);
    if (it == index.end())
      ThrowError(file_name, ":", lineno, ": unknown utterance ", tok[0]);
    auto &list = lists[it->second];
    long long h = ParseInt(tok[1], "hypothesis index");
    if (h < 0 || static_cast<size_t>(h) >= list.hyps.size())
      ThrowError(file_name, ":", lineno, ": hypothesis index ", h,
                 " out of range");
    Hypothesis &hyp = list.hyps[h];
    if (hyp.word_probs.count(name))
      ThrowError(file_name, ":", lineno, ": duplicate entry for ", tok[0], " ",
                 h);
    std::vector<double> p;
    for (size_t k = 2; k < tok.size(); ++k)
      p.push_back(ParseDouble(tok[k], "log10 probability"));
    if (p.size() != hyp.words.size() + 1)
      ThrowError(file_name, ":", lineno, ": ", p.size(), " values for ",
                 hyp.words.size(), " words (expected ", hyp.words.size() + 1,
                 ")");
    hyp.word_probs[name] = std::move(p);
  }
  for (const auto &l : lists)
    for (size_t h = 0; h < l.hyps.size(); ++h)
      if (!l.hyps[h].word_probs.count(name))
        ThrowError("stream ", name, " has no entry for ", l.utt_id, " ", h);
}

void AttachStreamFile(std::vector<NBestList> &lists, const std::string &name,
                      const std::string &path) {
  auto is = OpenInput(path);
  AttachStream(lists, name, is, path);
}

void WriteStream(std::span<const NBestList> lists, const std::string &name,
                 std::ostream &os) {
  for (const auto &l : lists)
    for (size_t h = 0; h < l.hyps.size(); ++h) {
      auto it = l.hyps[h].word_probs.find(name);
      if (it == l.hyps[h].word_probs.end())
        ThrowError("stream ", name, " missing for ", l.utt_id, " ", h);
      os << l.utt_id << ' ' << h;
      for (double p : it->second) os << ' ' << FormatDouble(p);
      os << '\n';
    }
}

std::string WeightsToJson(const ScoreWeights &w, const LmPipeline &lm) {
  nlohmann::ordered_json j;
  j["am"] = w.am;
  j["lm"] = w.lm;
  j["pron"] = w.pron;
  j["oov"] = w.oov;
  j["wip"] = w.wip;
  auto dir = [](const std::vector<StreamWeight> &v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto &s : v)
      a.push_back({{"stream", s.stream}, {"weight", s.weight}});
    return a;
  };
  j["lm_pipeline"]["forward"] = dir(lm.forward);
  j["lm_pipeline"]["backward"] = dir(lm.backward);
  return j.dump(2) + "\n";
}

void WeightsFromJson(const std::string &text, ScoreWeights *w,
                     LmPipeline *lm) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    ScoreWeights out;
    out.am = j.value("am", 1.0);
    out.lm = j.value("lm", 1.0);
    out.pron = j.value("pron", 0.0);
    out.oov = j.value("oov", 0.0);
    out.wip = j.value("wip", 0.0);
    if (out.am != 1.0) ThrowError("weights: am weight is fixed to 1");
    LmPipeline p;
    if (j.contains("lm_pipeline")) {
      const auto &jp = j["lm_pipeline"];
      for (const char *key : {"forward", "backward"}) {
        if (!jp.contains(key)) continue;
        auto &dst = std::string(key) == "forward" ? p.forward : p.backward;
        for (const auto &e : jp[key])
          dst.push_back({e.at("stream").get<std::string>(),
                         e.at("weight").get<double>()});
      }
    }
    if (w) *w = out;
    if (lm) *lm = p;
  } catch (const nlohmann::json::exception &e) {
    ThrowError("weights: ", e.what());
  }
}

}  // namespace cts
