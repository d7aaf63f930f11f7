// src/ngram.cc

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


#include "cts/ngram.h"

#include <cmath>

#include "cts/base.h"

namespace cts {

WittenBellLm::WittenBellLm(const std::vector<WordSeq> &sentences, int order)
    : order_(order) {
  if (order < 1) ThrowError("N-gram order must be >= 1");
  vocab_.insert(kEos);
  vocab_.insert(kUnk);
  for (const auto &s : sentences)
    for (const auto &w : s) vocab_.insert(w);
  for (const auto &s : sentences) {
    WordSeq padded(order - 1, kBos);
    padded.insert(padded.end(), s.begin(), s.end());
    padded.push_back(kEos);
    for (size_t i = order - 1; i < padded.size(); ++i) {
      for (int n = 0; n < order; ++n) {
        WordSeq ctx(padded.begin() + (i - n), padded.begin() + i);
        Node &node = nodes_[ctx];
        ++node.next[padded[i]];
        ++node.total;
      }
    }
  }
}

std::string WittenBellLm::Map(const std::string &w) const {
  return vocab_.count(w) ? w : std::string(kUnk);
}

// P(word | context[start:]) interpolated down to the uniform distribution.
double WittenBellLm::ProbAt(const WordSeq &context, size_t start,
                            const std::string &word) const {
  double lower = start < context.size()
                     ? ProbAt(context, start + 1, word)
                     : 1.0 / static_cast<double>(vocab_.size());
  WordSeq ctx(context.begin() + start, context.end());
  if (start == context.size()) ctx.clear();
  auto it = nodes_.find(ctx);
  if (it == nodes_.end() || it->second.total == 0) return lower;
  const Node &node = it->second;
  double types = static_cast<double>(node.next.size());
  double total = static_cast<double>(node.total);
  auto c = node.next.find(word);
  double count = c == node.next.end() ? 0.0 : static_cast<double>(c->second);
  return (count + types * lower) / (total + types);
}

double WittenBellLm::LogProb(const WordSeq &history,
                             const std::string &word) const {
  WordSeq ctx;
  for (int k = order_ - 1; k >= 1; --k) {
    long long idx = static_cast<long long>(history.size()) - k;
    ctx.push_back(idx >= 0 ? Map(history[idx]) : std::string(kBos));
  }
  // Seen contexts are a prefix-closed set; drop leading words until found.
  size_t start = 0;
  while (start < ctx.size() && !nodes_.count(WordSeq(ctx.begin() + start,
                                                     ctx.end())))
    ++start;
  return std::log(ProbAt(ctx, start, Map(word)));
}

std::vector<double> WittenBellLm::SentenceLog10Probs(
    const WordSeq &words) const {
  std::vector<double> out;
  out.reserve(words.size() + 1);
  WordSeq hist;
  for (size_t i = 0; i <= words.size(); ++i) {
    const std::string &w = i < words.size() ? words[i] : std::string(kEos);
    out.push_back(LogProb(hist, w) / std::log(10.0));
    if (i < words.size()) hist.push_back(words[i]);
  }
  return out;
}

}  // namespace cts
