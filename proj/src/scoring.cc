// src/scoring.cc

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


#include "cts/scoring.h"

#include <algorithm>
#include <cstdio>

#include "cts/base.h"
#include "cts/text-util.h"

namespace cts {

double ErrorCounts::Wer() const {
  if (reference_words <= 0) ThrowError("WER undefined: no reference words");
  return static_cast<double>(Errors()) / static_cast<double>(reference_words);
}

ErrorCounts &ErrorCounts::operator+=(const ErrorCounts &o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  reference_words += o.reference_words;
  return *this;
}

std::vector<EditStep> AlignWords(const WordSeq &ref, const WordSeq &hyp) {
  const size_t n = ref.size(), m = hyp.size();
  // d[i][j] = distance between ref[0,i) and hyp[0,j).
  std::vector<int> d((n + 1) * (m + 1));
  auto D = [&](size_t i, size_t j) -> int & { return d[i * (m + 1) + j]; };
  for (size_t i = 0; i <= n; ++i) D(i, 0) = static_cast<int>(i);
  for (size_t j = 0; j <= m; ++j) D(0, j) = static_cast<int>(j);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      int diag = D(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      D(i, j) = std::min({diag, D(i - 1, j) + 1, D(i, j - 1) + 1});
    }
  }
  std::vector<EditStep> script;
  script.reserve(std::max(n, m));
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      bool same = ref[i - 1] == hyp[j - 1];
      if (D(i, j) == D(i - 1, j - 1) + (same ? 0 : 1)) {
        script.push_back({same ? EditOp::kMatch : EditOp::kSubstitution,
                          static_cast<int>(i - 1), static_cast<int>(j - 1)});
        --i, --j;
        continue;
      }
    }
    if (i > 0 && D(i, j) == D(i - 1, j) + 1) {
      script.push_back({EditOp::kDeletion, static_cast<int>(i - 1), -1});
      --i;
    } else {
      script.push_back({EditOp::kInsertion, -1, static_cast<int>(j - 1)});
      --j;
    }
  }
  std::reverse(script.begin(), script.end());
  return script;
}

int EditDistance(const WordSeq &ref, const WordSeq &hyp) {
  std::vector<int> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (size_t j = 0; j <= hyp.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= hyp.size(); ++j)
      cur[j] = std::min({prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1),
                         prev[j] + 1, cur[j - 1] + 1});
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

ErrorCounts CountErrors(const std::vector<EditStep> &script) {
  ErrorCounts c;
  for (const EditStep &s : script) {
    switch (s.op) {
      case EditOp::kMatch: ++c.reference_words; break;
      case EditOp::kSubstitution: ++c.substitutions, ++c.reference_words; break;
      case EditOp::kDeletion: ++c.deletions, ++c.reference_words; break;
      case EditOp::kInsertion: ++c.insertions; break;
    }
  }
  return c;
}

ErrorCounts CountErrors(const WordSeq &ref, const WordSeq &hyp) {
  return CountErrors(AlignWords(ref, hyp));
}

ErrorCounts CorpusWer(const Transcripts &refs, const Transcripts &hyps) {
  for (const auto &[utt, words] : hyps)
    if (!refs.count(utt)) ThrowError("hypothesis for unknown utterance ", utt);
  ErrorCounts total;
  for (const auto &[utt, ref] : refs) {
    auto it = hyps.find(utt);
    if (it == hyps.end()) ThrowError("missing hypothesis for utterance ", utt);
    total += CountErrors(ref, it->second);
  }
  return total;
}

std::string FormatErrorCounts(const ErrorCounts &c) {
  char rate[32];
  std::snprintf(rate, sizeof(rate), "%.6f", c.Wer());
  return std::string("WER ") + rate + " S " + std::to_string(c.substitutions) +
         " D " + std::to_string(c.deletions) + " I " +
         std::to_string(c.insertions) + " N " +
         std::to_string(c.reference_words);
}

Transcripts ReadTranscripts(std::istream &is, const std::string &name) {
  Transcripts out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto toks = SplitWhitespace(line);
    if (toks.empty()) continue;
    std::string utt = toks[0];
    toks.erase(toks.begin());
    if (!out.emplace(utt, std::move(toks)).second)
      ThrowError(name, ":", lineno, ": duplicate utterance ", utt);
  }
  return out;
}

Transcripts ReadTranscriptsFile(const std::string &path) {
  auto is = OpenInput(path);
  return ReadTranscripts(is, path);
}

void WriteTranscripts(const Transcripts &t, std::ostream &os) {
  for (const auto &[utt, words] : t) {
    os << utt;
    for (const auto &w : words) os << ' ' << w;
    os << '\n';
  }
}

}  // namespace cts
