// cts/ngram.h

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


#ifndef CTS_NGRAM_H_
#define CTS_NGRAM_H_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "cts/scoring.h"

namespace cts {

/// Small backoff word N-gram with interpolated Witten-Bell smoothing.  The
/// predicted vocabulary is the training words plus "</s>" and "<unk>"; any
/// word not seen in training is scored as "<unk>", so every sentence has a
/// finite probability.  The lowest level interpolates with the uniform
/// distribution over that vocabulary.
class WittenBellLm {
 public:
  static constexpr const char *kBos = "<s>";
  static constexpr const char *kEos = "</s>";
  static constexpr const char *kUnk = "<unk>";

  WittenBellLm(const std::vector<WordSeq> &sentences, int order);

  int Order() const { return order_; }
  size_t VocabSize() const { return vocab_.size(); }
  const std::set<std::string> &Vocab() const { return vocab_; }
  bool InVocab(const std::string &w) const { return vocab_.count(w) > 0; }

  /// Natural-log P(word | history); only the last order-1 history words
  /// are used.
  double LogProb(const WordSeq &history, const std::string &word) const;

  /// log10 probabilities of each word and then of "</s>" (n + 1 values).
  std::vector<double> SentenceLog10Probs(const WordSeq &words) const;

 private:
  struct Node {
    std::map<std::string, long long> next;
    long long total = 0;
  };
  std::string Map(const std::string &w) const;
  double ProbAt(const WordSeq &context, size_t start,
                const std::string &word) const;

  int order_;
  std::set<std::string> vocab_;
  std::map<WordSeq, Node> nodes_;  // context (length 0..order-1) -> counts
};

}  // namespace cts

#endif  // CTS_NGRAM_H_
