// cts/scoring.h

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


#ifndef CTS_SCORING_H_
#define CTS_SCORING_H_

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace cts {

using WordSeq = std::vector<std::string>;

/// utt_id -> words.  Ordered so iteration (and hence output) is stable.
using Transcripts = std::map<std::string, WordSeq>;

enum class EditOp { kMatch, kSubstitution, kDeletion, kInsertion };

struct EditStep {
  EditOp op;
  int ref_index;  // -1 for insertions
  int hyp_index;  // -1 for deletions
};

struct ErrorCounts {
  long long substitutions = 0;
  long long deletions = 0;
  long long insertions = 0;
  long long reference_words = 0;

  long long Errors() const { return substitutions + deletions + insertions; }
  /// Throws if reference_words is zero.
  double Wer() const;
  ErrorCounts &operator+=(const ErrorCounts &o);
  friend bool operator==(const ErrorCounts &, const ErrorCounts &) = default;
};

/// Unit-cost Levenshtein alignment.  When several scripts reach the minimum
/// the backtrace (from the end of both strings) takes a match/substitution
/// first, then a deletion, then an insertion.
std::vector<EditStep> AlignWords(const WordSeq &ref, const WordSeq &hyp);

/// Only the distance; O(min) memory.
int EditDistance(const WordSeq &ref, const WordSeq &hyp);

ErrorCounts CountErrors(const std::vector<EditStep> &script);
ErrorCounts CountErrors(const WordSeq &ref, const WordSeq &hyp);

/// Counts summed over utterances.  refs and hyps must have the same set of
/// utterance ids.
ErrorCounts CorpusWer(const Transcripts &refs, const Transcripts &hyps);

/// "WER <rate> S <n> D <n> I <n> N <n>".
std::string FormatErrorCounts(const ErrorCounts &c);

/// One utterance per line: `utt_id w1 w2 ...`.  An id with no words is an
/// empty transcript.  Duplicate ids are an error.
Transcripts ReadTranscripts(std::istream &is, const std::string &name = "");
Transcripts ReadTranscriptsFile(const std::string &path);
void WriteTranscripts(const Transcripts &t, std::ostream &os);

}  // namespace cts

#endif  // CTS_SCORING_H_
