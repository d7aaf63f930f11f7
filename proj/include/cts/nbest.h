// cts/nbest.h

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


#ifndef CTS_NBEST_H_
#define CTS_NBEST_H_

#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cts/scoring.h"

namespace cts {

/// One N-best entry.  All scores are log10.
struct Hypothesis {
  WordSeq words;
  double am_score = 0.0;
  double ng_score = 0.0;
  double pron_score = 0.0;
  int oov_count = 0;
  // stream name -> per-word log10 probabilities, #words + 1 entries with the
  // end token last.  Out-of-set positions hold -inf in neural streams.
  std::map<std::string, std::vector<double>> word_probs;

  void Check() const;
};

struct NBestList {
  std::string utt_id;
  std::vector<Hypothesis> hyps;
};

struct ScoreWeights {
  double am = 1.0;
  double lm = 1.0;
  double pron = 0.0;
  double oov = 0.0;
  double wip = 0.0;
  friend bool operator==(const ScoreWeights &, const ScoreWeights &) = default;
};

/// p = sum_i w_i 10^{log10 p_i} per position, returned as log10.  Weights
/// must be non-negative and sum to 1 within 1e-9.
std::vector<double> InterpolateWordProbs(
    std::span<const std::vector<double>> streams, std::span<const double> w);

/// Forward and backward sentence scores are added.
inline double CombineDirections(double fwd_log10, double bwd_log10) {
  return fwd_log10 + bwd_log10;
}

/// am + lm*lm_score + pron*pron_score + oov*oov_count + wip*#words.
double TotalScore(const Hypothesis &hyp, const ScoreWeights &w,
                  double lm_score);

struct StreamWeight {
  std::string stream;
  double weight = 0.0;
  friend bool operator==(const StreamWeight &, const StreamWeight &) = default;
};

/// Which per-word streams make up the LM score.  With no forward streams
/// the hypothesis' ng_score is used.  Each direction's per-word streams are
/// interpolated, the interpolated log10 values are summed over positions
/// (skipping out-of-set positions) and the two directions are added.
struct LmPipeline {
  std::vector<StreamWeight> forward;
  std::vector<StreamWeight> backward;

  std::vector<std::string> StreamNames() const;
  friend bool operator==(const LmPipeline &, const LmPipeline &) = default;
};

/// Sentence LM score (log10) under the pipeline.  A position is out-of-set
/// when any stream there is -inf; the number of such positions may not
/// exceed oov_count and the end token must be finite.
double LmScore(const Hypothesis &hyp, const LmPipeline &lm);

/// Total score of every hypothesis, in list order.
std::vector<double> TotalScores(const NBestList &list, const ScoreWeights &w,
                                const LmPipeline &lm);

/// Stable sort by total score, highest first.
NBestList Rescore(const NBestList &list, const ScoreWeights &w,
                  const LmPipeline &lm);

/// Index of the first hypothesis with the highest total score.
size_t BestIndex(std::span<const double> totals);

struct OptimizeOptions {
  int passes = 3;
  int num_threads = 1;
};

struct OptimizeResult {
  ScoreWeights weights;
  ErrorCounts initial;  // 1-best errors at the starting weights
  ErrorCounts final;
};

/// Coordinate search over lm, pron, oov, wip (am stays 1), minimizing
/// 1-best errors against refs; ties go to the smaller |weight|.  The first
/// pass scans 0 and +-10^e for e = -2, -1.75, ..., 2; later passes add a
/// finer multiplicative neighbourhood of the current value.
OptimizeResult OptimizeWeights(std::span<const NBestList> dev,
                               const Transcripts &refs, const LmPipeline &lm,
                               const ScoreWeights &start = {},
                               const OptimizeOptions &opts = {});

/// 1-best error counts of the whole dev set under the given weights.
ErrorCounts OneBestErrors(std::span<const NBestList> dev,
                          const Transcripts &refs, const ScoreWeights &w,
                          const LmPipeline &lm);

/// Lowest achievable errors when picking the best hypothesis of each list.
ErrorCounts OracleErrors(std::span<const NBestList> dev,
                         const Transcripts &refs);

// N-best file: for each utterance a header `utt_id N` followed by N lines
// `am ng pron oov w1 ... wn`.
std::vector<NBestList> ReadNBest(std::istream &is, const std::string &name = "");
std::vector<NBestList> ReadNBestFile(const std::string &path);
void WriteNBest(std::span<const NBestList> lists, std::ostream &os);

/// Stream file lines `utt_id hyp_index p1 ... p_{n+1}`.  Every hypothesis of
/// every list must receive exactly one line.
void AttachStream(std::vector<NBestList> &lists, const std::string &name,
                  std::istream &is, const std::string &file_name = "");
void AttachStreamFile(std::vector<NBestList> &lists, const std::string &name,
                      const std::string &path);
void WriteStream(std::span<const NBestList> lists, const std::string &name,
                 std::ostream &os);

/// {"am":..,"lm":..,"pron":..,"oov":..,"wip":..,
///  "lm_pipeline":{"forward":[{"stream":s,"weight":w},...],"backward":[..]}}
std::string WeightsToJson(const ScoreWeights &w, const LmPipeline &lm);
void WeightsFromJson(const std::string &text, ScoreWeights *w, LmPipeline *lm);

}  // namespace cts

#endif  // CTS_NBEST_H_
