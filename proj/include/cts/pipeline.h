// cts/pipeline.h

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


#ifndef CTS_PIPELINE_H_
#define CTS_PIPELINE_H_

#include <string>
#include <vector>

#include "cts/forward-backward.h"
#include "cts/nbest.h"
#include "cts/scoring.h"
#include "cts/synth.h"

namespace cts {

/// Everything that determines a pipeline run.  Read from a JSON file; keys
/// not listed here are rejected.
struct PipelineConfig {
  SynthOptions synth;     // corpus generated in memory when data_dir is empty
  std::string data_dir;   // otherwise a corpus written by `synth`
  double ce_lambda = 0.1;
  double posterior_scale = 0.1;  // CN posteriors: softmax(scale * log10 score)
  double mu = 0.5;               // combination weight smoothing
  std::vector<double> interp_weights = {0.375, 0.375, 0.25};
  std::vector<double> single_stream_weights = {0.75, 0.25};
  int trainer_steps = 5;
  double trainer_learning_rate = 50.0;
  int num_threads = 1;  // does not change any output

  /// Throws on non-simplex weights, bad sizes, or a data_dir that lacks
  /// the corpus files.
  void Validate() const;

  static PipelineConfig FromJson(const std::string &text);
  static PipelineConfig FromJsonFile(const std::string &path);
  /// All fields except num_threads.
  std::string ToJson() const;
};

/// The rescoring configurations compared per system, in order: N-gram only,
/// one neural stream, two neural streams, and both directions.
struct NamedLm {
  std::string name;
  LmPipeline lm;
};
std::vector<NamedLm> RescoringConfigs(const PipelineConfig &cfg);

struct RescoreOutcome {
  std::string name;
  ScoreWeights weights;
  ErrorCounts errors;
};

struct SystemOutcome {
  ErrorCounts oracle;
  ErrorCounts first_pass;  // am + ng with unit weights
  std::vector<RescoreOutcome> configs;
  ErrorCounts cn;  // consensus decode of the last configuration
};

struct PipelineReport {
  // Acoustic side.
  size_t senones = 0;
  size_t lm_histories = 0;
  int32_t graph_states = 0;
  size_t graph_arcs = 0;
  size_t frames = 0;
  std::vector<double> objective_per_frame;  // before each trainer step, then final

  // Word side.
  std::vector<SystemOutcome> systems;
  std::vector<size_t> combined_members;
  std::vector<double> combined_weights;
  ErrorCounts combined;
  double best_single_wer = 0.0;  // lowest 1-best or CN WER of any system

  /// Machine-readable report; byte-identical for identical configs.
  std::string ToJson(const PipelineConfig &cfg) const;
};

/// synth or load -> estimate -> compile -> lfmmi-stats -> train -> rescore
/// -> build-cn -> combine.  Failures are rethrown as cts::Error with the
/// stage name in front.
PipelineReport RunPipeline(const PipelineConfig &cfg);

/// Throughput measurement on a graph compiled from MakeBenchCorpus.  Score
/// chunks are Gaussian, generated outside the timed region one at a time.
struct BenchFbOptions {
  uint64_t seed = 7;
  int num_phones = 30;
  int num_utts = 1000;
  int phones_per_utt = 100;
  size_t score_columns = 9000;
  int num_chunks = 10;
  size_t chunk_frames = 1000;
  FbKernel kernel = FbKernel::kScaled;
};
BenchReport RunBenchFb(const BenchFbOptions &opts);

/// Runs fn, prefixing any error with "stage: ".
template <typename Fn>
auto RunStage(const std::string &stage, Fn &&fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::exception &e) {
    ThrowError(stage, ": ", e.what());
  }
}

}  // namespace cts

#endif  // CTS_PIPELINE_H_
