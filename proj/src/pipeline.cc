// src/pipeline.cc

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


#include "cts/pipeline.h"

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "cts/confnet.h"
#include "cts/den-graph.h"
#include "cts/forward-backward.h"
#include "cts/senone-lm.h"
#include "cts/text-util.h"
#include "json.hpp"

namespace cts {

namespace {

using Json = nlohmann::ordered_json;

// Binds a JSON key to a SynthOptions field of type int, double or uint64.
template <typename T>
struct Field {
  const char *key;
  T SynthOptions::*ptr;
};

const std::vector<Field<int>> &IntFields() {
  static const std::vector<Field<int>> f = {
      {"num_phones", &SynthOptions::num_phones},
      {"senones_per_phone", &SynthOptions::senones_per_phone},
      {"num_acoustic_utts", &SynthOptions::num_acoustic_utts},
      {"frames_per_utt", &SynthOptions::frames_per_utt},
      {"max_state_duration", &SynthOptions::max_state_duration},
      {"vocab_size", &SynthOptions::vocab_size},
      {"lm_train_sentences", &SynthOptions::lm_train_sentences},
      {"num_utts", &SynthOptions::num_utts},
      {"min_words", &SynthOptions::min_words},
      {"max_words", &SynthOptions::max_words},
      {"nbest_size", &SynthOptions::nbest_size},
      {"error_sites", &SynthOptions::error_sites},
      {"num_oov_words", &SynthOptions::num_oov_words},
      {"ngram_order", &SynthOptions::ngram_order},
      {"num_systems", &SynthOptions::num_systems},
  };
  return f;
}

const std::vector<Field<double>> &DoubleFields() {
  static const std::vector<Field<double>> f = {
      {"acoustic_margin", &SynthOptions::acoustic_margin},
      {"acoustic_noise", &SynthOptions::acoustic_noise},
      {"oov_rate", &SynthOptions::oov_rate},
      {"am_error_scale", &SynthOptions::am_error_scale},
      {"am_noise", &SynthOptions::am_noise},
      {"stream_noise", &SynthOptions::stream_noise},
  };
  return f;
}

Json SynthToJson(const SynthOptions &o) {
  Json j;
  j["seed"] = o.seed;
  for (const auto &f : IntFields()) j[f.key] = o.*f.ptr;
  for (const auto &f : DoubleFields()) j[f.key] = o.*f.ptr;
  return j;
}

void SynthFromJson(const Json &j, SynthOptions *o) {
  if (!j.is_object()) ThrowError("'synth' must be an object");
  for (const auto &[key, value] : j.items()) {
    bool found = false;
    if (key == "seed") {
      o->seed = value.get<uint64_t>();
      found = true;
    }
    for (const auto &f : IntFields())
      if (key == f.key) o->*f.ptr = value.get<int>(), found = true;
    for (const auto &f : DoubleFields())
      if (key == f.key) o->*f.ptr = value.get<double>(), found = true;
    if (!found) ThrowError("unknown synth option '", key, "'");
  }
}

Json ErrorsToJson(const ErrorCounts &e) {
  Json j;
  j["wer"] = e.Wer();
  j["sub"] = e.substitutions;
  j["del"] = e.deletions;
  j["ins"] = e.insertions;
  j["ref_words"] = e.reference_words;
  return j;
}

Json ScoreWeightsToJson(const ScoreWeights &w) {
  Json j;
  j["am"] = w.am;
  j["lm"] = w.lm;
  j["pron"] = w.pron;
  j["oov"] = w.oov;
  j["wip"] = w.wip;
  return j;
}

void CheckSimplex(const std::vector<double> &w, size_t size,
                  const std::string &what) {
  if (w.size() != size) ThrowError(what, " needs ", size, " values");
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) ThrowError(what, " has a negative weight");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) ThrowError(what, " sums to ", sum, ", not 1");
}

}  // namespace

void PipelineConfig::Validate() const {
  CheckSimplex(interp_weights, 3, "interp_weights");
  CheckSimplex(single_stream_weights, 2, "single_stream_weights");
  if (!(ce_lambda >= 0.0)) ThrowError("ce_lambda must be >= 0");
  if (!(posterior_scale > 0.0)) ThrowError("posterior_scale must be > 0");
  if (!(mu >= 0.0 && mu <= 1.0)) ThrowError("mu must be in [0, 1]");
  if (trainer_steps < 0) ThrowError("trainer_steps must be >= 0");
  if (synth.num_systems < 1) ThrowError("synth.num_systems must be >= 1");
  if (!data_dir.empty()) {
    namespace fs = std::filesystem;
    std::vector<std::string> files = {"inventory.txt", "train.ali",
                                      "loglikes.bin", "lm_train.txt",
                                      "dev.ref"};
    for (int k = 0; k < synth.num_systems; ++k) {
      std::string base = "sys" + std::to_string(k);
      files.push_back(base + ".nbest");
      for (const auto &s : kSynthStreams)
        files.push_back(base + "." + s + ".stream");
    }
    for (const auto &f : files)
      if (!fs::exists(fs::path(data_dir) / f))
        ThrowError("missing ", (fs::path(data_dir) / f).string());
  }
}

PipelineConfig PipelineConfig::FromJson(const std::string &text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception &e) {
    ThrowError("bad pipeline config: ", e.what());
  }
  if (!j.is_object()) ThrowError("pipeline config must be a JSON object");
  PipelineConfig c;
  try {
    for (const auto &[key, value] : j.items()) {
      if (key == "synth") SynthFromJson(value, &c.synth);
      else if (key == "data_dir") c.data_dir = value.get<std::string>();
      else if (key == "ce_lambda") c.ce_lambda = value.get<double>();
      else if (key == "posterior_scale") c.posterior_scale = value.get<double>();
      else if (key == "mu") c.mu = value.get<double>();
      else if (key == "interp_weights")
        c.interp_weights = value.get<std::vector<double>>();
      else if (key == "single_stream_weights")
        c.single_stream_weights = value.get<std::vector<double>>();
      else if (key == "trainer_steps") c.trainer_steps = value.get<int>();
      else if (key == "trainer_learning_rate")
        c.trainer_learning_rate = value.get<double>();
      else if (key == "num_threads") c.num_threads = value.get<int>();
      else ThrowError("unknown pipeline option '", key, "'");
    }
  } catch (const nlohmann::json::exception &e) {
    ThrowError("bad pipeline config: ", e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::FromJsonFile(const std::string &path) {
  auto is = OpenInput(path);
  std::ostringstream os;
  os << is.rdbuf();
  return FromJson(os.str());
}

std::string PipelineConfig::ToJson() const {
  Json j;
  j["synth"] = SynthToJson(synth);
  j["data_dir"] = data_dir;
  j["ce_lambda"] = ce_lambda;
  j["posterior_scale"] = posterior_scale;
  j["mu"] = mu;
  j["interp_weights"] = interp_weights;
  j["single_stream_weights"] = single_stream_weights;
  j["trainer_steps"] = trainer_steps;
  j["trainer_learning_rate"] = trainer_learning_rate;
  return j.dump(2);
}

std::vector<NamedLm> RescoringConfigs(const PipelineConfig &cfg) {
  const auto &s = cfg.single_stream_weights;
  const auto &w = cfg.interp_weights;
  std::vector<NamedLm> out(4);
  out[0].name = "ngram";
  out[0].lm.forward = {{"ngram", 1.0}};
  out[1].name = "rnn1+ngram";
  out[1].lm.forward = {{"rnn1", s[0]}, {"ngram", s[1]}};
  out[2].name = "rnn1+rnn2+ngram";
  out[2].lm.forward = {{"rnn1", w[0]}, {"rnn2", w[1]}, {"ngram", w[2]}};
  out[3].name = "fwd+bwd";
  out[3].lm = out[2].lm;
  out[3].lm.backward = {
      {"rnn1_bwd", w[0]}, {"rnn2_bwd", w[1]}, {"ngram_bwd", w[2]}};
  return out;
}

PipelineReport RunPipeline(const PipelineConfig &cfg) {
  RunStage("config", [&] { cfg.Validate(); });
  PipelineReport rep;

  SynthCorpus corpus = cfg.data_dir.empty()
      ? RunStage("synth", [&] { return MakeSynthCorpus(cfg.synth); })
      : RunStage("load", [&] {
          return ReadSynthCorpus(cfg.data_dir, cfg.synth.num_systems);
        });
  const Inventory &inv = corpus.inventory;
  rep.senones = inv.NumSenones();

  // Acoustic side.
  MixedHistoryLm lm = RunStage("estimate", [&] {
    LmOptions o;
    o.num_threads = cfg.num_threads;
    return Estimate(corpus.alignments, inv, o);
  });
  rep.lm_histories = lm.Table().size();
  TransitionModel tm = RunStage(
      "estimate", [&] { return CountTransitions(corpus.alignments); });
  DenominatorFsa fsa = RunStage("compile", [&] {
    DenominatorFsa g = Compile(lm, tm, inv);
    ValidationReport v = Validate(g);
    if (!v.Ok())
      ThrowError("graph failed validation: ", v.findings.front().detail);
    return g;
  });
  rep.graph_states = fsa.NumStates();
  rep.graph_arcs = fsa.NumArcs();

  // Toy trainer: one bias per senone added to every frame's scores, moved
  // along the per-frame average MMI + CE gradient.
  MmiOptions mo;
  mo.ce_lambda = cfg.ce_lambda;
  mo.num_threads = cfg.num_threads;
  std::vector<double> bias(rep.senones, 0.0);
  for (int step = 0; step <= cfg.trainer_steps; ++step) {
    const char *stage = step == 0 ? "lfmmi-stats" : "train";
    MmiBatchResult batch = RunStage(stage, [&] {
      std::vector<Matrix> x = corpus.loglikes;
      for (auto &m : x)
        for (size_t t = 0; t < m.NumRows(); ++t)
          for (size_t s = 0; s < m.NumCols(); ++s) m(t, s) += bias[s];
      return ComputeMmiBatch(fsa, tm, corpus.alignments, x, mo);
    });
    rep.frames = batch.frames;
    rep.objective_per_frame.push_back(batch.objective /
                                      static_cast<double>(batch.frames));
    if (step == cfg.trainer_steps) break;
    std::vector<double> g(rep.senones, 0.0);
    for (const auto &u : batch.per_utterance)
      for (size_t t = 0; t < u.grad.NumRows(); ++t)
        for (size_t s = 0; s < u.grad.NumCols(); ++s) g[s] += u.grad(t, s);
    for (size_t s = 0; s < bias.size(); ++s)
      bias[s] += cfg.trainer_learning_rate * g[s] /
                 static_cast<double>(batch.frames);
  }

  // Word side.
  const auto configs = RescoringConfigs(cfg);
  OptimizeOptions oo;
  oo.num_threads = cfg.num_threads;
  SystemCns cns;
  for (const auto &lists : corpus.systems) {
    SystemOutcome so;
    RunStage("rescore", [&] {
      so.oracle = OracleErrors(lists, corpus.refs);
      so.first_pass = OneBestErrors(lists, corpus.refs, ScoreWeights{}, {});
      for (const auto &c : configs) {
        OptimizeResult r =
            OptimizeWeights(lists, corpus.refs, c.lm, ScoreWeights{}, oo);
        so.configs.push_back({c.name, r.weights, r.final});
      }
    });
    cns.push_back(RunStage("build-cn", [&] {
      const ScoreWeights &w = so.configs.back().weights;
      const LmPipeline &lm_final = configs.back().lm;
      std::vector<ConfusionNetwork> out;
      for (const auto &l : lists) {
        NBestList r = Rescore(l, w, lm_final);
        auto post =
            HypPosteriors(TotalScores(r, w, lm_final), cfg.posterior_scale);
        out.push_back(BuildCn(r, post));
      }
      return out;
    }));
    so.cn = RunStage("score", [&] { return CnErrors(cns.back(), corpus.refs); });
    rep.systems.push_back(std::move(so));
  }

  GreedyResult g = RunStage("combine", [&] {
    GreedyOptions go;
    go.mu = cfg.mu;
    go.num_threads = cfg.num_threads;
    return GreedySelect(cns, corpus.refs, go);
  });
  rep.combined_members = g.best.members;
  rep.combined_weights = g.best.weights;
  rep.combined = g.best.errors;
  rep.best_single_wer = 1e300;
  for (const auto &s : rep.systems)
    rep.best_single_wer = std::min(
        {rep.best_single_wer, s.configs.back().errors.Wer(), s.cn.Wer()});
  return rep;
}

BenchReport RunBenchFb(const BenchFbOptions &opts) {
  BenchCorpus b = MakeBenchCorpus(opts.seed, opts.num_phones, opts.num_utts,
                                  opts.phones_per_utt);
  MixedHistoryLm lm = Estimate(b.alignments, b.inventory);
  DenominatorFsa fsa = Compile(lm, CountTransitions(b.alignments), b.inventory);
  if (opts.score_columns < static_cast<size_t>(b.inventory.NumSenones()))
    ThrowError("bench needs at least ", b.inventory.NumSenones(),
               " score columns");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> z(0.0, 2.0);
  FbOptions fo;
  fo.kernel = opts.kernel;
  BenchReport total;
  for (int c = 0; c < opts.num_chunks; ++c) {
    Matrix x(opts.chunk_frames, opts.score_columns);
    for (auto &v : x.Data()) v = z(rng);
    BenchReport r = BenchThroughput(fsa, std::span<const Matrix>(&x, 1), fo);
    total.frames += r.frames;
    total.seconds += r.seconds;
    total.states = r.states;
    total.arcs = r.arcs;
    total.senones = r.senones;
    total.kernel = r.kernel;
  }
  total.frames_per_second =
      static_cast<double>(total.frames) / std::max(total.seconds, 1e-12);
  total.realtime_factor = total.frames_per_second * 0.01;
  return total;
}

std::string PipelineReport::ToJson(const PipelineConfig &cfg) const {
  Json j;
  j["config"] = Json::parse(cfg.ToJson());
  Json a;
  a["senones"] = senones;
  a["lm_histories"] = lm_histories;
  a["graph_states"] = graph_states;
  a["graph_arcs"] = graph_arcs;
  a["frames"] = frames;
  a["objective_per_frame"] = objective_per_frame;
  j["acoustic"] = a;
  Json systems_json = Json::array();
  for (size_t k = 0; k < systems.size(); ++k) {
    const auto &s = systems[k];
    Json sj;
    sj["system"] = k;
    sj["oracle"] = ErrorsToJson(s.oracle);
    sj["first_pass"] = ErrorsToJson(s.first_pass);
    Json cj = Json::array();
    for (const auto &c : s.configs) {
      Json x;
      x["name"] = c.name;
      x["weights"] = ScoreWeightsToJson(c.weights);
      x["errors"] = ErrorsToJson(c.errors);
      cj.push_back(x);
    }
    sj["rescoring"] = cj;
    sj["consensus"] = ErrorsToJson(s.cn);
    systems_json.push_back(sj);
  }
  j["systems"] = systems_json;
  Json c;
  c["members"] = combined_members;
  c["weights"] = combined_weights;
  c["errors"] = ErrorsToJson(combined);
  j["combination"] = c;
  Json summary;
  summary["best_single_wer"] = best_single_wer;
  summary["combined_wer"] = combined.Wer();
  j["summary"] = summary;
  return j.dump(2) + "\n";
}

}  // namespace cts
