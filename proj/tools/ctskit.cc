// tools/ctskit.cc

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


// Command-line front end.  Every subcommand runs as a named stage; errors
// are printed as "ctskit: <stage>: <message>" and exit with status 1.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "cts/confnet.h"
#include "cts/den-graph.h"
#include "cts/forward-backward.h"
#include "cts/nbest.h"
#include "cts/onebit-sgd.h"
#include "cts/pipeline.h"
#include "cts/scoring.h"
#include "cts/senone-lm.h"
#include "cts/synth.h"
#include "cts/text-util.h"
#include "json.hpp"

using namespace cts;
using Json = nlohmann::ordered_json;

namespace {

int DefaultThreads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

std::string Slurp(const std::string &path) {
  auto is = OpenInput(path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Writes to `path`, or stdout for "" and "-".
template <typename Fn>
void WithOutput(const std::string &path, Fn &&fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  auto os = OpenOutput(path);
  fn(os);
  if (!os) ThrowError("failed writing ", path);
}

Inventory LoadInventory(const std::string &path) {
  auto is = OpenInput(path);
  return ReadInventory(is);
}

std::vector<AlignedUtterance> LoadAlignments(const std::string &path,
                                             const Inventory *inv) {
  auto is = OpenInput(path);
  return ReadAlignments(is, inv);
}

// N-best lists plus `name=path` stream files.
std::vector<NBestList> LoadNBest(const std::string &path,
                                 const std::vector<std::string> &streams) {
  auto lists = ReadNBestFile(path);
  for (const auto &spec : streams) {
    size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
      ThrowError("--stream expects name=path, got '", spec, "'");
    AttachStreamFile(lists, spec.substr(0, eq), spec.substr(eq + 1));
  }
  return lists;
}

void LoadWeights(const std::string &path, ScoreWeights *w, LmPipeline *lm) {
  if (path.empty()) return;
  WeightsFromJson(Slurp(path), w, lm);
}

Json ErrorsJson(const ErrorCounts &e) {
  Json j;
  j["wer"] = e.Wer();
  j["sub"] = e.substitutions;
  j["del"] = e.deletions;
  j["ins"] = e.insertions;
  j["ref_words"] = e.reference_words;
  return j;
}

bool OnOff(const std::string &v, const std::string &flag) {
  if (v == "on") return true;
  if (v == "off") return false;
  ThrowError(flag, " expects on or off, got '", v, "'");
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"ctskit: sequence-training statistics, N-best rescoring, "
               "system combination and 1-bit SGD simulation"};
  app.require_subcommand(1);
  std::string stage;
  std::function<void()> action;

  // build-lm
  {
    auto *c = app.add_subcommand("build-lm", "estimate the senone LM");
    static std::string inv_path, ali_path, out;
    static int max_history = 0;
    c->add_option("--inventory", inv_path, "inventory file")->required();
    c->add_option("--ali", ali_path, "alignment file")->required();
    c->add_option("--max-history", max_history, "0 = full mixed history");
    c->add_option("--out", out, "LM dump (default stdout)");
    c->callback([&] {
      stage = "build-lm";
      action = [] {
        Inventory inv = LoadInventory(inv_path);
        auto ali = LoadAlignments(ali_path, &inv);
        LmOptions o;
        o.max_history = max_history;
        o.num_threads = DefaultThreads();
        MixedHistoryLm lm = Estimate(ali, inv, o);
        WithOutput(out, [&](std::ostream &os) { lm.WriteDump(os); });
        std::cerr << "build-lm: " << lm.Table().size() << " histories\n";
      };
    });
  }

  // compile-graph
  {
    auto *c = app.add_subcommand("compile-graph",
                                 "compile the denominator graph");
    static std::string inv_path, ali_path, lm_path, out;
    static double max_self_loop = 0.999;
    c->add_option("--inventory", inv_path, "inventory file")->required();
    c->add_option("--ali", ali_path,
                  "alignments for transition counts (and the LM if --lm is "
                  "not given)")->required();
    c->add_option("--lm", lm_path, "LM dump from build-lm");
    c->add_option("--max-self-loop", max_self_loop, "self-loop cap");
    c->add_option("--out", out, "graph file")->required();
    c->callback([&] {
      stage = "compile-graph";
      action = [] {
        Inventory inv = LoadInventory(inv_path);
        auto ali = LoadAlignments(ali_path, &inv);
        MixedHistoryLm lm;
        if (lm_path.empty()) {
          lm = Estimate(ali, inv);
        } else {
          auto is = OpenInput(lm_path);
          lm = MixedHistoryLm::ReadDump(is);
        }
        TransitionOptions to;
        to.max_self_loop = max_self_loop;
        DenominatorFsa fsa = Compile(lm, CountTransitions(ali, to), inv);
        ValidationReport v = Validate(fsa);
        if (!v.Ok())
          ThrowError("graph failed validation: ", v.findings.front().detail);
        auto os = OpenOutput(out);
        fsa.Write(os);
        std::cerr << "compile-graph: " << fsa.NumStates() << " states, "
                  << fsa.NumArcs() << " arcs\n";
      };
    });
  }

  // lfmmi-stats
  {
    auto *c = app.add_subcommand("lfmmi-stats",
                                 "MMI objective and gradients");
    static std::string graph, ali_path, loglikes, out;
    static double lambda = kDefaultCeLambda;
    static std::string numerator = "transitions";
    c->add_option("--graph", graph, "graph from compile-graph")->required();
    c->add_option("--ali", ali_path, "numerator alignments")->required();
    c->add_option("--loglikes", loglikes,
                  "binary score matrices, one per alignment")->required();
    c->add_option("--lambda", lambda, "cross-entropy weight");
    c->add_option("--numerator", numerator,
                  "transitions or likelihood-only");
    c->add_option("--out", out, "gradient matrices (binary)");
    c->callback([&] {
      stage = "lfmmi-stats";
      action = [] {
        DenominatorFsa fsa;
        {
          std::ifstream is(graph, std::ios::binary);
          if (!is) ThrowError("cannot open ", graph);
          fsa = DenominatorFsa::Read(is);
        }
        auto ali = LoadAlignments(ali_path, nullptr);
        auto x = ReadMatrixSequence(loglikes);
        if (x.size() != ali.size())
          ThrowError(loglikes, " holds ", x.size(), " matrices for ",
                     ali.size(), " alignments");
        MmiOptions o;
        o.ce_lambda = lambda;
        o.num_threads = DefaultThreads();
        if (numerator == "likelihood-only")
          o.numerator = NumeratorWeights::kLikelihoodOnly;
        else if (numerator != "transitions")
          ThrowError("unknown --numerator '", numerator, "'");
        TransitionModel tm = TransitionModelFromGraph(fsa);
        MmiBatchResult r = ComputeMmiBatch(fsa, tm, ali, x, o);
        if (!out.empty()) {
          std::vector<Matrix> grads;
          for (const auto &u : r.per_utterance) grads.push_back(u.grad);
          WriteMatrixSequence(grads, out);
        }
        Json j;
        j["utterances"] = ali.size();
        j["frames"] = r.frames;
        j["objective"] = r.objective;
        j["objective_per_frame"] =
            r.objective / static_cast<double>(std::max<size_t>(r.frames, 1));
        std::cout << j.dump(2) << "\n";
      };
    });
  }

  // bench-fb
  {
    auto *c = app.add_subcommand("bench-fb",
                                 "forward-backward throughput");
    static BenchFbOptions b;
    static std::string kernel = "scaled", out;
    c->add_option("--seed", b.seed, "corpus and score seed");
    c->add_option("--phones", b.num_phones, "phones in the bench inventory");
    c->add_option("--utts", b.num_utts, "bench alignments");
    c->add_option("--phones-per-utt", b.phones_per_utt, "phones per alignment");
    c->add_option("--columns", b.score_columns, "scores per frame");
    c->add_option("--chunks", b.num_chunks, "number of score chunks");
    c->add_option("--chunk-frames", b.chunk_frames, "frames per chunk");
    c->add_option("--kernel", kernel, "scaled or log");
    c->add_option("--out", out, "also write the JSON report here");
    c->callback([&] {
      stage = "bench-fb";
      action = [] {
        if (kernel == "scaled") b.kernel = FbKernel::kScaled;
        else if (kernel == "log") b.kernel = FbKernel::kLog;
        else ThrowError("unknown --kernel '", kernel, "'");
        std::string j = RunBenchFb(b).ToJson();
        std::cout << j << "\n";
        if (!out.empty()) WithOutput(out, [&](std::ostream &os) { os << j << "\n"; });
      };
    });
  }

  // rescore
  {
    auto *c = app.add_subcommand("rescore", "rescore N-best lists");
    static std::string nbest, weights, out, nbest_out;
    static std::vector<std::string> streams;
    c->add_option("--nbest", nbest, "N-best file")->required();
    c->add_option("--stream", streams, "name=path word probability stream");
    c->add_option("--weights", weights, "weights JSON")->required();
    c->add_option("--out", out, "1-best transcripts (default stdout)");
    c->add_option("--nbest-out", nbest_out, "reordered N-best lists");
    c->callback([&] {
      stage = "rescore";
      action = [] {
        auto lists = LoadNBest(nbest, streams);
        ScoreWeights w;
        LmPipeline lm;
        LoadWeights(weights, &w, &lm);
        Transcripts best;
        std::vector<NBestList> rescored;
        for (const auto &l : lists) {
          rescored.push_back(Rescore(l, w, lm));
          best[l.utt_id] = rescored.back().hyps.front().words;
        }
        WithOutput(out, [&](std::ostream &os) { WriteTranscripts(best, os); });
        if (!nbest_out.empty()) {
          auto os = OpenOutput(nbest_out);
          WriteNBest(rescored, os);
        }
      };
    });
  }

  // optimize-weights
  {
    auto *c = app.add_subcommand("optimize-weights",
                                 "tune score weights on a dev set");
    static std::string nbest, refs, lm_path, out;
    static std::vector<std::string> streams;
    static int passes = 3;
    c->add_option("--nbest", nbest, "N-best file")->required();
    c->add_option("--stream", streams, "name=path word probability stream");
    c->add_option("--refs", refs, "reference transcripts")->required();
    c->add_option("--lm", lm_path,
                  "weights JSON whose lm_pipeline is used (and whose "
                  "weights are the starting point)");
    c->add_option("--passes", passes, "search passes");
    c->add_option("--out", out, "tuned weights JSON (default stdout)");
    c->callback([&] {
      stage = "optimize-weights";
      action = [] {
        auto lists = LoadNBest(nbest, streams);
        Transcripts r = ReadTranscriptsFile(refs);
        ScoreWeights start;
        LmPipeline lm;
        LoadWeights(lm_path, &start, &lm);
        OptimizeOptions o;
        o.passes = passes;
        o.num_threads = DefaultThreads();
        OptimizeResult res = OptimizeWeights(lists, r, lm, start, o);
        std::cerr << "initial " << FormatErrorCounts(res.initial) << "\n"
                  << "final   " << FormatErrorCounts(res.final) << "\n";
        WithOutput(out, [&](std::ostream &os) {
          os << WeightsToJson(res.weights, lm) << "\n";
        });
      };
    });
  }

  // build-cn
  {
    auto *c = app.add_subcommand("build-cn",
                                 "confusion networks from N-best lists");
    static std::string nbest, weights, out;
    static std::vector<std::string> streams;
    static double scale = kDefaultPosteriorScale;
    c->add_option("--nbest", nbest, "N-best file")->required();
    c->add_option("--stream", streams, "name=path word probability stream");
    c->add_option("--weights", weights, "weights JSON");
    c->add_option("--scale", scale, "posterior scale on log10 scores");
    c->add_option("--out", out, "CN file (default stdout)");
    c->callback([&] {
      stage = "build-cn";
      action = [] {
        auto lists = LoadNBest(nbest, streams);
        ScoreWeights w;
        LmPipeline lm;
        LoadWeights(weights, &w, &lm);
        std::vector<ConfusionNetwork> cns;
        for (const auto &l : lists) {
          NBestList r = Rescore(l, w, lm);
          cns.push_back(BuildCn(r, HypPosteriors(TotalScores(r, w, lm), scale)));
        }
        WithOutput(out, [&](std::ostream &os) { WriteCns(cns, os); });
      };
    });
  }

  // combine
  {
    auto *c = app.add_subcommand("combine", "confusion network combination");
    static std::vector<std::string> systems;
    static std::vector<double> weights;
    static std::string refs, out, cn_out, hyp_out;
    static bool greedy = false;
    static double mu = 0.5;
    c->add_option("--systems", systems, "CN files, one per system")
        ->required();
    c->add_option("--weights", weights, "system weights (default uniform)");
    c->add_option("--refs", refs, "reference transcripts");
    c->add_flag("--greedy", greedy, "greedy subset search with EM weights");
    c->add_option("--mu", mu, "weight smoothing for --greedy");
    c->add_option("--out", out, "selected set JSON (default stdout)");
    c->add_option("--cn-out", cn_out, "combined CN file");
    c->add_option("--hyp-out", hyp_out, "decoded transcripts");
    c->callback([&] {
      stage = "combine";
      action = [] {
        SystemCns cns;
        for (const auto &s : systems) cns.push_back(ReadCnsFile(s));
        for (size_t k = 1; k < cns.size(); ++k) {
          if (cns[k].size() != cns[0].size())
            ThrowError(systems[k], " has ", cns[k].size(),
                       " utterances, expected ", cns[0].size());
          for (size_t u = 0; u < cns[k].size(); ++u)
            if (cns[k][u].utt_id != cns[0][u].utt_id)
              ThrowError(systems[k], ": utterance ", u, " is ",
                         cns[k][u].utt_id, ", expected ", cns[0][u].utt_id);
        }
        Transcripts r;
        if (!refs.empty()) r = ReadTranscriptsFile(refs);
        std::vector<size_t> members;
        std::vector<double> w;
        Json j;
        if (greedy) {
          if (refs.empty()) ThrowError("--greedy needs --refs");
          GreedyOptions go;
          go.mu = mu;
          go.num_threads = DefaultThreads();
          GreedyResult g = GreedySelect(cns, r, go);
          members = g.best.members;
          w = g.best.weights;
          Json single = Json::array();
          for (const auto &e : g.single) single.push_back(ErrorsJson(e));
          j["single"] = single;
        } else {
          for (size_t k = 0; k < cns.size(); ++k) members.push_back(k);
          w = weights.empty()
                  ? std::vector<double>(cns.size(), 1.0 / cns.size())
                  : weights;
          if (w.size() != cns.size())
            ThrowError("--weights has ", w.size(), " values for ",
                       cns.size(), " systems");
        }
        auto combined = CombineSystems(cns, members, w);
        Json names = Json::array();
        for (size_t m : members) names.push_back(systems[m]);
        j["members"] = names;
        j["weights"] = w;
        if (!refs.empty()) j["errors"] = ErrorsJson(CnErrors(combined, r));
        WithOutput(out, [&](std::ostream &os) { os << j.dump(2) << "\n"; });
        if (!cn_out.empty()) {
          auto os = OpenOutput(cn_out);
          WriteCns(combined, os);
        }
        if (!hyp_out.empty()) {
          Transcripts hyp;
          for (const auto &cn : combined) hyp[cn.utt_id] = DecodeCn(cn);
          auto os = OpenOutput(hyp_out);
          WriteTranscripts(hyp, os);
        }
      };
    });
  }

  // score
  {
    auto *c = app.add_subcommand("score", "word error rate");
    static std::string ref, hyp;
    c->add_option("--ref", ref, "reference transcripts")->required();
    c->add_option("--hyp", hyp, "hypothesis transcripts")->required();
    c->callback([&] {
      stage = "score";
      action = [] {
        ErrorCounts e =
            CorpusWer(ReadTranscriptsFile(ref), ReadTranscriptsFile(hyp));
        std::cout << FormatErrorCounts(e) << "\n";
      };
    });
  }

  // sgd-sim
  {
    auto *c = app.add_subcommand("sgd-sim", "simulated data-parallel SGD");
    static SgdOptions o;
    static std::string problem = "lsq", quantize = "on", feedback = "on", out;
    static size_t dim = 64, samples = 4096;
    static bool auto_mb = false;
    c->add_option("--workers", o.workers, "simulated workers");
    c->add_option("--problem", problem, "only lsq");
    c->add_option("--dim", dim, "parameter dimension");
    c->add_option("--samples", samples, "training samples");
    c->add_option("--steps", o.steps, "updates");
    c->add_option("--minibatch", o.minibatch, "samples per update");
    c->add_option("--lr", o.learning_rate, "per-sample learning rate");
    c->add_option("--quantize", quantize, "on or off");
    c->add_option("--error-feedback", feedback, "on or off");
    c->add_flag("--auto-minibatch", auto_mb, "probe larger minibatches");
    c->add_option("--seed", o.seed, "seed");
    c->add_option("--out", out, "trace CSV");
    c->callback([&] {
      stage = "sgd-sim";
      action = [] {
        if (problem != "lsq") ThrowError("unknown --problem '", problem, "'");
        o.quantize = OnOff(quantize, "--quantize");
        o.error_feedback = OnOff(feedback, "--error-feedback");
        o.auto_minibatch = auto_mb;
        o.num_threads = DefaultThreads();
        LsqProblem p = MakeLsqProblem(dim, samples, o.seed);
        SgdTrace t = SimTrain(p, o);
        if (!out.empty()) {
          auto os = OpenOutput(out);
          WriteTraceCsv(t, os);
        }
        Json j;
        j["final_loss"] = t.final_loss;
        j["bytes_exchanged"] = t.bytes_exchanged;
        j["dense_bytes"] = t.dense_bytes;
        j["bandwidth_ratio"] = static_cast<double>(t.bytes_exchanged) /
                               static_cast<double>(t.dense_bytes);
        j["final_minibatch"] = t.rows.empty() ? o.minibatch
                                              : t.rows.back().minibatch_size;
        std::cout << j.dump(2) << "\n";
      };
    });
  }

  // synth
  {
    auto *c = app.add_subcommand("synth", "write a synthetic corpus");
    static std::string config, out;
    static std::optional<uint64_t> seed;
    c->add_option("--config", config, "pipeline config whose synth block is used");
    c->add_option("--seed", seed, "overrides the config seed");
    c->add_option("--out", out, "output directory")->required();
    c->callback([&] {
      stage = "synth";
      action = [] {
        PipelineConfig cfg;
        if (!config.empty()) cfg = PipelineConfig::FromJsonFile(config);
        if (seed) cfg.synth.seed = *seed;
        WriteSynthCorpus(MakeSynthCorpus(cfg.synth), out);
      };
    });
  }

  // pipeline
  {
    auto *c = app.add_subcommand("pipeline", "end-to-end run");
    static std::string config, out;
    static std::optional<std::string> data_dir;
    static int threads = 0;
    c->add_option("--config", config, "pipeline config JSON (default: built-in)");
    c->add_option("--data-dir", data_dir, "read the corpus from this directory");
    c->add_option("--threads", threads, "worker threads (default: all cores)");
    c->add_option("--out", out, "report JSON (default stdout)");
    c->callback([&] {
      stage = "pipeline";
      action = [] {
        PipelineConfig cfg;
        if (!config.empty()) cfg = PipelineConfig::FromJsonFile(config);
        if (data_dir) cfg.data_dir = *data_dir;
        cfg.num_threads = threads > 0 ? threads : DefaultThreads();
        PipelineReport r = RunPipeline(cfg);
        WithOutput(out, [&](std::ostream &os) { os << r.ToJson(cfg); });
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }
  try {
    RunStage(stage, action);
  } catch (const std::exception &e) {
    std::cerr << "ctskit: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
