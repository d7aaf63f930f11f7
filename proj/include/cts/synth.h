// cts/synth.h

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


#ifndef CTS_SYNTH_H_
#define CTS_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "cts/matrix.h"
#include "cts/nbest.h"
#include "cts/scoring.h"
#include "cts/senone-lm.h"

namespace cts {

/// Sizes and noise levels of the synthetic corpus.  Everything generated is
/// a deterministic function of these fields.
struct SynthOptions {
  uint64_t seed = 7;

  // Frame-level part.
  int num_phones = 10;
  int senones_per_phone = 3;  // left-to-right positions, one senone each
  int num_acoustic_utts = 20;
  int frames_per_utt = 200;
  int max_state_duration = 6;
  double acoustic_margin = 2.0;  // added to the true senone's score
  double acoustic_noise = 1.0;   // stddev of the Gaussian score noise

  // Word-level part.
  int vocab_size = 60;
  int lm_train_sentences = 60;
  int num_utts = 300;
  int min_words = 4;
  int max_words = 12;
  int nbest_size = 20;
  int error_sites = 4;  // candidate errors per system and utterance
  int num_oov_words = 10;
  double oov_rate = 0.03;
  int ngram_order = 3;
  int num_systems = 3;
  // Acoustic evidence of an error site is -am_error_scale + am_noise * z;
  // sites above +am_error_scale appear in every hypothesis.
  double am_error_scale = 1.0;
  double am_noise = 1.5;
  double stream_noise = 0.8;    // stddev of per-word neural LM noise (log10)
};

/// The stream names the synthetic N-best lists carry.
inline const std::vector<std::string> kSynthStreams = {
    "rnn1", "rnn2", "ngram", "rnn1_bwd", "rnn2_bwd", "ngram_bwd"};

struct SynthCorpus {
  Inventory inventory;
  std::vector<AlignedUtterance> alignments;
  std::vector<Matrix> loglikes;  // one per alignment

  std::vector<WordSeq> lm_text;           // N-gram training sentences
  Transcripts refs;                       // dev references
  std::vector<std::vector<NBestList>> systems;  // per system, per utterance
};

SynthCorpus MakeSynthCorpus(const SynthOptions &opts);

/// Writes inventory.txt, train.ali, loglikes.bin (matrices back to back in
/// alignment order), lm_train.txt, dev.ref, and per system sysK.nbest plus
/// sysK.<stream>.stream files.
void WriteSynthCorpus(const SynthCorpus &c, const std::string &dir);

/// Reads what WriteSynthCorpus wrote; `num_systems` sysK files are expected.
SynthCorpus ReadSynthCorpus(const std::string &dir, int num_systems);

/// Sequence of matrices written back to back in the binary matrix format.
void WriteMatrixSequence(const std::vector<Matrix> &m, const std::string &path);
std::vector<Matrix> ReadMatrixSequence(const std::string &path);

/// Alignments over left-context-dependent senones for throughput
/// measurement: senone = ((prev_phone + 1) * P + phone) * 3 + position, with
/// prev_phone = -1 at the start.  Durations are 1..3 frames per position.
struct BenchCorpus {
  Inventory inventory;
  std::vector<AlignedUtterance> alignments;
};
BenchCorpus MakeBenchCorpus(uint64_t seed, int num_phones, int num_utts,
                            int phones_per_utt);

}  // namespace cts

#endif  // CTS_SYNTH_H_
