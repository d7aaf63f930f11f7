// src/synth.cc

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


#include "cts/synth.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "cts/base.h"
#include "cts/ngram.h"
#include "cts/text-util.h"

namespace cts {

namespace {

// splitmix64 finalizer; stable across platforms unlike std::hash.
uint64_t Mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t HashString(const std::string &s, uint64_t h) {
  for (unsigned char c : s) h = Mix(h ^ c);
  return Mix(h ^ 0xff);
}

// Standard normal that depends only on the key, so a "model" assigns the
// same score to the same (context, word) everywhere.
double KeyedNormal(uint64_t seed, const std::string &a, const std::string &b,
                   const std::string &c) {
  uint64_t h = HashString(c, HashString(b, HashString(a, Mix(seed))));
  std::mt19937_64 rng(h);
  std::normal_distribution<double> z;
  return z(rng);
}

constexpr const char *kSentEnd = "</s>";
constexpr const char *kSentStart = "<s>";

// Generating bigram over "w0".."w{V-1}" and "</s>".
class TrueBigram {
 public:
  TrueBigram(int vocab, std::mt19937_64 &rng) : vocab_(vocab) {
    std::uniform_int_distribution<int> pick(0, vocab - 1);
    std::gamma_distribution<double> g(1.0, 1.0);
    for (int c = -1; c < vocab; ++c) {
      std::vector<double> p(vocab + 1, 0.15 / (vocab + 1));
      std::vector<double> fav(5);
      double fsum = 0.0;
      for (double &f : fav) fsum += (f = g(rng));
      for (double f : fav) p[pick(rng)] += 0.75 * f / fsum;
      p[vocab] += 0.10;  // end of sentence
      table_.push_back(p);
    }
  }

  static std::string Word(int i) { return "w" + std::to_string(i); }

  int Index(const std::string &w) const {
    if (w.size() < 2 || w[0] != 'w') return -1;
    for (size_t i = 1; i < w.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(w[i]))) return -1;
    int i = std::stoi(w.substr(1));
    return i < vocab_ ? i : -1;
  }

  // P(word | prev); unknown contexts behave like the sentence start.
  double Prob(const std::string &prev, const std::string &word) const {
    const auto &row = table_[Index(prev) + 1];
    if (word == kSentEnd) return row[vocab_];
    int i = Index(word);
    return i < 0 ? 0.0 : row[i];
  }

  WordSeq Sample(std::mt19937_64 &rng, int len) const {
    WordSeq out;
    std::string prev = kSentStart;
    for (int k = 0; k < len; ++k) {
      const auto &row = table_[Index(prev) + 1];
      std::discrete_distribution<int> d(row.begin(), row.end() - 1);
      out.push_back(Word(d(rng)));
      prev = out.back();
    }
    return out;
  }

 private:
  int vocab_;
  std::vector<std::vector<double>> table_;  // [context + 1][word or end]
};

std::vector<double> Reverse(const std::vector<double> &p) {
  // p holds n word values then the end token; reverse the word part only.
  std::vector<double> out(p.rbegin() + 1, p.rend());
  out.push_back(p.back());
  return out;
}

Matrix NoisyLoglikes(const std::vector<SenoneId> &ali, int num_senones,
                     double margin, double noise, std::mt19937_64 &rng) {
  std::normal_distribution<double> z;
  Matrix x(ali.size(), num_senones);
  for (size_t t = 0; t < ali.size(); ++t) {
    for (int s = 0; s < num_senones; ++s) x(t, s) = noise * z(rng);
    x(t, ali[t]) += margin;
  }
  return x;
}

}  // namespace

SynthCorpus MakeSynthCorpus(const SynthOptions &o) {
  if (o.num_phones < 1 || o.senones_per_phone < 1 || o.num_acoustic_utts < 1 ||
      o.frames_per_utt < 1 || o.vocab_size < 1 || o.num_utts < 1 ||
      o.nbest_size < 1 || o.num_systems < 1 || o.min_words < 1 ||
      o.max_words < o.min_words || o.max_state_duration < 1)
    ThrowError("synth: sizes must be >= 1");
  SynthCorpus c;
  std::mt19937_64 rng(o.seed);

  // Frame-level data.
  Inventory &inv = c.inventory;
  inv.num_phones = o.num_phones;
  for (int p = 0; p < o.num_phones; ++p)
    for (int pos = 0; pos < o.senones_per_phone; ++pos) {
      inv.senone_phone.push_back(p);
      inv.senone_position.push_back(pos);
    }
  std::uniform_int_distribution<int> phone(0, o.num_phones - 1);
  std::uniform_int_distribution<int> dur(1, o.max_state_duration);
  for (int u = 0; u < o.num_acoustic_utts; ++u) {
    AlignedUtterance a;
    a.utt_id = "a" + std::to_string(1000 + u);
    while (static_cast<int>(a.frames.size()) < o.frames_per_utt) {
      int p = phone(rng);
      for (int pos = 0; pos < o.senones_per_phone; ++pos) {
        int d = dur(rng);
        for (int k = 0; k < d; ++k)
          a.frames.push_back(p * o.senones_per_phone + pos);
      }
    }
    a.frames.resize(o.frames_per_utt);
    c.loglikes.push_back(NoisyLoglikes(a.frames, inv.NumSenones(),
                                       o.acoustic_margin, o.acoustic_noise,
                                       rng));
    c.alignments.push_back(std::move(a));
  }

  // Word-level data.
  TrueBigram truth(o.vocab_size, rng);
  std::uniform_int_distribution<int> len(o.min_words, o.max_words);
  for (int s = 0; s < o.lm_train_sentences; ++s)
    c.lm_text.push_back(truth.Sample(rng, len(rng)));
  std::vector<WordSeq> reversed;
  for (const auto &s : c.lm_text) reversed.emplace_back(s.rbegin(), s.rend());
  WittenBellLm fwd_ngram(c.lm_text, o.ngram_order);
  WittenBellLm bwd_ngram(reversed, o.ngram_order);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> oov(0, std::max(0, o.num_oov_words - 1));
  std::uniform_int_distribution<int> vocab_word(0, o.vocab_size - 1);
  auto oov_word = [&]() { return "oov" + std::to_string(oov(rng)); };
  std::vector<std::string> utt_ids;
  for (int u = 0; u < o.num_utts; ++u) {
    std::string id = "u" + std::to_string(1000 + u);
    WordSeq ref = truth.Sample(rng, len(rng));
    if (o.num_oov_words > 0)
      for (auto &w : ref)
        if (unit(rng) < o.oov_rate) w = oov_word();
    c.refs[id] = ref;
    utt_ids.push_back(id);
  }

  const uint64_t model_seed = Mix(o.seed ^ 0x5eedULL);
  auto is_oov = [&](const std::string &w) { return truth.Index(w) < 0; };
  auto true_probs = [&](const WordSeq &h) {
    std::vector<double> t;
    for (size_t i = 0; i <= h.size(); ++i) {
      std::string prev = i == 0 ? kSentStart : h[i - 1];
      std::string w = i < h.size() ? h[i] : kSentEnd;
      t.push_back(is_oov(w) && i < h.size() ? kLogZero
                                            : std::log10(truth.Prob(prev, w)));
    }
    return t;
  };
  auto neural = [&](const WordSeq &h, const std::vector<double> &t,
                    const std::string &name, bool backward) {
    std::vector<double> p = t;
    for (size_t i = 0; i < p.size(); ++i) {
      if (p[i] == kLogZero) continue;
      std::string w = i < h.size() ? h[i] : kSentEnd;
      std::string ctx = backward ? (i + 1 < h.size() ? h[i + 1] : kSentEnd)
                                 : (i > 0 ? h[i - 1] : kSentStart);
      p[i] += o.stream_noise * KeyedNormal(model_seed, name, ctx, w);
    }
    return p;
  };

  std::normal_distribution<double> z;
  for (int k = 0; k < o.num_systems; ++k) {
    std::vector<NBestList> lists;
    for (const auto &id : utt_ids) {
      const WordSeq &ref = c.refs[id];
      // Error sites of this system on this utterance.  Each site has its own
      // acoustic evidence; strongly misleading sites survive in every
      // hypothesis (the correct word was pruned in the first pass).
      struct Site {
        int kind;  // 0 substitution, 1 deletion, 2 insertion
        size_t pos;
        std::string word;
        double am;
        bool forced;
      };
      std::vector<size_t> positions(ref.size());
      for (size_t i = 0; i < ref.size(); ++i) positions[i] = i;
      std::shuffle(positions.begin(), positions.end(), rng);
      std::vector<Site> sites;
      for (int e = 0; e < o.error_sites; ++e) {
        double r = unit(rng);
        bool use_oov = o.num_oov_words > 0 && unit(rng) < 0.05;
        std::string w = use_oov ? oov_word() : TrueBigram::Word(vocab_word(rng));
        double am = -o.am_error_scale + o.am_noise * z(rng);
        if (static_cast<size_t>(e) >= ref.size()) continue;
        Site site{r < 0.6 ? 0 : (r < 0.8 ? 1 : 2), positions[e], w, am,
                  am > o.am_error_scale};
        if (site.kind == 0 && site.word == ref[site.pos]) site.word += "x";
        sites.push_back(site);
      }
      std::set<WordSeq> seen;
      NBestList list{id, {}};
      // Every subset of sites is visited (and draws its noise) so the random
      // stream does not depend on which sites are forced.
      const size_t subsets = size_t{1} << sites.size();
      for (size_t mask = 0; mask < subsets; ++mask) {
        double pron_noise = z(rng);
        std::vector<bool> on(sites.size(), false);
        bool consistent = true;
        for (size_t j = 0; j < sites.size(); ++j) {
          on[j] = mask >> j & 1;
          if (sites[j].forced && !on[j]) consistent = false;
        }
        if (!consistent) continue;
        double am = 0.0;
        WordSeq words;
        for (size_t i = 0; i < ref.size(); ++i) {
          bool keep = true;
          for (size_t j = 0; j < sites.size(); ++j) {
            if (!on[j] || sites[j].pos != i) continue;
            if (sites[j].kind == 2) words.push_back(sites[j].word);
            if (sites[j].kind == 0) words.push_back(sites[j].word), keep = false;
            if (sites[j].kind == 1) keep = false;
          }
          if (keep) words.push_back(ref[i]);
        }
        for (size_t j = 0; j < sites.size(); ++j)
          if (on[j]) am += sites[j].am;
        if (!seen.insert(words).second) continue;
        Hypothesis h;
        h.words = words;
        h.am_score = am;
        h.pron_score = -0.05 * static_cast<double>(words.size()) +
                       0.2 * pron_noise;
        for (const auto &w : words) h.oov_count += is_oov(w);
        auto t = true_probs(words);
        auto ng = fwd_ngram.SentenceLog10Probs(words);
        WordSeq rev(words.rbegin(), words.rend());
        h.word_probs["rnn1"] = neural(words, t, "rnn1", false);
        h.word_probs["rnn2"] = neural(words, t, "rnn2", false);
        h.word_probs["ngram"] = ng;
        h.word_probs["rnn1_bwd"] = neural(words, t, "rnn1_bwd", true);
        h.word_probs["rnn2_bwd"] = neural(words, t, "rnn2_bwd", true);
        h.word_probs["ngram_bwd"] = Reverse(bwd_ngram.SentenceLog10Probs(rev));
        h.ng_score = 0.0;
        for (double v : ng) h.ng_score += v;
        list.hyps.push_back(std::move(h));
      }
      // First-pass order: acoustic plus N-gram score; keep the top N.
      std::stable_sort(list.hyps.begin(), list.hyps.end(),
                       [](const Hypothesis &a, const Hypothesis &b) {
                         return a.am_score + a.ng_score > b.am_score + b.ng_score;
                       });
      if (static_cast<int>(list.hyps.size()) > o.nbest_size)
        list.hyps.resize(o.nbest_size);
      lists.push_back(std::move(list));
    }
    c.systems.push_back(std::move(lists));
  }
  return c;
}

void WriteMatrixSequence(const std::vector<Matrix> &m, const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) ThrowError("cannot open ", path, " for writing");
  for (const auto &x : m) WriteMatrixBinary(x, os);
}

std::vector<Matrix> ReadMatrixSequence(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) ThrowError("cannot open ", path);
  std::vector<Matrix> out;
  while (is.peek() != std::char_traits<char>::eof())
    out.push_back(ReadMatrixBinary(is));
  return out;
}

void WriteSynthCorpus(const SynthCorpus &c, const std::string &dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto path = [&](const std::string &f) { return (fs::path(dir) / f).string(); };
  {
    auto os = OpenOutput(path("inventory.txt"));
    WriteInventory(c.inventory, os);
  }
  {
    auto os = OpenOutput(path("train.ali"));
    WriteAlignments(c.alignments, c.inventory, os);
  }
  WriteMatrixSequence(c.loglikes, path("loglikes.bin"));
  {
    auto os = OpenOutput(path("lm_train.txt"));
    for (const auto &s : c.lm_text) {
      for (size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << s[i];
      os << '\n';
    }
  }
  {
    auto os = OpenOutput(path("dev.ref"));
    WriteTranscripts(c.refs, os);
  }
  for (size_t k = 0; k < c.systems.size(); ++k) {
    std::string base = "sys" + std::to_string(k);
    auto os = OpenOutput(path(base + ".nbest"));
    WriteNBest(c.systems[k], os);
    for (const auto &name : kSynthStreams) {
      auto ss = OpenOutput(path(base + "." + name + ".stream"));
      WriteStream(c.systems[k], name, ss);
    }
  }
}

SynthCorpus ReadSynthCorpus(const std::string &dir, int num_systems) {
  namespace fs = std::filesystem;
  auto path = [&](const std::string &f) { return (fs::path(dir) / f).string(); };
  SynthCorpus c;
  {
    auto is = OpenInput(path("inventory.txt"));
    c.inventory = ReadInventory(is);
  }
  {
    auto is = OpenInput(path("train.ali"));
    c.alignments = ReadAlignments(is, &c.inventory);
  }
  c.loglikes = ReadMatrixSequence(path("loglikes.bin"));
  if (c.loglikes.size() != c.alignments.size())
    ThrowError(path("loglikes.bin"), ": ", c.loglikes.size(),
               " matrices for ", c.alignments.size(), " alignments");
  {
    auto is = OpenInput(path("lm_train.txt"));
    std::string line;
    while (std::getline(is, line)) c.lm_text.push_back(SplitWhitespace(line));
  }
  c.refs = ReadTranscriptsFile(path("dev.ref"));
  for (int k = 0; k < num_systems; ++k) {
    std::string base = "sys" + std::to_string(k);
    auto lists = ReadNBestFile(path(base + ".nbest"));
    for (const auto &name : kSynthStreams)
      AttachStreamFile(lists, name, path(base + "." + name + ".stream"));
    c.systems.push_back(std::move(lists));
  }
  return c;
}

BenchCorpus MakeBenchCorpus(uint64_t seed, int num_phones, int num_utts,
                            int phones_per_utt) {
  BenchCorpus b;
  const int P = num_phones;
  b.inventory.num_phones = P;
  for (int prev = -1; prev < P; ++prev)
    for (int p = 0; p < P; ++p)
      for (int pos = 0; pos < 3; ++pos) {
        b.inventory.senone_phone.push_back(p);
        b.inventory.senone_position.push_back(pos);
      }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> phone(0, P - 1), dur(1, 3);
  for (int u = 0; u < num_utts; ++u) {
    AlignedUtterance a;
    a.utt_id = "b" + std::to_string(u);
    int prev = -1;
    for (int k = 0; k < phones_per_utt; ++k) {
      int p = phone(rng);
      for (int pos = 0; pos < 3; ++pos) {
        SenoneId s = ((prev + 1) * P + p) * 3 + pos;
        for (int d = dur(rng); d > 0; --d) a.frames.push_back(s);
      }
      prev = p;
    }
    b.alignments.push_back(std::move(a));
  }
  return b;
}

}  // namespace cts
