// tests/test-util.h

#ifndef CTS_TESTS_TEST_UTIL_H_
#define CTS_TESTS_TEST_UTIL_H_

#include <random>
#include <string>
#include <vector>

#include <cmath>
#include <functional>

#include "cts/base.h"
#include "cts/den-graph.h"
#include "cts/senone-lm.h"

namespace cts::testing {

// num_phones phones with 3 left-to-right positions and `variants` senones per
// position.  senone = (phone * 3 + position) * variants + variant.
inline Inventory MakeToyInventory(int num_phones, int variants = 1) {
  Inventory inv;
  inv.num_phones = num_phones;
  for (int p = 0; p < num_phones; ++p)
    for (int pos = 0; pos < 3; ++pos)
      for (int v = 0; v < variants; ++v) {
        inv.senone_phone.push_back(p);
        inv.senone_position.push_back(pos);
      }
  return inv;
}

// Random phone sequence; every phone walks its three positions, each held
// for 1..max_dur frames.
inline AlignedUtterance RandomUtterance(std::mt19937_64 &rng,
                                        const Inventory &inv, int num_phones,
                                        int variants, int max_phones,
                                        int max_dur, const std::string &id) {
  std::uniform_int_distribution<int> nphones(1, max_phones);
  std::uniform_int_distribution<int> phone(0, num_phones - 1);
  std::uniform_int_distribution<int> variant(0, variants - 1);
  std::uniform_int_distribution<int> dur(1, max_dur);
  AlignedUtterance u;
  u.utt_id = id;
  int n = nphones(rng);
  for (int i = 0; i < n; ++i) {
    int p = phone(rng);
    for (int pos = 0; pos < 3; ++pos) {
      SenoneId s = (p * 3 + pos) * variants + variant(rng);
      int d = dur(rng);
      for (int k = 0; k < d; ++k) u.frames.push_back(s);
    }
  }
  (void)inv;
  return u;
}

inline std::vector<AlignedUtterance> RandomCorpus(uint64_t seed, int num_utts,
                                                  int num_phones, int variants,
                                                  int max_phones, int max_dur) {
  std::mt19937_64 rng(seed);
  Inventory inv = MakeToyInventory(num_phones, variants);
  std::vector<AlignedUtterance> out;
  for (int u = 0; u < num_utts; ++u)
    out.push_back(RandomUtterance(rng, inv, num_phones, variants, max_phones,
                                  max_dur, "utt" + std::to_string(u)));
  return out;
}

// The three-phone example s eh t, each with states 2, 3, 4.
inline Inventory SetSampleInventory() {
  Inventory inv;
  inv.num_phones = 3;
  inv.phone_names = {"s", "eh", "t"};
  const char *names[9] = {"s_s2.1288",  "s_s3.1061",  "s_s4.1096",
                          "eh_s2.527",  "eh_s3.128",  "eh_s4.66",
                          "t_s2.729",   "t_s3.572",   "t_s4.748"};
  for (int i = 0; i < 9; ++i) {
    inv.senone_phone.push_back(i / 3);
    inv.senone_position.push_back(2 + i % 3);
    inv.senone_names.push_back(names[i]);
  }
  return inv;
}

// Calls fn(states, log_weight) for every arc path of exactly `len` arcs from
// the start state; states[0] is the start.  log_weight excludes likelihoods
// and final weights.
inline void EnumeratePaths(
    const DenominatorFsa &fsa, int len,
    const std::function<void(const std::vector<int32_t> &, double)> &fn) {
  std::vector<int32_t> path = {fsa.Start()};
  std::function<void(double)> rec = [&](double lw) {
    if (static_cast<int>(path.size()) == len + 1) {
      fn(path, lw);
      return;
    }
    for (const auto &a : fsa.ArcsFrom(path.back())) {
      path.push_back(a.dst);
      rec(lw + a.log_weight);
      path.pop_back();
    }
  };
  rec(0.0);
}

// Random stochastic acceptor: state 0 is a non-emitting start, the others
// get random labels in [0, num_labels), random out-arcs (at most one per
// destination) and a random final weight.  Every state is reachable.
inline DenominatorFsa RandomFsa(std::mt19937_64 &rng, int num_states,
                                int num_labels) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::uniform_int_distribution<int> lab(0, num_labels - 1);
  std::bernoulli_distribution coin(0.4);
  std::vector<SenoneId> label(num_states, -1);
  for (int j = 1; j < num_states; ++j) label[j] = lab(rng);
  std::vector<FsaArc> arcs;
  std::vector<double> finals(num_states, kLogZero);
  for (int i = 0; i < num_states; ++i) {
    std::vector<std::pair<int, double>> out;
    double total = 0.0;
    for (int j = 1; j < num_states; ++j) {
      // chain i -> i+1 guarantees reachability
      if (j == i + 1 || coin(rng)) {
        double w = u(rng);
        out.push_back({j, w});
        total += w;
      }
    }
    double fin = i == 0 ? 0.0 : u(rng);
    total += fin;
    for (auto [j, w] : out)
      arcs.push_back({i, j, label[j], std::log(w / total)});
    if (fin > 0.0) finals[i] = std::log(fin / total);
  }
  return DenominatorFsa(num_states, 0, std::move(arcs), std::move(finals));
}

}  // namespace cts::testing

#endif  // CTS_TESTS_TEST_UTIL_H_
