// tests/senone-lm-test.cc

#include <algorithm>
#include <random>
#include <sstream>
#include <unordered_map>

#include "cts/base.h"
#include "cts/senone-lm.h"
#include "doctest.h"
#include "test-util.h"

using namespace cts;
using cts::testing::MakeToyInventory;
using cts::testing::SetSampleInventory;
using cts::testing::RandomCorpus;

namespace {

std::vector<SenoneId> ReferenceCompress(const std::vector<SenoneId> &x) {
  std::vector<SenoneId> out;
  for (size_t i = 0; i < x.size(); ++i)
    if (i == 0 || x[i] != x[i - 1]) out.push_back(x[i]);
  return out;
}

// Independent history tracker: string keys, its own boundary test.
std::unordered_map<std::string, std::unordered_map<int, int>> CountingOracle(
    const std::vector<AlignedUtterance> &corpus, const Inventory &inv) {
  std::unordered_map<std::string, std::unordered_map<int, int>> counts;
  for (const auto &u : corpus) {
    auto seq = ReferenceCompress(u.frames);
    int prev_phone = -1;
    std::vector<int> cur;
    auto key = [&]() {
      std::string k = std::to_string(prev_phone) + "|";
      for (int s : cur) k += std::to_string(s) + ",";
      return k;
    };
    for (int s : seq) {
      counts[key()][s]++;
      int ph = inv.senone_phone[s], pos = inv.senone_position[s];
      if (!cur.empty() && (inv.senone_phone[cur.back()] != ph ||
                           inv.senone_position[cur.back()] >= pos)) {
        prev_phone = inv.senone_phone[cur.back()];
        cur.clear();
      }
      cur.push_back(s);
    }
    counts[key()][-1]++;
  }
  return counts;
}

std::string OracleKey(const HistoryState &h) {
  std::string k = std::to_string(h.prev_phone) + "|";
  for (int s : h.current_senones) k += std::to_string(s) + ",";
  return k;
}

}  // namespace

TEST_CASE("CompressRuns") {
  const SenoneId a = 0, b = 1;
  CHECK(CompressRuns(std::vector<SenoneId>{a, a, b, b, b, a}) ==
        std::vector<SenoneId>{a, b, a});
  CHECK(CompressRuns(std::vector<SenoneId>{a}) == std::vector<SenoneId>{a});
  CHECK_THROWS_WITH_AS(CompressRuns(std::vector<SenoneId>{}), "empty alignment",
                       cts::Error);

  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d(0, 2);
  std::vector<SenoneId> x(1000);
  for (auto &v : x) v = d(rng);
  auto c = CompressRuns(x);
  CHECK(c == ReferenceCompress(x));
  CHECK(CompressRuns(c) == c);  // idempotent
  CHECK(c.size() <= x.size());
  for (size_t i = 1; i < c.size(); ++i) CHECK(c[i] != c[i - 1]);
}

TEST_CASE("history semantics on the s eh t sample") {
  Inventory inv = SetSampleInventory();
  std::vector<SenoneId> seq = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  auto events = ExtractEvents(seq, inv);
  REQUIRE(events.size() == 9);
  // Predicting the state after eh_s4.66 (that is, t_s2.729).
  CHECK(events[6].next == 6);
  CHECK(FormatHistory(events[6].history, inv) ==
        "(s, [eh_s2.527, eh_s3.128, eh_s4.66])");
  // Predicting the state after t_s2.729.
  CHECK(FormatHistory(events[7].history, inv) == "(eh, [t_s2.729])");
  CHECK(FormatHistory(events[0].history, inv) == "(BEGIN, [])");
  CHECK(FormatHistory(events[1].history, inv) == "(BEGIN, [s_s2.1288])");
}

TEST_CASE("ExtractEvents edge cases") {
  Inventory inv = MakeToyInventory(2);
  auto ev = ExtractEvents(std::vector<SenoneId>{0}, inv);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].history == HistoryState{kBeginPhone, {}});
  CHECK(ev[0].next == 0);

  // Phone 0 twice in a row ("t t"): positions restart, so a boundary.
  std::vector<SenoneId> rep = {0, 1, 2, 0, 1};
  auto e2 = ExtractEvents(rep, inv);
  CHECK(e2[3].history == HistoryState{kBeginPhone, {0, 1, 2}});
  CHECK(e2[4].history == HistoryState{0, {0}});

  CHECK_THROWS_AS(ExtractEvents(std::vector<SenoneId>{0, 99}, inv), cts::Error);
  CHECK_THROWS_AS(ExtractEvents(std::vector<SenoneId>{0, 0}, inv), cts::Error);

  // Concatenating the successors reproduces the sequence.
  auto corpus = RandomCorpus(3, 20, 4, 2, 6, 3);
  Inventory inv2 = MakeToyInventory(4, 2);
  for (const auto &u : corpus) {
    auto c = CompressRuns(u.frames);
    std::vector<SenoneId> back;
    for (const auto &e : ExtractEvents(c, inv2)) {
      back.push_back(e.next);
      for (size_t i = 1; i < e.history.current_senones.size(); ++i)
        CHECK(inv2.PositionOf(e.history.current_senones[i]) >
              inv2.PositionOf(e.history.current_senones[i - 1]));
    }
    CHECK(back == c);
  }
}

TEST_CASE("Estimate count ratios") {
  Inventory inv = MakeToyInventory(2);
  const SenoneId a1 = 0, a2 = 1, b1 = 3;
  std::vector<AlignedUtterance> one = {{"u1", {a1, a1, a2}}};
  auto lm1 = Estimate(one, inv);
  CHECK(lm1.Prob({kBeginPhone, {a1}}, a2) == 1.0);
  CHECK(lm1.Prob({kBeginPhone, {a1, a2}}, kEndSenone) == 1.0);

  std::vector<AlignedUtterance> two = {{"u1", {a1, a2}}, {"u2", {a1, b1}}};
  auto lm2 = Estimate(two, inv);
  CHECK(lm2.Prob({kBeginPhone, {a1}}, a2) == 0.5);
  CHECK(lm2.Prob({kBeginPhone, {a1}}, b1) == 0.5);
  CHECK(lm2.Prob({kBeginPhone, {a1}}, 2) == 0.0);  // unseen successor
  CHECK_THROWS_WITH_AS(lm2.Prob({1, {a1}}, a2), "unseen history", cts::Error);
  CHECK_THROWS_AS(Estimate(std::vector<AlignedUtterance>{}, inv), cts::Error);
}

TEST_CASE("Estimate matches counting oracle on a random corpus") {
  const int phones = 5, variants = 2;
  Inventory inv = MakeToyInventory(phones, variants);
  auto corpus = RandomCorpus(42, 50, phones, variants, 8, 4);
  LmOptions opts;
  opts.num_threads = 3;
  auto lm = Estimate(corpus, inv, opts);
  auto oracle = CountingOracle(corpus, inv);
  CHECK(lm.Table().size() == oracle.size());
  for (const auto &[h, row] : lm.Table()) {
    const auto &orow = oracle.at(OracleKey(h));
    int total = 0;
    for (const auto &[s, c] : orow) total += c;
    double sum = 0.0;
    CHECK(row.size() == orow.size());
    for (const auto &[s, p] : row) {
      CHECK(p == static_cast<double>(orow.at(s)) / total);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }

  // Order of utterances does not matter.
  auto shuffled = corpus;
  std::mt19937_64 rng(5);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(Estimate(shuffled, inv) == lm);
}

TEST_CASE("history cap") {
  const int phones = 4;
  Inventory inv = MakeToyInventory(phones);
  auto corpus = RandomCorpus(8, 10, phones, 1, 5, 2);
  LmOptions opts;
  opts.max_history = 1;
  auto lm = Estimate(corpus, inv, opts);
  for (const auto &[h, row] : lm.Table())
    CHECK(h.current_senones.size() <= 1);
  CHECK(lm.MaxHistory() == 1);
}

TEST_CASE("LM dump is sorted and round-trips") {
  Inventory inv = MakeToyInventory(2);
  std::vector<AlignedUtterance> two = {{"u1", {0, 1}}, {"u2", {0, 3}}};
  auto lm = Estimate(two, inv);
  std::ostringstream os;
  lm.WriteDump(os);
  CHECK(os.str() ==
        "0|3\tEND\t1\t1\n"
        "BEGIN|\t0\t1\t2\n"
        "BEGIN|0\t1\t0.5\t1\n"
        "BEGIN|0\t3\t0.5\t1\n"
        "BEGIN|0,1\tEND\t1\t1\n");
  std::istringstream is(os.str());
  CHECK(MixedHistoryLm::ReadDump(is) == lm);
}

TEST_CASE("inventory and alignment files") {
  Inventory inv = MakeToyInventory(3, 2);
  std::ostringstream os;
  WriteInventory(inv, os);
  std::istringstream is(os.str());
  Inventory back = ReadInventory(is);
  CHECK(back.senone_phone == inv.senone_phone);
  CHECK(back.senone_position == inv.senone_position);
  CHECK(back.num_phones == 3);

  auto corpus = RandomCorpus(1, 4, 3, 2, 3, 3);
  std::ostringstream as;
  WriteAlignments(corpus, inv, as);
  std::istringstream ais(as.str());
  auto read = ReadAlignments(ais, &inv);
  REQUIRE(read.size() == corpus.size());
  for (size_t i = 0; i < read.size(); ++i) {
    CHECK(read[i].utt_id == corpus[i].utt_id);
    CHECK(read[i].frames == corpus[i].frames);
  }

  std::istringstream bad("u1\t0:5:0\n");  // senone 5 is phone 0 position 2
  CHECK_THROWS_AS(ReadAlignments(bad, &inv), cts::Error);
  std::istringstream empty("u1\t\n");
  CHECK_THROWS_WITH_AS(ReadAlignments(empty, nullptr),
                       "alignment u1: empty alignment", cts::Error);
}
