// src/senone-lm.cc

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

#include "cts/senone-lm.h"

#include <algorithm>
#include <array>
#include <istream>
#include <ostream>
#include <sstream>

#include "cts/base.h"
#include "cts/parallel.h"
#include "cts/text-util.h"

namespace cts {

PhoneId Inventory::PhoneOf(SenoneId s) const {
  if (!Contains(s)) ThrowError("senone ", s, " not in inventory");
  return senone_phone[s];
}

int32_t Inventory::PositionOf(SenoneId s) const {
  if (!Contains(s)) ThrowError("senone ", s, " not in inventory");
  return senone_position[s];
}

std::string Inventory::PhoneName(PhoneId p) const {
  if (p == kBeginPhone) return "BEGIN";
  if (p >= 0 && static_cast<size_t>(p) < phone_names.size())
    return phone_names[p];
  return std::to_string(p);
}

std::string Inventory::SenoneName(SenoneId s) const {
  if (s == kEndSenone) return "END";
  if (s >= 0 && static_cast<size_t>(s) < senone_names.size())
    return senone_names[s];
  return std::to_string(s);
}

void Inventory::Check() const {
  if (senone_phone.size() != senone_position.size())
    ThrowError("inventory: phone and position maps differ in size");
  for (size_t s = 0; s < senone_phone.size(); ++s) {
    if (senone_phone[s] < 0 || senone_phone[s] >= num_phones)
      ThrowError("inventory: senone ", s, " maps to invalid phone ",
                 senone_phone[s]);
    if (senone_position[s] < 0)
      ThrowError("inventory: senone ", s, " has negative position");
  }
}

Inventory ReadInventory(std::istream &is) {
  std::vector<std::array<long long, 3>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto tok = SplitWhitespace(line);
    if (tok.empty()) continue;
    if (tok.size() != 3)
      ThrowError("inventory line ", line_no, ": expected 3 fields");
    rows.push_back({ParseInt(tok[0], "senone id"), ParseInt(tok[1], "phone id"),
                    ParseInt(tok[2], "position")});
  }
  Inventory inv;
  inv.senone_phone.assign(rows.size(), -1);
  inv.senone_position.assign(rows.size(), -1);
  for (const auto &r : rows) {
    if (r[0] < 0 || static_cast<size_t>(r[0]) >= rows.size())
      ThrowError("inventory: senone ids must be dense from 0, got ", r[0]);
    if (inv.senone_phone[r[0]] != -1)
      ThrowError("inventory: duplicate senone ", r[0]);
    inv.senone_phone[r[0]] = static_cast<PhoneId>(r[1]);
    inv.senone_position[r[0]] = static_cast<int32_t>(r[2]);
    inv.num_phones = std::max<int32_t>(inv.num_phones, r[1] + 1);
  }
  inv.Check();
  return inv;
}

void WriteInventory(const Inventory &inv, std::ostream &os) {
  for (SenoneId s = 0; s < inv.NumSenones(); ++s)
    os << s << ' ' << inv.senone_phone[s] << ' ' << inv.senone_position[s]
       << '\n';
}

std::vector<AlignedUtterance> ReadAlignments(std::istream &is,
                                             const Inventory *inv) {
  std::vector<AlignedUtterance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      if (SplitWhitespace(line).empty()) continue;
      ThrowError("alignment line ", line_no, ": missing TAB after utt id");
    }
    AlignedUtterance utt;
    utt.utt_id = line.substr(0, tab);
    for (const auto &tok : SplitWhitespace(std::string_view(line).substr(tab + 1))) {
      auto parts = SplitOn(tok, ':');
      if (parts.size() != 3)
        ThrowError("alignment line ", line_no, ": bad token '", tok,
                   "' (want phone:senone:position)");
      auto phone = ParseInt(parts[0], "phone");
      auto senone = static_cast<SenoneId>(ParseInt(parts[1], "senone"));
      auto pos = ParseInt(parts[2], "position");
      if (inv) {
        if (!inv->Contains(senone))
          ThrowError("alignment ", utt.utt_id, ": senone ", senone,
                     " not in inventory");
        if (inv->senone_phone[senone] != phone ||
            inv->senone_position[senone] != pos)
          ThrowError("alignment ", utt.utt_id, ": token '", tok,
                     "' disagrees with inventory");
      }
      utt.frames.push_back(senone);
    }
    if (utt.frames.empty())
      ThrowError("alignment ", utt.utt_id, ": empty alignment");
    out.push_back(std::move(utt));
  }
  return out;
}

void WriteAlignments(std::span<const AlignedUtterance> utts,
                     const Inventory &inv, std::ostream &os) {
  for (const auto &u : utts) {
    os << u.utt_id << '\t';
    for (size_t t = 0; t < u.frames.size(); ++t) {
      SenoneId s = u.frames[t];
      os << (t ? " " : "") << inv.PhoneOf(s) << ':' << s << ':'
         << inv.PositionOf(s);
    }
    os << '\n';
  }
}

std::string FormatHistory(const HistoryState &h, const Inventory &inv) {
  std::string out = "(" + inv.PhoneName(h.prev_phone) + ", [";
  for (size_t i = 0; i < h.current_senones.size(); ++i) {
    if (i) out += ", ";
    out += inv.SenoneName(h.current_senones[i]);
  }
  return out + "])";
}

std::vector<SenoneId> CompressRuns(std::span<const SenoneId> frames) {
  if (frames.empty()) ThrowError("empty alignment");
  std::vector<SenoneId> out;
  for (SenoneId s : frames)
    if (out.empty() || out.back() != s) out.push_back(s);
  return out;
}

bool StartsNewPhone(SenoneId prev, SenoneId next, const Inventory &inv) {
  return inv.PhoneOf(prev) != inv.PhoneOf(next) ||
         inv.PositionOf(next) <= inv.PositionOf(prev);
}

HistoryState AdvanceHistory(const HistoryState &h, SenoneId s,
                            const Inventory &inv, int max_history) {
  if (!inv.Contains(s)) ThrowError("senone ", s, " not in inventory");
  HistoryState next;
  if (h.current_senones.empty()) {
    next.prev_phone = h.prev_phone;
    next.current_senones = {s};
  } else if (StartsNewPhone(h.current_senones.back(), s, inv)) {
    next.prev_phone = inv.PhoneOf(h.current_senones.back());
    next.current_senones = {s};
  } else {
    next.prev_phone = h.prev_phone;
    next.current_senones = h.current_senones;
    next.current_senones.push_back(s);
  }
  if (max_history > 0 &&
      next.current_senones.size() > static_cast<size_t>(max_history)) {
    next.current_senones.erase(
        next.current_senones.begin(),
        next.current_senones.end() - max_history);
  }
  return next;
}

std::vector<LmEvent> ExtractEvents(std::span<const SenoneId> compressed,
                                   const Inventory &inv, int max_history) {
  std::vector<LmEvent> events;
  events.reserve(compressed.size());
  HistoryState h;
  for (size_t i = 0; i < compressed.size(); ++i) {
    if (i > 0 && compressed[i] == compressed[i - 1])
      ThrowError("ExtractEvents: input is not run-compressed at index ", i);
    events.push_back({h, compressed[i]});
    h = AdvanceHistory(h, compressed[i], inv, max_history);
  }
  return events;
}

MixedHistoryLm::MixedHistoryLm(std::map<HistoryState, CountRow> counts,
                               int max_history)
    : counts_(std::move(counts)), max_history_(max_history) {
  for (const auto &[h, row] : counts_) {
    int64_t total = 0;
    for (const auto &[s, c] : row) {
      if (c <= 0) ThrowError("non-positive count in LM row");
      total += c;
    }
    Row &probs = table_[h];
    for (const auto &[s, c] : row)
      probs[s] = static_cast<double>(c) / static_cast<double>(total);
  }
}

const MixedHistoryLm::Row &MixedHistoryLm::Successors(
    const HistoryState &h) const {
  auto it = table_.find(h);
  if (it == table_.end()) ThrowError("unseen history");
  return it->second;
}

double MixedHistoryLm::Prob(const HistoryState &h, SenoneId s) const {
  const Row &row = Successors(h);
  auto it = row.find(s);
  return it == row.end() ? 0.0 : it->second;
}

namespace {

std::string HistoryKey(const HistoryState &h) {
  std::string key = h.prev_phone == kBeginPhone ? "BEGIN"
                                                : std::to_string(h.prev_phone);
  key += '|';
  for (size_t i = 0; i < h.current_senones.size(); ++i) {
    if (i) key += ',';
    key += std::to_string(h.current_senones[i]);
  }
  return key;
}

HistoryState ParseHistoryKey(const std::string &key) {
  auto bar = key.find('|');
  if (bar == std::string::npos) ThrowError("bad history key '", key, "'");
  HistoryState h;
  std::string prev = key.substr(0, bar);
  h.prev_phone = prev == "BEGIN" ? kBeginPhone
                                 : static_cast<PhoneId>(ParseInt(prev, "phone"));
  std::string rest = key.substr(bar + 1);
  if (!rest.empty())
    for (const auto &tok : SplitOn(rest, ','))
      h.current_senones.push_back(static_cast<SenoneId>(ParseInt(tok, "senone")));
  return h;
}

}  // namespace

void MixedHistoryLm::WriteDump(std::ostream &os) const {
  std::vector<std::string> lines;
  for (const auto &[h, row] : counts_) {
    std::string key = HistoryKey(h);
    const Row &probs = table_.at(h);
    for (const auto &[s, c] : row) {
      lines.push_back(key + '\t' +
                      (s == kEndSenone ? std::string("END") : std::to_string(s)) +
                      '\t' + FormatDouble(probs.at(s)) + '\t' +
                      std::to_string(c));
    }
  }
  std::sort(lines.begin(), lines.end());
  for (const auto &l : lines) os << l << '\n';
}

MixedHistoryLm MixedHistoryLm::ReadDump(std::istream &is, int max_history) {
  std::map<HistoryState, CountRow> counts;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = SplitOn(line, '\t');
    if (f.size() != 4) ThrowError("LM dump line ", line_no, ": expected 4 fields");
    SenoneId next = f[1] == "END" ? kEndSenone
                                  : static_cast<SenoneId>(ParseInt(f[1], "senone"));
    counts[ParseHistoryKey(f[0])][next] += ParseInt(f[3], "count");
  }
  return MixedHistoryLm(std::move(counts), max_history);
}

MixedHistoryLm Estimate(std::span<const AlignedUtterance> corpus,
                        const Inventory &inv, const LmOptions &opts) {
  if (corpus.empty()) ThrowError("Estimate: empty corpus");
  using CountMap = std::map<HistoryState, MixedHistoryLm::CountRow>;
  std::vector<CountMap> partial(corpus.size());
  ParallelFor(corpus.size(), opts.num_threads, [&](size_t u) {
    auto compressed = CompressRuns(corpus[u].frames);
    CountMap &m = partial[u];
    HistoryState h;
    for (const auto &ev : ExtractEvents(compressed, inv, opts.max_history)) {
      m[ev.history][ev.next] += 1;
      h = AdvanceHistory(ev.history, ev.next, inv, opts.max_history);
    }
    m[h][kEndSenone] += 1;
  });
  CountMap merged;
  for (auto &m : partial)
    for (auto &[h, row] : m)
      for (auto &[s, c] : row) merged[h][s] += c;
  return MixedHistoryLm(std::move(merged), opts.max_history);
}

}  // namespace cts
