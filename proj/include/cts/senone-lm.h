// cts/senone-lm.h

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

#ifndef CTS_SENONE_LM_H_
#define CTS_SENONE_LM_H_

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cts {

using SenoneId = int32_t;
using PhoneId = int32_t;

/// Sentinel previous-phone value at the start of an utterance.
inline constexpr PhoneId kBeginPhone = -1;
/// Sentinel successor marking the end of an utterance.
inline constexpr SenoneId kEndSenone = -1;

/// Maps every senone to its phone and to its HMM state index within the
/// phone's left-to-right topology.  Ids are dense and start at 0.
struct Inventory {
  int32_t num_phones = 0;
  std::vector<PhoneId> senone_phone;
  std::vector<int32_t> senone_position;
  // Optional display names; when empty, ids are printed.
  std::vector<std::string> phone_names;
  std::vector<std::string> senone_names;

  int32_t NumSenones() const {
    return static_cast<int32_t>(senone_phone.size());
  }
  bool Contains(SenoneId s) const { return s >= 0 && s < NumSenones(); }
  PhoneId PhoneOf(SenoneId s) const;
  int32_t PositionOf(SenoneId s) const;
  std::string PhoneName(PhoneId p) const;
  std::string SenoneName(SenoneId s) const;

  /// Throws if the maps are inconsistent.
  void Check() const;
};

/// Inventory file: one line per senone, "senone_id phone_id position".
Inventory ReadInventory(std::istream &is);
void WriteInventory(const Inventory &inv, std::ostream &os);

struct AlignedUtterance {
  std::string utt_id;
  std::vector<SenoneId> frames;  // one senone per 10 ms frame
};

/// Alignment file: "utt_id<TAB>phone:senone:position ...", one utterance per
/// line.  If `inv` is non-null every token is checked against it.
std::vector<AlignedUtterance> ReadAlignments(std::istream &is,
                                             const Inventory *inv);
void WriteAlignments(std::span<const AlignedUtterance> utts,
                     const Inventory &inv, std::ostream &os);

/// Previous phone plus the senones already emitted in the current phone.
struct HistoryState {
  PhoneId prev_phone = kBeginPhone;
  std::vector<SenoneId> current_senones;

  auto operator<=>(const HistoryState &) const = default;
  bool operator==(const HistoryState &) const = default;
};

/// Renders a history as "(prev, [s1, s2])" using inventory names.
std::string FormatHistory(const HistoryState &h, const Inventory &inv);

struct LmEvent {
  HistoryState history;
  SenoneId next;
};

/// Deletes adjacent duplicates.  Throws "empty alignment" on empty input.
std::vector<SenoneId> CompressRuns(std::span<const SenoneId> frames);

/// True if `next`, following `prev` in a compressed sequence, begins a new
/// phone: the phone changes, or the HMM position fails to increase.
bool StartsNewPhone(SenoneId prev, SenoneId next, const Inventory &inv);

/// History after emitting `s` from `h`.  max_history > 0 keeps only the last
/// max_history senones of the current phone; 0 means uncapped.
HistoryState AdvanceHistory(const HistoryState &h, SenoneId s,
                            const Inventory &inv, int max_history = 0);

/// One (history, next senone) event per senone of a compressed sequence.
std::vector<LmEvent> ExtractEvents(std::span<const SenoneId> compressed,
                                   const Inventory &inv, int max_history = 0);

struct LmOptions {
  int max_history = 0;  // 0 = the full mixed history
  int num_threads = 1;
};

/// Unsmoothed maximum-likelihood model over senones with mixed
/// phone/senone histories.  Successor kEndSenone is the end of utterance.
class MixedHistoryLm {
 public:
  using Row = std::map<SenoneId, double>;
  using CountRow = std::map<SenoneId, int64_t>;

  MixedHistoryLm() = default;
  /// Builds probabilities as count ratios.
  explicit MixedHistoryLm(std::map<HistoryState, CountRow> counts,
                          int max_history = 0);

  /// P(s | h); 0 for an unseen successor.  Throws "unseen history" if h was
  /// never observed.
  double Prob(const HistoryState &h, SenoneId s) const;
  bool HasHistory(const HistoryState &h) const {
    return table_.count(h) != 0;
  }
  const Row &Successors(const HistoryState &h) const;

  const std::map<HistoryState, Row> &Table() const { return table_; }
  const std::map<HistoryState, CountRow> &Counts() const { return counts_; }
  int MaxHistory() const { return max_history_; }
  bool Empty() const { return table_.empty(); }

  /// Inspection dump, one line per (history, successor):
  ///   prev_phone|s1,s2,...<TAB>next<TAB>prob<TAB>count
  /// with BEGIN / END spelled out, lines sorted bytewise.
  void WriteDump(std::ostream &os) const;
  /// Rebuilds a model from a dump (counts are authoritative).
  static MixedHistoryLm ReadDump(std::istream &is, int max_history = 0);

  friend bool operator==(const MixedHistoryLm &,
                         const MixedHistoryLm &) = default;

 private:
  std::map<HistoryState, CountRow> counts_;
  std::map<HistoryState, Row> table_;
  int max_history_ = 0;
};

/// Counts events over all utterances (after run compression), adding an
/// END event after the last senone of each utterance.
MixedHistoryLm Estimate(std::span<const AlignedUtterance> corpus,
                        const Inventory &inv, const LmOptions &opts = {});

}  // namespace cts

#endif  // CTS_SENONE_LM_H_
