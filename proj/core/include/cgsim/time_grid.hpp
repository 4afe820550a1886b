#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cgsim {

inline constexpr int kSymbolsPerSlot = 14;

/// Absolute time is an integer symbol counter, slot * 14 + symbol, per carrier.
using SymbolTime = std::int64_t;

struct Numerology {
  int scs_khz = 120;  // one of 15, 30, 60, 120

  static bool valid_scs(int scs) {
    return scs == 15 || scs == 30 || scs == 60 || scs == 120;
  }
  double slot_duration_us() const { return 1000.0 / (scs_khz / 15.0); }
  double symbol_duration_us() const { return slot_duration_us() / kSymbolsPerSlot; }
};

enum class SymbolDir : std::uint8_t { UL, DL, FLEXIBLE };

/// Per-symbol direction pattern repeating every `period_slots` slots.
struct TddPattern {
  int period_slots = 1;
  std::vector<SymbolDir> dir;  // period_slots * 14 entries, slot-major

  static TddPattern all_uplink();
  /// One string per slot, 14 chars from {U, D, F}, e.g. "DDDDDDDDDDUUUU".
  static TddPattern from_strings(std::span<const std::string> slots);

  SymbolDir at(std::int64_t slot, int symbol) const {
    return dir[static_cast<std::size_t>(slot % period_slots) * kSymbolsPerSlot +
               static_cast<std::size_t>(symbol)];
  }
};

/// Contiguous symbol run on one carrier. S and L follow the SLIV convention;
/// an unsegmented (transmittable) span has start_symbol + length <= 14.
struct SymbolSpan {
  int carrier_id = 0;
  std::int64_t slot = 0;
  int start_symbol = 0;  // S, 0..13
  int length = 1;        // L, 1..14

  SymbolTime first_sym() const { return slot * kSymbolsPerSlot + start_symbol; }
  SymbolTime end_sym() const { return first_sym() + length; }  // exclusive

  friend bool operator==(const SymbolSpan&, const SymbolSpan&) = default;
};

/// Slice of one nominal repetition after slot-border / invalid-symbol splitting.
struct Segment {
  SymbolSpan span;
  int nominal_index = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// True iff the symbol direction is UL or FLEXIBLE (flexible counts as valid
/// for UL configured grants; scenario validation may override upstream).
bool is_valid_symbol(const TddPattern& tdd, std::int64_t slot, int symbol);

/// Type B layout: K nominal repetitions of `nominal` back to back on the
/// continuous symbol axis, each split at slot borders and at valid/invalid
/// transitions. Invalid runs are dropped. With cross_slot_allowed = false the
/// part of a nominal repetition beyond its starting slot is dropped instead
/// of segmented.
std::vector<Segment> segment_type_b(const SymbolSpan& nominal, int repetitions,
                                    const TddPattern& tdd,
                                    bool cross_slot_allowed);

/// Uninterrupted Type B layout (the pre-drop nominal segments): the same
/// splitting at slot borders only, every symbol kept regardless of direction.
std::vector<Segment> nominal_type_b(const SymbolSpan& nominal, int repetitions);

/// Type A layout: repetition i reuses the SLIV in slot s0 + i*(1 + gap_slots).
/// A repetition overlapping any invalid symbol is dropped whole.
std::vector<Segment> enumerate_type_a(const SymbolSpan& sliv, int repetitions,
                                      int gap_slots, const TddPattern& tdd);

/// Re-emits every nominal repetition that the primary carrier's TDD pattern
/// would drop or truncate onto `secondary_carrier` at the same absolute time;
/// fully valid repetitions stay on the primary. The output always carries all
/// K nominal repetitions intact.
std::vector<Segment> complementary_carrier_map(std::span<const Segment> nominal,
                                               const TddPattern& primary_tdd,
                                               int secondary_carrier);

}  // namespace cgsim
