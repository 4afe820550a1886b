#include "cgsim/time_grid.hpp"

#include <algorithm>

#include "cgsim/errors.hpp"

namespace cgsim {

TddPattern TddPattern::all_uplink() {
  TddPattern p;
  p.period_slots = 1;
  p.dir.assign(kSymbolsPerSlot, SymbolDir::UL);
  return p;
}

TddPattern TddPattern::from_strings(std::span<const std::string> slots) {
  if (slots.empty()) throw ConfigError("tdd pattern needs at least one slot");
  TddPattern p;
  p.period_slots = static_cast<int>(slots.size());
  p.dir.reserve(slots.size() * kSymbolsPerSlot);
  for (const auto& s : slots) {
    if (s.size() != kSymbolsPerSlot)
      throw ConfigError("tdd slot string must have 14 symbols, got \"" + s + "\"");
    for (char c : s) {
      switch (c) {
        case 'U': p.dir.push_back(SymbolDir::UL); break;
        case 'D': p.dir.push_back(SymbolDir::DL); break;
        case 'F': p.dir.push_back(SymbolDir::FLEXIBLE); break;
        default:
          throw ConfigError(std::string("tdd symbol must be U, D or F, got '") + c + "'");
      }
    }
  }
  return p;
}

bool is_valid_symbol(const TddPattern& tdd, std::int64_t slot, int symbol) {
  return tdd.at(slot, symbol) != SymbolDir::DL;
}

namespace {

bool valid_at(const TddPattern& tdd, SymbolTime t) {
  return is_valid_symbol(tdd, t / kSymbolsPerSlot,
                         static_cast<int>(t % kSymbolsPerSlot));
}

void check_type_b_args(const SymbolSpan& nominal, int repetitions) {
  if (nominal.length < 1 || nominal.length > kSymbolsPerSlot)
    throw ConfigError("type B nominal length must be in 1..14");
  if (repetitions < 1) throw ConfigError("repetition count must be >= 1");
  if (nominal.start_symbol < 0 || nominal.start_symbol >= kSymbolsPerSlot)
    throw ConfigError("start symbol must be in 0..13");
}

Segment make_segment(int carrier, SymbolTime first, SymbolTime end, int nominal) {
  Segment seg;
  seg.span.carrier_id = carrier;
  seg.span.slot = first / kSymbolsPerSlot;
  seg.span.start_symbol = static_cast<int>(first % kSymbolsPerSlot);
  seg.span.length = static_cast<int>(end - first);
  seg.nominal_index = nominal;
  return seg;
}

// Splits [first, end) at slot borders, then emits the runs accepted by `keep`.
template <typename Keep>
void emit_runs(int carrier, SymbolTime first, SymbolTime end, int nominal,
               Keep&& keep, std::vector<Segment>& out) {
  SymbolTime t = first;
  while (t < end) {
    SymbolTime slot_end = (t / kSymbolsPerSlot + 1) * kSymbolsPerSlot;
    SymbolTime stop = std::min(end, slot_end);
    SymbolTime run_start = -1;
    for (SymbolTime s = t; s < stop; ++s) {
      if (keep(s)) {
        if (run_start < 0) run_start = s;
      } else if (run_start >= 0) {
        out.push_back(make_segment(carrier, run_start, s, nominal));
        run_start = -1;
      }
    }
    if (run_start >= 0) out.push_back(make_segment(carrier, run_start, stop, nominal));
    t = stop;
  }
}

}  // namespace

std::vector<Segment> segment_type_b(const SymbolSpan& nominal, int repetitions,
                                    const TddPattern& tdd,
                                    bool cross_slot_allowed) {
  check_type_b_args(nominal, repetitions);
  std::vector<Segment> out;
  const SymbolTime base = nominal.first_sym();
  for (int i = 0; i < repetitions; ++i) {
    SymbolTime first = base + static_cast<SymbolTime>(i) * nominal.length;
    SymbolTime end = first + nominal.length;
    if (!cross_slot_allowed) {
      // truncate at the border of the repetition's starting slot
      end = std::min(end, (first / kSymbolsPerSlot + 1) * kSymbolsPerSlot);
    }
    emit_runs(nominal.carrier_id, first, end, i,
              [&](SymbolTime t) { return valid_at(tdd, t); }, out);
  }
  return out;
}

std::vector<Segment> nominal_type_b(const SymbolSpan& nominal, int repetitions) {
  check_type_b_args(nominal, repetitions);
  std::vector<Segment> out;
  const SymbolTime base = nominal.first_sym();
  for (int i = 0; i < repetitions; ++i) {
    SymbolTime first = base + static_cast<SymbolTime>(i) * nominal.length;
    emit_runs(nominal.carrier_id, first, first + nominal.length, i,
              [](SymbolTime) { return true; }, out);
  }
  return out;
}

std::vector<Segment> enumerate_type_a(const SymbolSpan& sliv, int repetitions,
                                      int gap_slots, const TddPattern& tdd) {
  if (sliv.length < 1 || sliv.start_symbol + sliv.length > kSymbolsPerSlot)
    throw ConfigError("type A SLIV must fit one slot (S + L <= 14)");
  if (repetitions < 1) throw ConfigError("repetition count must be >= 1");
  if (gap_slots < 0) throw ConfigError("gap must be >= 0 slots");

  std::vector<Segment> out;
  for (int i = 0; i < repetitions; ++i) {
    SymbolSpan span = sliv;
    span.slot = sliv.slot + static_cast<std::int64_t>(i) * (1 + gap_slots);
    bool all_valid = true;
    for (int s = 0; s < span.length; ++s)
      all_valid &= is_valid_symbol(tdd, span.slot, span.start_symbol + s);
    if (all_valid) out.push_back(Segment{span, i});
  }
  return out;
}

std::vector<Segment> complementary_carrier_map(std::span<const Segment> nominal,
                                               const TddPattern& primary_tdd,
                                               int secondary_carrier) {
  std::vector<Segment> out;
  if (nominal.empty()) return out;

  int max_index = 0;
  for (const auto& seg : nominal) max_index = std::max(max_index, seg.nominal_index);

  for (int i = 0; i <= max_index; ++i) {
    bool conflicted = false;
    for (const auto& seg : nominal) {
      if (seg.nominal_index != i) continue;
      for (SymbolTime t = seg.span.first_sym(); t < seg.span.end_sym(); ++t)
        conflicted |= !valid_at(primary_tdd, t);
    }
    for (const auto& seg : nominal) {
      if (seg.nominal_index != i) continue;
      Segment s = seg;
      if (conflicted) s.span.carrier_id = secondary_carrier;
      out.push_back(s);
    }
  }
  std::sort(out.begin(), out.end(), [](const Segment& a, const Segment& b) {
    if (a.span.first_sym() != b.span.first_sym())
      return a.span.first_sym() < b.span.first_sym();
    return a.nominal_index < b.nominal_index;
  });
  return out;
}

}  // namespace cgsim
