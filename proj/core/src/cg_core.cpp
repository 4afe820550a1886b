#include "cgsim/cg_core.hpp"

#include <algorithm>

#include "cgsim/errors.hpp"

namespace cgsim {

std::string_view profile_name(Profile p) {
  switch (p) {
    case Profile::NR_R15: return "NR_R15";
    case Profile::NR_R16: return "NR_R16";
    case Profile::NRU_R16: return "NRU_R16";
  }
  return "?";
}

std::optional<Profile> parse_profile(std::string_view s) {
  if (s == "NR_R15") return Profile::NR_R15;
  if (s == "NR_R16") return Profile::NR_R16;
  if (s == "NRU_R16") return Profile::NRU_R16;
  return std::nullopt;
}

const ProfileGates& gates(Profile p) {
  static const ProfileGates r15{
      /*max_configurations=*/1,
      /*dci_format_0_2=*/false,
      /*group_release=*/false,
      /*type_b_repetition=*/false,
      /*type_b_cross_slot=*/false,
      /*phy_priority=*/false,
      /*explicit_ack=*/false,
      /*autonomous_tx=*/false,
      /*cg_uci=*/false,
      /*dfi=*/false,
      StartRule::FIRST_TO,
      /*ue_chooses_harq_id=*/false,
      /*ue_selects_rv_pattern=*/false,
      /*autonomous_retx=*/false,
      /*multi_harq_per_period=*/false,
  };
  static const ProfileGates r16{
      12, true,  true,  true,  true,  true,  false, false,
      false, false, StartRule::FIRST_OR_RV0_TO, false, false, false, false,
  };
  static const ProfileGates nru{
      12, false, false, true,  false, false, true,  true,
      true,  true,  StartRule::ANY_TO, true, true, true, true,
  };
  switch (p) {
    case Profile::NR_R15: return r15;
    case Profile::NR_R16: return r16;
    case Profile::NRU_R16: return nru;
  }
  return r15;
}

std::optional<RvPattern> RvPattern::parse(std::string_view s) {
  if (s == "0000") return rv0000();
  if (s == "0303") return rv0303();
  if (s == "0231") return rv0231();
  return std::nullopt;
}

std::string RvPattern::to_string() const {
  std::string s;
  for (int rv : seq_) s += static_cast<char>('0' + rv);
  return s;
}

bool RvPattern::contains(int rv) const {
  return std::find(seq_.begin(), seq_.end(), rv) != seq_.end();
}

std::vector<int> Fdra::resolve(int bandwidth_rbs) const {
  std::vector<int> rbs;
  switch (type) {
    case Type::T0_BITMAP:
      for (std::size_t g = 0; g < rbg_bitmap.size(); ++g) {
        if (rbg_bitmap[g] != '1') continue;
        for (int r = 0; r < rbg_size; ++r) {
          int rb = static_cast<int>(g) * rbg_size + r;
          if (rb < bandwidth_rbs) rbs.push_back(rb);
        }
      }
      break;
    case Type::T1_CONTIGUOUS:
      for (int r = start_rb; r < start_rb + length_rb && r < bandwidth_rbs; ++r)
        rbs.push_back(r);
      break;
    case Type::T2_INTERLACE:
      for (int r = interlace; r < bandwidth_rbs; r += 10) rbs.push_back(r);
      break;
  }
  return rbs;
}

ActivationResult validate_activation(const DciMessage& dci, Profile profile,
                                     bool multi_cg) {
  if (dci.purpose != DciPurpose::ACTIVATE) return {};
  if (dci.scrambling != Scrambling::CS_RNTI) return {};
  if (dci.ndi != 0 || dci.rv_field != 0 || dci.dfi_field != 0) return {};
  if (dci.format == DciFormat::F0_2 && !gates(profile).dci_format_0_2) return {};
  if (multi_cg) return {true, dci.harq_field};
  if (dci.harq_field != 0) return {};
  return {true, 0};
}

ReleaseResult validate_release(const DciMessage& dci, Profile profile,
                               const std::set<int>& targets) {
  if (dci.purpose != DciPurpose::RELEASE || targets.empty()) return {false, ""};
  if (dci.scrambling != Scrambling::CS_RNTI) return {false, ""};
  if (targets.size() == 1) return {true, ""};
  if (gates(profile).group_release) return {true, ""};
  return {false, "group_release"};
}

namespace {

void check_layout(const CgConfig& cfg, Profile profile) {
  if (cfg.k_repetitions < 1) throw ConfigError("K must be >= 1");
  if (cfg.period_slots < 1) throw ConfigError("period must be >= 1 slot");
  if (profile == Profile::NRU_R16) {
    if (cfg.nru_slots > cfg.period_slots)
      throw ConfigError("cg-nrofSlots exceeds the period");
    if (cfg.nru_tos_per_period() < cfg.k_repetitions)
      throw ConfigError("NR-U TOs per period below K");
    return;
  }
  if (cfg.repetition_type == RepetitionType::A) {
    if (static_cast<std::int64_t>(cfg.k_repetitions) * (1 + cfg.gap_slots) >
        cfg.period_slots)
      throw ConfigError("type A layout K*(1+gap) exceeds the period");
  } else {
    std::int64_t total = cfg.sliv.start_symbol +
                         static_cast<std::int64_t>(cfg.k_repetitions) * cfg.sliv.length;
    if (total > static_cast<std::int64_t>(cfg.period_slots) * kSymbolsPerSlot)
      throw ConfigError("type B layout exceeds the period");
  }
}

void append_period(const CgConfig& cfg, Profile profile, const TddPattern& tdd,
                   std::int64_t period_index, std::int64_t period_start_slot,
                   std::vector<Occasion>& out) {
  std::vector<Segment> segs;
  int tos = cfg.k_repetitions;
  if (profile == Profile::NRU_R16) {
    // nru_tos_per_slot mini-slot TOs per slot over nru_slots slots
    tos = cfg.nru_tos_per_period();
    int len = kSymbolsPerSlot / cfg.nru_tos_per_slot;
    for (int i = 0; i < tos; ++i) {
      SymbolSpan span;
      span.carrier_id = cfg.carrier_id;
      span.slot = period_start_slot + i / cfg.nru_tos_per_slot;
      span.start_symbol = (i % cfg.nru_tos_per_slot) * len;
      span.length = len;
      bool all_valid = true;
      for (int s = 0; s < span.length; ++s)
        all_valid &= is_valid_symbol(tdd, span.slot, span.start_symbol + s);
      if (all_valid) segs.push_back(Segment{span, i});
    }
  } else if (cfg.repetition_type == RepetitionType::A) {
    SymbolSpan sliv = cfg.sliv;
    sliv.carrier_id = cfg.carrier_id;
    sliv.slot = period_start_slot;
    segs = enumerate_type_a(sliv, cfg.k_repetitions, cfg.gap_slots, tdd);
  } else {
    SymbolSpan nominal = cfg.sliv;
    nominal.carrier_id = cfg.carrier_id;
    nominal.slot = period_start_slot;
    segs = segment_type_b(nominal, cfg.k_repetitions, tdd,
                          gates(profile).type_b_cross_slot);
  }

  Occasion cur;
  cur.index_in_period = -1;
  for (const auto& seg : segs) {
    if (seg.nominal_index != cur.index_in_period) {
      if (cur.index_in_period >= 0) out.push_back(std::move(cur));
      cur = Occasion{};
      cur.cg_id = cfg.cg_id;
      cur.period_index = period_index;
      cur.index_in_period = seg.nominal_index;
      cur.rv_default = cfg.rv_pattern.rv_at(seg.nominal_index);
    }
    cur.segments.push_back(seg);
  }
  if (cur.index_in_period >= 0) out.push_back(std::move(cur));
}

}  // namespace

std::vector<Occasion> enumerate_occasions(const CgConfig& cfg, Profile profile,
                                          const TddPattern& tdd,
                                          std::int64_t window_start_slot,
                                          std::int64_t window_slots) {
  check_layout(cfg, profile);
  if (window_slots < cfg.period_slots)
    throw ConfigError("window must cover at least one period");

  std::vector<Occasion> out;
  std::int64_t window_end = window_start_slot + window_slots;
  std::int64_t n = std::max<std::int64_t>(
      0, (window_start_slot - cfg.offset_slots) / cfg.period_slots);
  for (;; ++n) {
    std::int64_t start = cfg.offset_slots + n * cfg.period_slots;
    if (start >= window_end) break;
    if (start + cfg.period_slots <= window_start_slot) continue;
    append_period(cfg, profile, tdd, n, start, out);
  }
  return out;
}

namespace {

std::vector<Segment> nominal_layout(const CgConfig& cfg, Profile profile,
                                    std::int64_t period_start_slot) {
  if (profile == Profile::NRU_R16) {
    std::vector<Segment> segs;
    int len = kSymbolsPerSlot / cfg.nru_tos_per_slot;
    for (int i = 0; i < cfg.nru_tos_per_period(); ++i) {
      SymbolSpan span;
      span.carrier_id = cfg.carrier_id;
      span.slot = period_start_slot + i / cfg.nru_tos_per_slot;
      span.start_symbol = (i % cfg.nru_tos_per_slot) * len;
      span.length = len;
      segs.push_back(Segment{span, i});
    }
    return segs;
  }
  SymbolSpan base = cfg.sliv;
  base.carrier_id = cfg.carrier_id;
  base.slot = period_start_slot;
  if (cfg.repetition_type == RepetitionType::B)
    return nominal_type_b(base, cfg.k_repetitions);
  return enumerate_type_a(base, cfg.k_repetitions, cfg.gap_slots,
                          TddPattern::all_uplink());
}

std::vector<Occasion> group_segments(const CgConfig& cfg,
                                     std::int64_t period_index,
                                     const std::vector<Segment>& segs) {
  std::vector<Occasion> out;
  Occasion cur;
  cur.index_in_period = -1;
  for (const auto& seg : segs) {
    if (seg.nominal_index != cur.index_in_period) {
      if (cur.index_in_period >= 0) out.push_back(std::move(cur));
      cur = Occasion{};
      cur.cg_id = cfg.cg_id;
      cur.period_index = period_index;
      cur.index_in_period = seg.nominal_index;
      cur.rv_default = cfg.rv_pattern.rv_at(seg.nominal_index);
    }
    cur.segments.push_back(seg);
  }
  if (cur.index_in_period >= 0) out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::vector<Occasion> enumerate_occasions_complementary(
    const CgConfig& cfg, Profile profile, const TddPattern& primary_tdd,
    int secondary_carrier, std::int64_t window_start_slot,
    std::int64_t window_slots) {
  check_layout(cfg, profile);
  if (window_slots < cfg.period_slots)
    throw ConfigError("window must cover at least one period");

  std::vector<Occasion> out;
  std::int64_t window_end = window_start_slot + window_slots;
  std::int64_t n = std::max<std::int64_t>(
      0, (window_start_slot - cfg.offset_slots) / cfg.period_slots);
  for (;; ++n) {
    std::int64_t start = cfg.offset_slots + n * cfg.period_slots;
    if (start >= window_end) break;
    if (start + cfg.period_slots <= window_start_slot) continue;
    auto nominal = nominal_layout(cfg, profile, start);
    auto mapped = complementary_carrier_map(nominal, primary_tdd, secondary_carrier);
    auto occs = group_segments(cfg, n, mapped);
    out.insert(out.end(), occs.begin(), occs.end());
  }
  return out;
}

std::vector<int> allowed_start_indices(const CgConfig& cfg, Profile profile) {
  std::vector<int> idx;
  if (cfg.flexible_start) {
    for (int i = 0; i < cfg.k_repetitions; ++i) idx.push_back(i);
    return idx;
  }
  switch (gates(profile).start_rule) {
    case StartRule::FIRST_TO:
      idx.push_back(0);
      break;
    case StartRule::FIRST_OR_RV0_TO:
      if (!cfg.starting_from_rv0 || cfg.k_repetitions >= 8) {
        idx.push_back(0);
      } else {
        for (int i = 0; i < cfg.k_repetitions; ++i)
          if (cfg.rv_pattern.rv_at(i) == 0) idx.push_back(i);
      }
      break;
    case StartRule::ANY_TO:
      for (int i = 0; i < cfg.nru_tos_per_period(); ++i) idx.push_back(i);
      break;
  }
  return idx;
}

int rv_for_start(const CgConfig& cfg, int start_index, int occasion_index) {
  if (cfg.flexible_start)
    return cfg.rv_pattern.rv_at(occasion_index - start_index);
  return cfg.rv_pattern.rv_at(occasion_index);
}

int occasions_available_legacy(int K, int a, int b) {
  if (b < 1 || b > K) return 0;
  int skipped = ((b - 1 + a - 1) / a) * a;  // ceil((b-1)/a) * a
  return std::max(0, K - skipped);
}

int occasions_available_flexible(int K, int b) {
  if (b < 1 || b > K) return 0;
  return K - b + 1;
}

int legacy_start_occasion(const RvPattern& pattern, int arrival_b) {
  int a = pattern.rv0_spacing();
  return ((arrival_b - 1 + a - 1) / a) * a;
}

void CgStateMachine::configure(const CgConfig& cfg) {
  Entry e;
  // Type 1 activates via the RRC time offset, no DCI involved
  if (cfg.cg_type == CgType::TYPE1) e.state = CgActivationState::ACTIVE;
  entries_.emplace_back(cfg.cg_id, e);
}

const CgStateMachine::Entry& CgStateMachine::at(int cg_id) const {
  for (const auto& [id, e] : entries_)
    if (id == cg_id) return e;
  throw ConfigError("unknown cg_id " + std::to_string(cg_id));
}

bool CgStateMachine::apply_activation(int cg_id, const DciMessage& dci,
                                      Profile profile, bool multi_cg) {
  auto r = validate_activation(dci, profile, multi_cg);
  if (!r.valid) return false;
  if (multi_cg && r.target_cg != cg_id) return false;
  for (auto& [id, e] : entries_) {
    if (id != cg_id) continue;
    if (e.state == CgActivationState::ACTIVE) return true;  // idempotent
    e.state = CgActivationState::ACTIVE;
    e.pending_confirmation = true;
    return true;
  }
  return false;
}

bool CgStateMachine::apply_release(const DciMessage& dci, Profile profile,
                                   const std::set<int>& targets) {
  auto r = validate_release(dci, profile, targets);
  if (!r.valid) return false;
  for (auto& [id, e] : entries_) {
    if (!targets.count(id)) continue;
    if (e.state == CgActivationState::RELEASED) continue;  // no-op
    e.state = CgActivationState::RELEASED;
    e.pending_confirmation = true;
  }
  return true;
}

void CgStateMachine::confirm(int cg_id) {
  for (auto& [id, e] : entries_)
    if (id == cg_id) e.pending_confirmation = false;
}

CgActivationState CgStateMachine::state(int cg_id) const { return at(cg_id).state; }

bool CgStateMachine::pending_confirmation(int cg_id) const {
  return at(cg_id).pending_confirmation;
}

bool CgStateMachine::any_active() const {
  return std::any_of(entries_.begin(), entries_.end(), [](const auto& p) {
    return p.second.state == CgActivationState::ACTIVE;
  });
}

}  // namespace cgsim
