#include "cgsim/ue_mac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cgsim/errors.hpp"

namespace cgsim {

std::int64_t traffic_epoch_slots(const TrafficModel& t) {
  switch (t.kind) {
    case TrafficModel::Kind::DETERMINISTIC:
    case TrafficModel::Kind::JITTERED:
      return t.period_slots;
    case TrafficModel::Kind::UNIFORM_IN_PERIOD:
      return t.n_slots;
  }
  return 1;
}

double traffic_arrival_instant(const TrafficModel& t, std::int64_t epoch, Rng& rng) {
  const double epoch_start =
      static_cast<double>(epoch * traffic_epoch_slots(t) * kSymbolsPerSlot);
  switch (t.kind) {
    case TrafficModel::Kind::DETERMINISTIC:
      return epoch_start + static_cast<double>(t.phase_slots * kSymbolsPerSlot);
    case TrafficModel::Kind::UNIFORM_IN_PERIOD: {
      auto slot = static_cast<double>(rng.next_below(static_cast<std::uint64_t>(t.n_slots)));
      return epoch_start + slot * kSymbolsPerSlot;
    }
    case TrafficModel::Kind::JITTERED:
      return epoch_start + rng.next_double() * t.jitter_slots * kSymbolsPerSlot;
  }
  return epoch_start;
}

LbtOutcome lbt_gate_lbe(const LbtParams& lbt, int to_length_symbols, Rng& rng) {
  if (!rng.bernoulli(lbt.p_busy)) return {true, 0};
  int backoff = static_cast<int>(rng.uniform_int(1, lbt.backoff_window_symbols));
  if (to_length_symbols - backoff < 1) return {false, backoff};
  if (rng.bernoulli(lbt.p_busy)) return {false, backoff};  // single retry
  return {true, backoff};
}

std::int64_t ffp_index(SymbolTime t, int ffp_slots) {
  return t / (static_cast<SymbolTime>(ffp_slots) * kSymbolsPerSlot);
}

OverlapDecision resolve_overlap(Profile profile, std::span<const GrantRef> grants) {
  OverlapDecision d;
  if (grants.empty()) return d;

  auto better = [&](std::size_t a, std::size_t b) {
    const GrantRef& ga = grants[a];
    const GrantRef& gb = grants[b];
    if (ga.nru_autonomous_retx != gb.nru_autonomous_retx)
      return ga.nru_autonomous_retx;
    if (profile == Profile::NR_R15) {
      if (ga.is_dynamic != gb.is_dynamic) return ga.is_dynamic;
    } else {
      if (ga.priority != gb.priority) return ga.priority == PhyPriority::HIGH;
      if (ga.is_dynamic != gb.is_dynamic) return ga.is_dynamic;
    }
    if (ga.start != gb.start) return ga.start < gb.start;
    return ga.cg_id < gb.cg_id;
  };

  std::size_t win = 0;
  for (std::size_t i = 1; i < grants.size(); ++i)
    if (better(i, win)) win = i;
  d.winner = win;
  for (std::size_t i = 0; i < grants.size(); ++i)
    if (i != win) d.cancelled.push_back(i);
  return d;
}

SharedPoolPlan shared_pool_fallback(int K, int emitted_x, int k_plus, Rng& rng) {
  SharedPoolPlan plan;
  if (emitted_x <= 0) {
    plan.postponed = true;
    return plan;
  }
  for (int i = emitted_x; i < K; ++i)
    plan.occasion_choices.push_back(
        static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k_plus))));
  return plan;
}

namespace {

std::int64_t layout_cycle(const CgConfig& cfg, const TddPattern& tdd) {
  std::int64_t cycle = std::lcm<std::int64_t>(cfg.period_slots, tdd.period_slots) /
                       cfg.period_slots;
  return std::min<std::int64_t>(cycle, 128);
}

}  // namespace

UeMac::UeMac(int ue_id, Profile profile, std::vector<CgConfig> cgs,
             std::map<int, TddPattern> carrier_tdd, UeMacParams params)
    : ue_id_(ue_id),
      profile_(profile),
      params_(params),
      carrier_tdd_(std::move(carrier_tdd)) {
  for (auto& cfg : cgs) {
    CgRuntime rt;
    rt.cfg = cfg;
    auto it = carrier_tdd_.find(cfg.carrier_id);
    if (it == carrier_tdd_.end())
      throw ConfigError("cg " + std::to_string(cfg.cg_id) + " references carrier " +
                        std::to_string(cfg.carrier_id) + " without a TDD pattern");
    rt.tdd = &it->second;
    rt.cache_cycle = layout_cycle(cfg, it->second);
    states_.configure(cfg);
    cgs_.push_back(std::move(rt));
  }
}

const std::vector<Occasion>& UeMac::occasions_in_period(int cg_index,
                                                        std::int64_t period) const {
  const CgRuntime& rt = cgs_[static_cast<std::size_t>(cg_index)];
  std::int64_t residue = period % rt.cache_cycle;
  auto it = rt.layout_cache.find(residue);
  if (it == rt.layout_cache.end()) {
    auto canonical =
        params_.complementary_secondary_carrier
            ? enumerate_occasions_complementary(
                  rt.cfg, profile_, *rt.tdd,
                  *params_.complementary_secondary_carrier,
                  rt.cfg.offset_slots + residue * rt.cfg.period_slots,
                  rt.cfg.period_slots)
            : enumerate_occasions(rt.cfg, profile_, *rt.tdd,
                                  rt.cfg.offset_slots + residue * rt.cfg.period_slots,
                                  rt.cfg.period_slots);
    it = rt.layout_cache.emplace(residue, std::move(canonical)).first;
  }
  std::int64_t shift_slots = (period - residue) * rt.cfg.period_slots;
  if (shift_slots == 0) return it->second;

  // materialize the shifted period into a per-call scratch entry
  auto& scratch = rt.layout_cache[-1 - period % 2];  // two rotating scratch slots
  scratch = it->second;
  for (auto& occ : scratch) {
    occ.period_index = period;
    for (auto& seg : occ.segments) seg.span.slot += shift_slots;
  }
  return scratch;
}

std::int64_t UeMac::tos_per_period(int cg_index) const {
  const CgConfig& cfg = cgs_[static_cast<std::size_t>(cg_index)].cfg;
  return profile_ == Profile::NRU_R16 ? cfg.nru_tos_per_period()
                                      : cfg.k_repetitions;
}

std::int64_t UeMac::to_index(int cg_index, std::int64_t period,
                             int index_in_period) const {
  return period * tos_per_period(cg_index) + index_in_period;
}

std::optional<GrantChoice> UeMac::earliest_start(const CgRuntime& rt, int cg_index,
                                                 double ready_instant) const {
  if (states_.state(rt.cfg.cg_id) != CgActivationState::ACTIVE) return std::nullopt;
  auto allowed = allowed_start_indices(rt.cfg, profile_);

  std::int64_t p0 = 0;
  if (ready_instant > 0) {
    auto ready_slot = static_cast<std::int64_t>(ready_instant) / kSymbolsPerSlot;
    p0 = std::max<std::int64_t>(0, (ready_slot - rt.cfg.offset_slots) /
                                       rt.cfg.period_slots);
  }
  p0 = std::max(p0, rt.next_free_period);

  for (std::int64_t p = p0; p <= p0 + rt.cache_cycle + 1; ++p) {
    for (const auto& occ : occasions_in_period(cg_index, p)) {
      if (p == rt.next_free_period && occ.index_in_period < rt.bundles_in_period)
        continue;  // already committed to an earlier bundle
      if (static_cast<double>(occ.start_sym()) < ready_instant) continue;
      if (!std::binary_search(allowed.begin(), allowed.end(), occ.index_in_period))
        continue;
      return GrantChoice{cg_index, p, occ.index_in_period, occ.start_sym()};
    }
  }
  return std::nullopt;
}

std::optional<GrantChoice> UeMac::select_grant(double ready_instant) const {
  std::optional<GrantChoice> best;
  double ready = ready_instant + params_.processing_margin_symbols;
  for (std::size_t i = 0; i < cgs_.size(); ++i) {
    auto c = earliest_start(cgs_[i], static_cast<int>(i), ready);
    if (!c) continue;
    if (!best || c->start_sym < best->start_sym ||
        (c->start_sym == best->start_sym &&
         cg(c->cg_index).cg_id < cg(best->cg_index).cg_id))
      best = c;
  }
  return best;
}

int UeMac::assign_harq_id(std::int64_t period_index) {
  if (!gates(profile_).ue_chooses_harq_id)
    return static_cast<int>(period_index % params_.harq_pool_size);
  // NR-U: UE picks the lowest-numbered free process and signals it in CG-UCI
  for (int id = 0; id < params_.harq_pool_size; ++id) {
    bool busy = false;
    for (const auto& p : harq_)
      busy |= p.harq_id == id && (p.state == HarqProcess::State::AWAITING_FEEDBACK ||
                                  p.state == HarqProcess::State::RETRANSMITTING);
    if (!busy) return id;
  }
  return 0;
}

HarqProcess& UeMac::obtain_process(int harq_id) {
  for (auto& p : harq_)
    if (p.harq_id == harq_id) return p;
  harq_.push_back(HarqProcess{});
  harq_.back().harq_id = harq_id;
  return harq_.back();
}

HarqProcess* UeMac::process(int harq_id) {
  for (auto& p : harq_)
    if (p.harq_id == harq_id) return &p;
  return nullptr;
}

TxPlan UeMac::transmit_repetitions(const Packet& packet, const GrantChoice& choice) {
  CgRuntime& rt = cgs_[static_cast<std::size_t>(choice.cg_index)];
  const CgConfig& cfg = rt.cfg;
  const bool nru = profile_ == Profile::NRU_R16;

  TxPlan plan;
  plan.cg_index = choice.cg_index;
  plan.period_index = choice.period_index;
  plan.start_index = choice.occasion_index;
  plan.nominal_k = cfg.k_repetitions;
  plan.harq_id = assign_harq_id(choice.period_index);

  const int tos = static_cast<int>(tos_per_period(choice.cg_index));
  const int bundle_end = nru
      ? std::min(tos, choice.occasion_index + cfg.k_repetitions)
      : cfg.k_repetitions;
  plan.occasions_available = bundle_end - choice.occasion_index;

  for (const auto& occ : occasions_in_period(choice.cg_index, choice.period_index)) {
    if (occ.index_in_period < choice.occasion_index ||
        occ.index_in_period >= bundle_end)
      continue;
    PlannedEmission e;
    e.occasion = occ;
    e.rv = nru ? cfg.rv_pattern.rv_at(occ.index_in_period - choice.occasion_index)
               : rv_for_start(cfg, choice.occasion_index, occ.index_in_period);
    e.harq_id = plan.harq_id;
    if (params_.attach_cg_uci) e.uci = CgUci{plan.harq_id, e.rv, 0, false};
    plan.emissions.push_back(std::move(e));
  }

  HarqProcess& proc = obtain_process(plan.harq_id);
  proc.ndi = 0;
  proc.attempts = 1;
  proc.rv_cursor = plan.occasions_available;
  proc.state = HarqProcess::State::AWAITING_FEEDBACK;
  proc.packet_id = packet.id;
  proc.cg_index = choice.cg_index;
  proc.cgt_deadline = cfg.cg_timer_slots > 0
      ? choice.start_sym + static_cast<SymbolTime>(cfg.cg_timer_slots) * kSymbolsPerSlot
      : std::numeric_limits<SymbolTime>::max() / 2;
  proc.retx_deadline_to = -1;
  if (nru && cfg.cg_retx_timer_tos > 0)
    proc.retx_deadline_to =
        to_index(choice.cg_index, choice.period_index, bundle_end - 1) +
        cfg.cg_retx_timer_tos;

  // advance the period cursor: one process per period under NR, several
  // bundles under NR-U
  if (nru) {
    rt.next_free_period = choice.period_index;
    rt.bundles_in_period = bundle_end;
    if (bundle_end >= tos) {
      rt.next_free_period = choice.period_index + 1;
      rt.bundles_in_period = 0;
    }
  } else {
    rt.next_free_period = choice.period_index + 1;
    rt.bundles_in_period = 0;
  }
  return plan;
}

TxPlan UeMac::plan_retransmission(int harq_id, const GrantChoice& choice) {
  CgRuntime& rt = cgs_[static_cast<std::size_t>(choice.cg_index)];
  const CgConfig& cfg = rt.cfg;
  HarqProcess& proc = obtain_process(harq_id);

  TxPlan plan;
  plan.cg_index = choice.cg_index;
  plan.period_index = choice.period_index;
  plan.start_index = choice.occasion_index;
  plan.nominal_k = cfg.k_repetitions;
  plan.harq_id = harq_id;

  const bool nru = profile_ == Profile::NRU_R16;
  const int bundle_end =
      nru ? choice.occasion_index + 1  // autonomous retx takes the next TO
          : cfg.k_repetitions;
  plan.occasions_available = bundle_end - choice.occasion_index;

  for (const auto& occ : occasions_in_period(choice.cg_index, choice.period_index)) {
    if (occ.index_in_period < choice.occasion_index ||
        occ.index_in_period >= bundle_end)
      continue;
    PlannedEmission e;
    e.occasion = occ;
    e.rv = cfg.rv_pattern.rv_at(proc.rv_cursor + (occ.index_in_period - choice.occasion_index));
    e.harq_id = harq_id;
    e.retransmission = true;
    if (params_.attach_cg_uci) e.uci = CgUci{harq_id, e.rv, proc.ndi, false};
    plan.emissions.push_back(std::move(e));
  }

  proc.attempts += 1;
  proc.rv_cursor += plan.occasions_available;
  proc.state = HarqProcess::State::AWAITING_FEEDBACK;
  if (nru && cfg.cg_retx_timer_tos > 0)
    proc.retx_deadline_to =
        to_index(choice.cg_index, choice.period_index, bundle_end - 1) +
        cfg.cg_retx_timer_tos;
  return plan;
}

std::vector<int> UeMac::nru_feedback_step(std::int64_t now_to_index,
                                          SymbolTime now_sym) {
  std::vector<int> due;
  for (auto& p : harq_) {
    if (p.state != HarqProcess::State::AWAITING_FEEDBACK) continue;
    if (now_sym >= p.cgt_deadline) {
      p.state = HarqProcess::State::DONE_FAILED;
      continue;
    }
    if (p.retx_deadline_to >= 0 && p.retx_deadline_to <= now_to_index) {
      p.state = HarqProcess::State::RETRANSMITTING;
      due.push_back(p.harq_id);
    }
  }
  std::sort(due.begin(), due.end());
  return due;
}

void UeMac::nr_feedback_step(SymbolTime now_sym) {
  for (auto& p : harq_)
    if (p.state == HarqProcess::State::AWAITING_FEEDBACK &&
        now_sym >= p.cgt_deadline)
      p.state = HarqProcess::State::DONE_ACK;  // ACK is implicit in NR
}

void UeMac::on_cg_dfi(std::span<const std::pair<int, bool>> bits,
                      std::int64_t now_to_index) {
  for (const auto& [harq_id, ack] : bits) {
    HarqProcess* p = process(harq_id);
    if (!p) continue;
    if (p->state == HarqProcess::State::DONE_ACK ||
        p->state == HarqProcess::State::DONE_FAILED)
      continue;
    if (ack) {
      p->state = HarqProcess::State::DONE_ACK;
      p->retx_deadline_to = -1;
    } else if (p->state == HarqProcess::State::AWAITING_FEEDBACK) {
      p->retx_deadline_to = now_to_index;  // NACK: retransmit at the next TO
    }
  }
}

bool UeMac::on_retx_dci(const DciMessage& dci) {
  if (dci.scrambling != Scrambling::CS_RNTI || dci.ndi != 1) return false;
  HarqProcess* p = process(dci.harq_field);
  if (!p || p->state != HarqProcess::State::AWAITING_FEEDBACK) return false;
  p->state = HarqProcess::State::RETRANSMITTING;
  return true;
}

void UeMac::record_emission_grid(int carrier, SymbolTime end, int rb_tag,
                                 std::int64_t packet_id) {
  emission_grids_[{carrier, end, rb_tag}] = packet_id;
}

std::optional<std::int64_t> UeMac::handle_common_nack(int carrier, SymbolTime end,
                                                      int rb_tag) const {
  auto it = emission_grids_.find({carrier, end, rb_tag});
  if (it == emission_grids_.end()) return std::nullopt;
  return it->second;
}

}  // namespace cgsim
