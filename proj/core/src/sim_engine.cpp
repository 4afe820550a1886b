#include "cgsim/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>

#include "cgsim/errors.hpp"

namespace cgsim {

std::string trace_kind_name(TraceEvent::Kind k) {
  switch (k) {
    case TraceEvent::Kind::TX: return "TX";
    case TraceEvent::Kind::RETX: return "RETX";
    case TraceEvent::Kind::ACKED: return "ACKED";
    case TraceEvent::Kind::FAILED: return "FAILED";
    case TraceEvent::Kind::DELIVERED: return "DELIVERED";
    case TraceEvent::Kind::LBT_BLOCKED: return "LBT_BLOCKED";
    case TraceEvent::Kind::CANCELLED: return "CANCELLED";
  }
  return "?";
}

namespace {

// tie order at equal timestamps: feedback < arrival < transmission; the TO
// walk runs between arrival and transmission so autonomous retransmissions
// can claim the TO before new data does
enum class EvKind : int {
  FEEDBACK = 0,
  ARRIVAL = 1,
  TO_CHECK = 2,
  TRANSMISSION = 3,
  RECEPTION = 4,
};

struct Event {
  SymbolTime t = 0;
  EvKind kind = EvKind::ARRIVAL;
  int ue_id = 0;
  std::int64_t seq = 0;
  std::int64_t a = 0;  // emission id / epoch / cell key
  std::int64_t b = 0;  // to index
  int c = 0;           // cg index
  double x = 0.0;      // arrival instant
  FeedbackMsg fb;
};

struct EventAfter {
  bool operator()(const Event& l, const Event& r) const {
    if (l.t != r.t) return l.t > r.t;
    if (l.kind != r.kind) return l.kind > r.kind;
    if (l.ue_id != r.ue_id) return l.ue_id > r.ue_id;
    return l.seq > r.seq;
  }
};

struct EmissionRec {
  std::int64_t id = 0;
  int ue_id = 0;
  std::int64_t packet_id = -1;
  int harq_id = 0;
  int cg_index = -1;
  int cg_id = -1;
  std::int64_t to_index = -1;
  std::vector<Segment> segments;
  int rv = 0;
  bool has_uci = false;
  bool retransmission = false;
  bool dynamic_grant = false;
  bool shared_pool = false;
  int rb_tag = 0;
  int carrier = 0;
  int rb_count = 1;
  SymbolTime start = 0, end = 0;
  PhyPriority priority = PhyPriority::LOW;
  enum class State { PENDING, SENT, CANCELLED } state = State::PENDING;
};

struct TbState {
  int ue_id = 0;
  std::int64_t packet_id = 0;
  int harq_id = 0;
  int cg_index = 0;
  double decode_u = 1.0;
  bool decoded = false;
  std::vector<ReceivedSegment> accum;
  int outstanding = 0;  // receptions still pending
  bool any_identified = false;
  SymbolTime cgt_deadline = 0;
  bool after_common_nack = false;
  std::optional<RvRotation> rotation;
};

struct PacketState {
  Packet pkt;
  int ue_id = 0;
  SymbolTime window_end = 0;
  bool has_first_emission = false;
};

struct PoolCell {
  std::vector<std::int64_t> emission_ids;
  bool rx_scheduled = false;
};

class Engine {
 public:
  Engine(const ScenarioConfig& cfg, std::uint64_t seed, std::uint64_t stream,
         std::vector<TraceEvent>* trace)
      : cfg_(cfg), rng_(seed, stream), trace_(trace) {
    horizon_ = cfg.duration_slots * kSymbolsPerSlot;
    std::map<int, TddPattern> tdd;
    for (const auto& c : cfg.carriers) tdd[c.id] = c.tdd;

    std::vector<UeScenario> ues = cfg.ues;
    std::sort(ues.begin(), ues.end(),
              [](const UeScenario& a, const UeScenario& b) { return a.ue_id < b.ue_id; });
    for (const auto& sc : ues) {
      std::vector<CgConfig> cgs;
      std::vector<DciFormat> formats;
      auto ids = sc.cg_ids;
      std::sort(ids.begin(), ids.end());
      for (int id : ids) {
        cgs.push_back(cfg.grant(id)->cg);
        formats.push_back(cfg.grant(id)->activation_dci_format);
      }
      UeMacParams params;
      params.harq_pool_size = sc.harq_pool_size;
      params.processing_margin_symbols = cfg.processing_margin_symbols;
      params.attach_cg_uci = effective_cg_uci(cfg, sc);
      if (cfg.enhancements.complementary_tdd)
        params.complementary_secondary_carrier = cfg.secondary_carrier;
      ues_.push_back(UeRt{sc, UeMac(sc.ue_id, cfg.profile, cgs, tdd, params),
                          UeMetrics{}, {}});
      ues_.back().metrics.ue_id = sc.ue_id;

      // Type 2 grants activate through a validated DCI, Type 1 on configure
      UeRt& u = ues_.back();
      bool multi = cgs.size() > 1;
      for (std::size_t i = 0; i < cgs.size(); ++i) {
        if (cgs[i].cg_type != CgType::TYPE2) continue;
        DciMessage dci;
        dci.purpose = DciPurpose::ACTIVATE;
        dci.format = formats[i];
        dci.harq_field = multi ? cgs[i].cg_id : 0;
        u.mac.states().apply_activation(cgs[i].cg_id, dci, cfg.profile, multi);
      }
    }
  }

  ReplicationResult run() {
    for (std::size_t i = 0; i < ues_.size(); ++i) schedule_arrival(ues_[i], 0);
    while (!q_.empty()) {
      Event e = q_.top();
      q_.pop();
      if (e.t >= horizon_) break;
      switch (e.kind) {
        case EvKind::FEEDBACK: handle_feedback(e); break;
        case EvKind::ARRIVAL: handle_arrival(e); break;
        case EvKind::TO_CHECK: handle_to_check(e); break;
        case EvKind::TRANSMISSION: handle_transmission(e); break;
        case EvKind::RECEPTION: handle_reception(e); break;
      }
    }
    finalize();
    ReplicationResult out;
    for (auto& u : ues_) {
      std::sort(u.metrics.latencies_us.begin(), u.metrics.latencies_us.end());
      out.ues.push_back(u.metrics);
    }
    return out;
  }

 private:
  struct UeRt {
    UeScenario sc;
    UeMac mac;
    UeMetrics metrics;
    std::vector<std::int64_t> live;  // PENDING emissions, overlap candidates
  };

  void push(Event e) {
    e.seq = ++seq_;
    q_.push(std::move(e));
  }

  UeRt& ue(int ue_id) {
    for (auto& u : ues_)
      if (u.sc.ue_id == ue_id) return u;
    throw ConfigError("unknown ue " + std::to_string(ue_id));
  }

  void trace(TraceEvent ev) {
    if (trace_) trace_->push_back(ev);
  }

  void schedule_arrival(UeRt& u, std::int64_t epoch) {
    if (epoch * traffic_epoch_slots(u.sc.traffic) >= cfg_.duration_slots) return;
    double instant = traffic_arrival_instant(u.sc.traffic, epoch, rng_);
    Event e;
    e.t = static_cast<SymbolTime>(std::ceil(instant));
    e.kind = EvKind::ARRIVAL;
    e.ue_id = u.sc.ue_id;
    e.a = epoch;
    e.x = instant;
    push(std::move(e));
  }

  std::int64_t add_emission(UeRt& u, const PlannedEmission& pe, int cg_index,
                            std::int64_t packet_id) {
    const CgConfig& c = u.mac.cg(cg_index);
    EmissionRec rec;
    rec.id = ++next_emission_;
    rec.ue_id = u.sc.ue_id;
    rec.packet_id = packet_id;
    rec.harq_id = pe.harq_id;
    rec.cg_index = cg_index;
    rec.cg_id = c.cg_id;
    rec.to_index = u.mac.to_index(cg_index, pe.occasion.period_index,
                                  pe.occasion.index_in_period);
    rec.segments = pe.occasion.segments;
    rec.rv = pe.rv;
    rec.has_uci = pe.uci.has_value();
    rec.retransmission = pe.retransmission;
    rec.rb_tag = c.cg_id;
    rec.carrier = pe.occasion.segments.front().span.carrier_id;
    rec.rb_count = std::max<std::size_t>(1, c.fdra.resolve(cfg_.bandwidth_rbs).size());
    rec.start = pe.occasion.start_sym();
    rec.end = pe.occasion.end_sym();
    rec.priority = c.phy_priority;
    std::int64_t id = rec.id;
    emissions_.emplace(id, std::move(rec));
    u.live.push_back(id);
    Event e;
    e.t = emissions_[id].start;
    e.kind = EvKind::TRANSMISSION;
    e.ue_id = u.sc.ue_id;
    e.a = id;
    push(std::move(e));
    return id;
  }

  void schedule_plan(UeRt& u, const TxPlan& plan, std::int64_t packet_id,
                     TbState& tb) {
    for (const auto& pe : plan.emissions) {
      add_emission(u, pe, plan.cg_index, packet_id);
      tb.outstanding += 1;
    }
    auto* proc = u.mac.process(plan.harq_id);
    if (proc && proc->retx_deadline_to >= 0)
      schedule_to_check(u, plan.cg_index, proc->retx_deadline_to);
  }

  // nominal NR-U TO grid arithmetic (independent of TDD validity)
  SymbolTime nominal_to_start(const CgConfig& c, std::int64_t to_idx) const {
    std::int64_t tos = c.nru_tos_per_period();
    std::int64_t period = to_idx / tos;
    std::int64_t pos = to_idx % tos;
    std::int64_t slot = c.offset_slots + period * c.period_slots + pos / c.nru_tos_per_slot;
    int len = kSymbolsPerSlot / c.nru_tos_per_slot;
    return slot * kSymbolsPerSlot + (pos % c.nru_tos_per_slot) * len;
  }

  std::int64_t to_index_at(const CgConfig& c, SymbolTime t) const {
    std::int64_t tos = c.nru_tos_per_period();
    std::int64_t slot = t / kSymbolsPerSlot;
    std::int64_t period =
        std::max<std::int64_t>(0, (slot - c.offset_slots) / c.period_slots - 1);
    std::int64_t lo = period * tos;
    while (nominal_to_start(c, lo) < t) ++lo;  // bounded within two periods
    return lo;
  }

  void schedule_to_check(UeRt& u, int cg_index, std::int64_t to_idx) {
    Event e;
    e.t = nominal_to_start(u.mac.cg(cg_index), to_idx);
    e.kind = EvKind::TO_CHECK;
    e.ue_id = u.sc.ue_id;
    e.b = to_idx;
    e.c = cg_index;
    push(std::move(e));
  }

  std::optional<GrantChoice> occasion_at_or_after(UeRt& u, int cg_index,
                                                  std::int64_t to_idx) {
    std::int64_t tos = u.mac.tos_per_period(cg_index);
    for (std::int64_t t = to_idx; t < to_idx + 256 * tos; ++t) {
      std::int64_t period = t / tos;
      int pos = static_cast<int>(t % tos);
      for (const auto& occ : u.mac.occasions_in_period(cg_index, period))
        if (occ.index_in_period == pos)
          return GrantChoice{cg_index, period, pos, occ.start_sym()};
    }
    return std::nullopt;
  }

  void handle_arrival(const Event& e) {
    UeRt& u = ue(e.ue_id);
    schedule_arrival(u, e.a + 1);

    std::int64_t pid = ++next_packet_;
    PacketState ps;
    ps.ue_id = u.sc.ue_id;
    ps.pkt.id = pid;
    ps.pkt.arrival_instant = e.x;
    ps.pkt.arrival_symbol = e.t;
    ps.pkt.size_bits = u.sc.traffic.payload_bits;
    ps.pkt.deadline_symbols = u.sc.deadline_slots * kSymbolsPerSlot;
    ps.window_end =
        (e.a + 1) * traffic_epoch_slots(u.sc.traffic) * kSymbolsPerSlot;
    u.metrics.offered += 1;

    auto choice = u.mac.select_grant(e.x);
    if (!choice) return;  // no active grant: the packet dies at its deadline
    if (cfg_.confine_to_arrival_period && choice->start_sym >= ps.window_end)
      return;  // missed every TO of its own period

    TbState tb;
    tb.ue_id = u.sc.ue_id;
    tb.packet_id = pid;
    tb.cg_index = choice->cg_index;
    tb.decode_u = rng_.next_double();

    TxPlan plan = u.mac.transmit_repetitions(ps.pkt, *choice);
    tb.harq_id = plan.harq_id;
    tb.cgt_deadline = u.mac.process(plan.harq_id)->cgt_deadline;
    u.metrics.reps_scheduled += plan.nominal_k;
    u.metrics.skipped_missed +=
        plan.nominal_k - static_cast<std::int64_t>(plan.emissions.size());
    schedule_plan(u, plan, pid, tb);

    if (cfg_.enhancements.shared_pool && cfg_.shared_pool) {
      int x = static_cast<int>(plan.emissions.size());
      if (x > 0 && x < plan.nominal_k) {
        auto pool = shared_pool_fallback(plan.nominal_k, x,
                                         cfg_.shared_pool->k_plus, rng_);
        std::int64_t base_slot = ps.pkt.arrival_symbol / kSymbolsPerSlot + 1;
        for (std::size_t j = 0; j < pool.occasion_choices.size(); ++j) {
          EmissionRec rec;
          rec.id = ++next_emission_;
          rec.ue_id = u.sc.ue_id;
          rec.packet_id = pid;
          rec.harq_id = plan.harq_id;
          rec.cg_index = choice->cg_index;
          rec.shared_pool = true;
          rec.rb_tag = pool.occasion_choices[j];
          rec.carrier = cfg_.shared_pool->carrier;
          Segment seg;
          seg.span.carrier_id = rec.carrier;
          seg.span.slot = base_slot + static_cast<std::int64_t>(j);
          seg.span.start_symbol = 0;
          seg.span.length = kSymbolsPerSlot;
          rec.segments = {seg};
          rec.rv = u.mac.cg(choice->cg_index).rv_pattern.rv_at(x + static_cast<int>(j));
          rec.start = seg.span.first_sym();
          rec.end = seg.span.end_sym();
          std::int64_t id = rec.id;
          emissions_.emplace(id, std::move(rec));
          tb.outstanding += 1;
          Event te;
          te.t = emissions_[id].start;
          te.kind = EvKind::TRANSMISSION;
          te.ue_id = u.sc.ue_id;
          te.a = id;
          push(std::move(te));
        }
      }
    }

    packets_.emplace(pid, std::move(ps));
    tbs_.emplace(pid, std::move(tb));
  }

  void handle_to_check(const Event& e) {
    UeRt& u = ue(e.ue_id);
    auto due = u.mac.nru_feedback_step(e.b, e.t);
    for (const auto& p : u.mac.processes()) {
      if (p.state == HarqProcess::State::DONE_FAILED &&
          !failed_traced_.count({u.sc.ue_id, p.packet_id})) {
        failed_traced_.insert({u.sc.ue_id, p.packet_id});
        trace({TraceEvent::Kind::FAILED, e.t, u.sc.ue_id,
               u.mac.cg(p.cg_index).cg_id, e.b, p.harq_id, -1, false});
      }
    }
    for (int harq : due) {
      auto* proc = u.mac.process(harq);
      auto tb = tbs_.find(proc->packet_id);
      if (tb == tbs_.end()) continue;
      auto choice = occasion_at_or_after(u, proc->cg_index, e.b);
      if (!choice) continue;
      TxPlan plan = u.mac.plan_retransmission(harq, *choice);
      u.metrics.reps_scheduled += static_cast<std::int64_t>(plan.emissions.size());
      schedule_plan(u, plan, proc->packet_id, tb->second);
    }
  }

  void cancel_emission(EmissionRec& rec, UeRt& owner, TraceEvent::Kind why) {
    rec.state = EmissionRec::State::CANCELLED;
    if (rec.shared_pool) {
      // shared emissions sit outside the dedicated conservation identity
    } else if (why == TraceEvent::Kind::LBT_BLOCKED) {
      owner.metrics.skipped_lbt += 1;
    } else {
      owner.metrics.skipped_cancelled += 1;
    }
    if (why == TraceEvent::Kind::LBT_BLOCKED) owner.metrics.lbt_blocks += 1;
    auto tb = tbs_.find(rec.packet_id);
    if (tb != tbs_.end()) {
      tb->second.outstanding -= 1;
      if (tb->second.outstanding == 0) round_complete(tb->second, rec.start);
    }
    trace({why, rec.start, rec.ue_id, rec.cg_id, rec.to_index, rec.harq_id,
           rec.rv, rec.has_uci});
  }

  void handle_transmission(const Event& e) {
    auto it = emissions_.find(e.a);
    if (it == emissions_.end()) return;
    EmissionRec& rec = it->second;
    UeRt& u = ue(rec.ue_id);
    if (rec.state == EmissionRec::State::CANCELLED) {
      emissions_.erase(it);
      return;
    }

    auto tb_it = tbs_.find(rec.packet_id);
    TbState* tb = tb_it == tbs_.end() ? nullptr : &tb_it->second;

    // no transmission at or past the configuredGrantTimer deadline
    if (tb && rec.start >= tb->cgt_deadline) {
      cancel_emission(rec, u, TraceEvent::Kind::CANCELLED);
      emissions_.erase(it);
      return;
    }
    // a served process stops transmitting
    if (cfg_.profile == Profile::NRU_R16) {
      auto* proc = u.mac.process(rec.harq_id);
      if (proc && proc->packet_id == rec.packet_id &&
          (proc->state == HarqProcess::State::DONE_ACK ||
           proc->state == HarqProcess::State::DONE_FAILED)) {
        cancel_emission(rec, u, TraceEvent::Kind::CANCELLED);
        emissions_.erase(it);
        return;
      }
    }

    // overlap among this UE's own grants on the carrier
    std::vector<std::int64_t> group{rec.id};
    for (std::int64_t other : u.live) {
      if (other == rec.id) continue;
      auto oit = emissions_.find(other);
      if (oit == emissions_.end()) continue;
      const EmissionRec& o = oit->second;
      if (o.state != EmissionRec::State::PENDING || o.carrier != rec.carrier)
        continue;
      if (o.start < rec.end && rec.start < o.end) group.push_back(other);
    }
    if (group.size() > 1) {
      std::vector<GrantRef> refs;
      for (std::int64_t id : group) {
        const EmissionRec& g = emissions_[id];
        refs.push_back(GrantRef{g.dynamic_grant, g.cg_id, g.priority, g.start,
                                g.retransmission && cfg_.profile == Profile::NRU_R16});
      }
      auto d = resolve_overlap(cfg_.profile, refs);
      for (std::size_t loser : d.cancelled) {
        EmissionRec& lose = emissions_[group[loser]];
        cancel_emission(lose, ue(lose.ue_id), TraceEvent::Kind::CANCELLED);
      }
      if (rec.state == EmissionRec::State::CANCELLED) {
        emissions_.erase(e.a);
        return;
      }
    }

    // listen-before-talk on unlicensed carriers
    const CarrierConfig* car = cfg_.carrier(rec.carrier);
    if (car && car->lbt) {
      bool blocked = false;
      int delay = 0;
      if (car->lbt->mode == LbtMode::LBE) {
        auto out = lbt_gate_lbe(*car->lbt, rec.segments.front().span.length, rng_);
        blocked = !out.proceed;
        delay = out.delay_symbols;
      } else {
        std::int64_t f = ffp_index(rec.start, car->lbt->ffp_slots);
        auto key = std::make_pair(rec.carrier, f);
        auto fit = ffp_pass_.find(key);
        if (fit == ffp_pass_.end())
          fit = ffp_pass_.emplace(key, !rng_.bernoulli(car->lbt->p_busy)).first;
        blocked = !fit->second;
      }
      if (blocked) {
        cancel_emission(rec, u, TraceEvent::Kind::LBT_BLOCKED);
        emissions_.erase(e.a);
        return;
      }
      if (delay > 0) {
        rec.segments.front().span.start_symbol += delay;
        rec.segments.front().span.length -= delay;
        rec.start += delay;
      }
    }

    rec.state = EmissionRec::State::SENT;
    u.live.erase(std::remove(u.live.begin(), u.live.end(), rec.id), u.live.end());

    auto pit = packets_.find(rec.packet_id);
    if (pit != packets_.end() && !pit->second.has_first_emission) {
      pit->second.has_first_emission = true;
      if (rec.start < pit->second.window_end) u.metrics.packets_with_emission += 1;
      u.metrics.sum_alignment_slots +=
          (static_cast<double>(rec.start) - pit->second.pkt.arrival_instant) /
          kSymbolsPerSlot;
    }

    if (cfg_.enhancements.common_nack)
      u.mac.record_emission_grid(rec.carrier, rec.end, rec.rb_tag, rec.packet_id);

    if (rec.dynamic_grant) {
      auto* proc = u.mac.process(rec.harq_id);
      if (proc) proc->state = HarqProcess::State::AWAITING_FEEDBACK;
    }

    trace({rec.retransmission ? TraceEvent::Kind::RETX : TraceEvent::Kind::TX,
           rec.start, rec.ue_id, rec.cg_id, rec.to_index, rec.harq_id, rec.rv,
           rec.has_uci});

    if (rec.shared_pool) {
      u.metrics.shared_emissions += 1;
      std::int64_t slot = rec.start / kSymbolsPerSlot;
      std::int64_t key = slot * cfg_.shared_pool->k_plus + rec.rb_tag;
      PoolCell& cell = cells_[key];
      cell.emission_ids.push_back(rec.id);
      if (!cell.rx_scheduled) {
        cell.rx_scheduled = true;
        Event re;
        re.t = (slot + 1) * kSymbolsPerSlot;
        re.kind = EvKind::RECEPTION;
        re.ue_id = -1;
        re.a = -1;
        re.b = key;
        push(std::move(re));
      }
    } else {
      u.metrics.reps_emitted += 1;
      Event re;
      re.t = rec.end;
      re.kind = EvKind::RECEPTION;
      re.ue_id = rec.ue_id;
      re.a = rec.id;
      push(std::move(re));
    }
  }

  int assumed_rv(const EmissionRec& rec, TbState& tb, UeRt& u) {
    if (rec.has_uci || rec.dynamic_grant || rec.shared_pool) return rec.rv;
    const CgConfig& c = u.mac.cg(rec.cg_index);
    if (!c.flexible_start) return rec.rv;  // period-anchored labels line up
    int idx = static_cast<int>(rec.to_index % u.mac.tos_per_period(rec.cg_index));
    if (cfg_.gnb.blind_rv_decoding) {
      if (!tb.rotation) tb.rotation = blind_rv_recovery(rec.rv, idx, c.rv_pattern);
      if (tb.rotation) return tb.rotation->label(idx);
    }
    return c.rv_pattern.rv_at(idx);
  }

  void deliver(TbState& tb, SymbolTime t) {
    tb.decoded = true;
    auto pit = packets_.find(tb.packet_id);
    UeRt& u = ue(tb.ue_id);
    PacketState& ps = pit->second;
    ps.pkt.delivered_symbol = t;
    u.metrics.delivered += 1;
    double latency_sym = static_cast<double>(t) - ps.pkt.arrival_instant;
    if (latency_sym <= static_cast<double>(ps.pkt.deadline_symbols))
      u.metrics.delivered_within_deadline += 1;
    u.metrics.latencies_us.push_back(static_cast<float>(
        latency_sym * cfg_.numerology.symbol_duration_us()));
    if (tb.after_common_nack) u.metrics.common_nack_recoveries += 1;
    trace({TraceEvent::Kind::DELIVERED, t, tb.ue_id, -1, -1, tb.harq_id, -1, false});
  }

  void process_rx(EmissionRec& rec, SymbolTime now, bool destroyed) {
    UeRt& u = ue(rec.ue_id);
    auto tb_it = tbs_.find(rec.packet_id);
    if (tb_it == tbs_.end()) return;
    TbState& tb = tb_it->second;

    std::vector<ProcessOutcome> outcomes;
    if (!destroyed) {
      Detection det = detect(u.sc.link, rng_);
      if (det == Detection::IDENTIFIED) {
        tb.any_identified = true;
        if (assumed_rv(rec, tb, u) == rec.rv) {
          for (const auto& seg : rec.segments)
            tb.accum.push_back(
                ReceivedSegment{seg.span.length, rec.rb_count, rec.rv});
        }
        if (!tb.decoded) {
          double err = bler(u.sc.bler, u.sc.link.snr_gamma, tb.accum);
          if (tb.decode_u >= err) deliver(tb, now);
        }
        if (cfg_.profile == Profile::NRU_R16)
          outcomes.push_back(ProcessOutcome{rec.ue_id, rec.harq_id, det,
                                            tb.decoded, now, rec.carrier,
                                            rec.rb_tag});
      } else if (det == Detection::UNKNOWN_DETECTION) {
        outcomes.push_back(ProcessOutcome{rec.ue_id, rec.harq_id, det, false,
                                          now, rec.carrier, rec.rb_tag});
      }
      // misdetections feed nothing back: the true sender hears silence and
      // the wrongly identified UE ignores a process it never sent
    }
    for (auto& msg : emit_feedback(cfg_.profile, outcomes, policy(), now)) {
      Event fe;
      fe.t = msg.delivery_time;
      fe.kind = EvKind::FEEDBACK;
      fe.ue_id = msg.kind == FeedbackMsg::Kind::COMMON_NACK ? -1 : msg.ue_id;
      fe.fb = std::move(msg);
      push(std::move(fe));
    }

    tb.outstanding -= 1;
    if (tb.outstanding == 0) round_complete(tb, now);
  }

  FeedbackPolicy policy() const {
    FeedbackPolicy p = cfg_.gnb.feedback;
    p.common_nack = cfg_.enhancements.common_nack;
    return p;
  }

  void round_complete(TbState& tb, SymbolTime now) {
    if (tb.decoded) {
      retire(tb);
      return;
    }
    if (cfg_.profile == Profile::NRU_R16) return;  // timers drive NR-U retx
    if (tb.any_identified && now < tb.cgt_deadline) {
      ProcessOutcome o{tb.ue_id, tb.harq_id, Detection::IDENTIFIED, false, now,
                       0, 0};
      for (auto& msg : emit_feedback(cfg_.profile, std::span(&o, 1), policy(), now)) {
        if (msg.kind != FeedbackMsg::Kind::RETX_DCI) continue;
        Event fe;
        fe.t = msg.delivery_time;
        fe.kind = EvKind::FEEDBACK;
        fe.ue_id = msg.ue_id;
        fe.fb = std::move(msg);
        push(std::move(fe));
      }
      return;  // chain continues
    }
    if (!cfg_.enhancements.common_nack) retire(tb);
  }

  void retire(TbState& tb) {
    if (tb.decoded) {
      packets_.erase(tb.packet_id);
      tbs_.erase(tb.packet_id);
    }
    // undecoded TBs stay until the end: late common-NACK broadcasts and
    // NR-U timers may still reference them
  }

  void handle_reception(const Event& e) {
    if (e.a >= 1) {
      // dedicated reception (emission ids start at 1; a = -1 marks pool cells)
      auto it = emissions_.find(e.a);
      if (it == emissions_.end()) return;
      process_rx(it->second, e.t, false);
      emissions_.erase(it);
      return;
    }
    auto cit = cells_.find(e.b);
    if (cit == cells_.end()) return;
    PoolCell cell = std::move(cit->second);
    cells_.erase(cit);

    std::size_t occupancy = cell.emission_ids.size();
    if (cfg_.shared_pool) {
      double per_cell = cfg_.shared_pool->activity_q / cfg_.shared_pool->k_plus;
      for (int i = 0; i < cfg_.shared_pool->n_background_ues; ++i)
        if (rng_.bernoulli(per_cell)) occupancy += 1;
    }
    bool destroyed = resolve_collisions(occupancy, true).empty();
    for (std::int64_t id : cell.emission_ids) {
      auto it = emissions_.find(id);
      if (it == emissions_.end()) continue;
      if (destroyed) ue(it->second.ue_id).metrics.collisions += 1;
      process_rx(it->second, e.t, destroyed);
      emissions_.erase(it);
    }
  }

  void handle_feedback(const Event& e) {
    const FeedbackMsg& fb = e.fb;
    switch (fb.kind) {
      case FeedbackMsg::Kind::RETX_DCI: {
        UeRt& u = ue(fb.ue_id);
        u.mac.nr_feedback_step(e.t);
        auto* proc = u.mac.process(fb.dci.harq_field);
        if (!proc) return;
        auto tb_it = tbs_.find(proc->packet_id);
        if (tb_it == tbs_.end() || tb_it->second.decoded) return;
        TbState& tb = tb_it->second;
        if (e.t >= tb.cgt_deadline) return;
        if (!u.mac.on_retx_dci(fb.dci)) return;
        proc->attempts += 1;

        EmissionRec rec;
        rec.id = ++next_emission_;
        rec.ue_id = u.sc.ue_id;
        rec.packet_id = tb.packet_id;
        rec.harq_id = tb.harq_id;
        rec.cg_index = tb.cg_index;
        rec.cg_id = u.mac.cg(tb.cg_index).cg_id;
        rec.dynamic_grant = true;
        rec.retransmission = true;
        rec.rv = 0;  // gNB schedules the retransmission self-decodable
        rec.carrier = u.mac.cg(tb.cg_index).carrier_id;
        rec.rb_tag = rec.cg_id;
        rec.rb_count = std::max<std::size_t>(
            1, u.mac.cg(tb.cg_index).fdra.resolve(cfg_.bandwidth_rbs).size());
        Segment seg;
        seg.span.carrier_id = rec.carrier;
        seg.span.slot = e.t / kSymbolsPerSlot + 1;
        seg.span.start_symbol = 0;
        seg.span.length = kSymbolsPerSlot;
        rec.segments = {seg};
        rec.start = seg.span.first_sym();
        rec.end = seg.span.end_sym();
        std::int64_t id = rec.id;
        emissions_.emplace(id, std::move(rec));
        u.live.push_back(id);
        u.metrics.reps_scheduled += 1;
        tb.outstanding += 1;
        Event te;
        te.t = emissions_[id].start;
        te.kind = EvKind::TRANSMISSION;
        te.ue_id = u.sc.ue_id;
        te.a = id;
        push(std::move(te));
        return;
      }
      case FeedbackMsg::Kind::CG_DFI: {
        UeRt& u = ue(fb.ue_id);
        for (const auto& [harq, ack] : fb.dfi_bits) {
          auto* proc = u.mac.process(harq);
          if (!proc) continue;
          std::int64_t now_to = to_index_at(u.mac.cg(proc->cg_index), e.t);
          std::pair<int, bool> bit{harq, ack};
          u.mac.on_cg_dfi(std::span(&bit, 1), now_to);
          if (ack) {
            trace({TraceEvent::Kind::ACKED, e.t, u.sc.ue_id,
                   u.mac.cg(proc->cg_index).cg_id, -1, harq, -1, false});
          } else if (proc->state == HarqProcess::State::AWAITING_FEEDBACK) {
            schedule_to_check(u, proc->cg_index, proc->retx_deadline_to);
          }
        }
        return;
      }
      case FeedbackMsg::Kind::COMMON_NACK: {
        for (auto& u : ues_) {
          bool decoded_broadcast = rng_.bernoulli(u.sc.link.p_common_nack_decode);
          if (!decoded_broadcast) continue;
          auto pid = u.mac.handle_common_nack(fb.grid_carrier, fb.grid_end,
                                              fb.grid_rb_tag);
          if (!pid) continue;
          auto tb_it = tbs_.find(*pid);
          if (tb_it == tbs_.end() || tb_it->second.decoded) continue;
          TbState& tb = tb_it->second;
          if (tb.outstanding > 0) continue;  // still transmitting
          if (e.t >= tb.cgt_deadline) continue;
          auto choice = u.mac.select_grant(static_cast<double>(e.t));
          if (!choice) continue;
          TxPlan plan = u.mac.plan_retransmission(tb.harq_id, *choice);
          tb.after_common_nack = true;
          u.metrics.reps_scheduled +=
              static_cast<std::int64_t>(plan.emissions.size());
          schedule_plan(u, plan, tb.packet_id, tb);
        }
        return;
      }
    }
  }

  void finalize() {
    // emissions cut off by the simulation horizon count as missed
    while (!q_.empty()) {
      Event e = q_.top();
      q_.pop();
      if (e.kind != EvKind::TRANSMISSION) continue;
      auto it = emissions_.find(e.a);
      if (it == emissions_.end()) continue;
      if (it->second.state == EmissionRec::State::PENDING &&
          !it->second.shared_pool)
        ue(it->second.ue_id).metrics.skipped_missed += 1;
      emissions_.erase(it);
    }
  }

  const ScenarioConfig& cfg_;
  Rng rng_;
  std::vector<TraceEvent>* trace_;
  SymbolTime horizon_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventAfter> q_;
  std::int64_t seq_ = 0;
  std::vector<UeRt> ues_;
  std::map<std::int64_t, EmissionRec> emissions_;
  std::map<std::int64_t, TbState> tbs_;
  std::map<std::int64_t, PacketState> packets_;
  std::map<std::int64_t, PoolCell> cells_;
  std::map<std::pair<int, std::int64_t>, bool> ffp_pass_;
  std::set<std::pair<int, std::int64_t>> failed_traced_;
  std::int64_t next_emission_ = 0;
  std::int64_t next_packet_ = 0;
};

}  // namespace

ReplicationResult run_single(const ScenarioConfig& cfg, std::uint64_t seed,
                             std::uint64_t stream,
                             std::vector<TraceEvent>* trace) {
  validate_or_throw(cfg);
  Engine eng(cfg, seed, stream, trace);
  return eng.run();
}

MetricsReport run_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  MetricsReport report;
  report.scenario = cfg;
  report.replications.push_back(run_single(cfg, seed, 0));
  return report;
}

MetricsReport run_replications(const ScenarioConfig& cfg, int replications) {
  if (replications < 1) throw ConfigError("replications must be >= 1");
  MetricsReport report;
  report.scenario = cfg;
  for (int r = 0; r < replications; ++r)
    report.replications.push_back(run_single(cfg, cfg.seed, static_cast<std::uint64_t>(r)));
  return report;
}

std::optional<double> percentile(std::span<const float> sorted, double q) {
  const auto n = static_cast<double>(sorted.size());
  if (sorted.size() < 2 || n * (1.0 - q / 100.0) < 1.0) return std::nullopt;
  auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * n));
  rank = std::min(std::max<std::size_t>(rank, 1), sorted.size());
  return sorted[rank - 1];
}

namespace {

struct Welford {
  double sum = 0, sumsq = 0;
  int n = 0;
  void add(double v) { sum += v; sumsq += v * v; ++n; }
  double mean() const { return n ? sum / n : 0.0; }
  double se() const {
    if (n < 2) return 0.0;
    double var = (sumsq - sum * sum / n) / (n - 1);
    return std::sqrt(std::max(0.0, var) / n);
  }
};

}  // namespace

std::vector<MetricsReport::Aggregate> MetricsReport::aggregates() const {
  std::vector<Aggregate> out;
  if (replications.empty()) return out;
  for (std::size_t ui = 0; ui < replications.front().ues.size(); ++ui) {
    Aggregate a;
    a.ue_id = replications.front().ues[ui].ue_id;
    Welford rel, alo, ali;
    for (const auto& rep : replications) {
      const UeMetrics& m = rep.ues[ui];
      a.offered += m.offered;
      a.delivered += m.delivered;
      a.delivered_within_deadline += m.delivered_within_deadline;
      a.reps_scheduled += m.reps_scheduled;
      a.reps_emitted += m.reps_emitted;
      a.skipped_missed += m.skipped_missed;
      a.skipped_lbt += m.skipped_lbt;
      a.skipped_cancelled += m.skipped_cancelled;
      a.shared_emissions += m.shared_emissions;
      a.collisions += m.collisions;
      a.lbt_blocks += m.lbt_blocks;
      a.common_nack_recoveries += m.common_nack_recoveries;
      if (auto r = m.reliability()) rel.add(*r);
      if (auto f = m.at_least_one_fraction()) alo.add(*f);
      if (auto d = m.mean_alignment_slots()) ali.add(*d);
      a.pooled_latencies_us.insert(a.pooled_latencies_us.end(),
                                   m.latencies_us.begin(), m.latencies_us.end());
    }
    a.reliability_defined = rel.n > 0;
    a.reliability_mean = rel.mean();
    a.reliability_se = rel.se();
    a.reliability_undersampled = a.offered < 10000000;
    a.at_least_one_mean = alo.mean();
    a.at_least_one_se = alo.se();
    a.alignment_defined = ali.n > 0;
    a.alignment_mean = ali.mean();
    a.alignment_se = ali.se();
    std::sort(a.pooled_latencies_us.begin(), a.pooled_latencies_us.end());
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace cgsim
