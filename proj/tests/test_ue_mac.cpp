#include <cmath>
#include <map>

#include "cgsim/ue_mac.hpp"
#include "doctest.h"

using namespace cgsim;

namespace {

std::map<int, TddPattern> all_ul_map() { return {{0, TddPattern::all_uplink()}}; }

CgConfig full_slot_cg(int cg_id, int period, int k, int offset = 0) {
  CgConfig c;
  c.cg_id = cg_id;
  c.period_slots = period;
  c.k_repetitions = k;
  c.offset_slots = offset;
  return c;
}

}  // namespace

TEST_CASE("traffic models") {
  Rng rng(1, 0);
  TrafficModel det;
  det.kind = TrafficModel::Kind::DETERMINISTIC;
  det.period_slots = 4;
  det.phase_slots = 1;
  CHECK(traffic_epoch_slots(det) == 4);
  CHECK(traffic_arrival_instant(det, 0, rng) == doctest::Approx(14.0));
  CHECK(traffic_arrival_instant(det, 3, rng) == doctest::Approx(3 * 56 + 14.0));

  TrafficModel uni;
  uni.kind = TrafficModel::Kind::UNIFORM_IN_PERIOD;
  uni.n_slots = 16;
  CHECK(traffic_epoch_slots(uni) == 16);
  std::vector<int> slot_hits(16, 0);
  for (int i = 0; i < 32000; ++i) {
    double t = traffic_arrival_instant(uni, 0, rng);
    auto slot = static_cast<int>(t / kSymbolsPerSlot);
    CHECK(t == doctest::Approx(slot * 14.0));  // arrivals land on slot starts
    slot_hits[slot] += 1;
  }
  for (int s = 0; s < 16; ++s) CHECK(slot_hits[s] > 1600);  // roughly uniform

  TrafficModel jit;
  jit.kind = TrafficModel::Kind::JITTERED;
  jit.period_slots = 4;
  jit.jitter_slots = 4.0;
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    double t = traffic_arrival_instant(jit, 2, rng);
    CHECK(t >= 2 * 56.0);
    CHECK(t < 3 * 56.0);
    sum += t - 2 * 56.0;
  }
  CHECK(sum / 20000 == doctest::Approx(28.0).epsilon(0.02));
}

TEST_CASE("lbt gate LBE") {
  Rng rng(2, 0);
  LbtParams free_air{LbtMode::LBE, 0.0, 4, 10};
  for (int i = 0; i < 50; ++i) {
    auto out = lbt_gate_lbe(free_air, 14, rng);
    CHECK(out.proceed);
    CHECK(out.delay_symbols == 0);
  }
  LbtParams jammed{LbtMode::LBE, 1.0, 4, 10};
  for (int i = 0; i < 50; ++i) CHECK_FALSE(lbt_gate_lbe(jammed, 14, rng).proceed);

  // short TO: any backoff eats the whole occasion
  LbtParams busy{LbtMode::LBE, 0.5, 4, 10};
  for (int i = 0; i < 200; ++i) {
    auto out = lbt_gate_lbe(busy, 1, rng);
    if (!out.proceed) continue;
    CHECK(out.delay_symbols == 0);  // only the idle-first-draw path can pass
  }
  CHECK(ffp_index(0, 10) == 0);
  CHECK(ffp_index(139, 10) == 0);
  CHECK(ffp_index(140, 10) == 1);
}

TEST_CASE("overlap resolution") {
  SUBCASE("single grant wins by default") {
    GrantRef g{false, 0, PhyPriority::LOW, 0, false};
    auto d = resolve_overlap(Profile::NR_R16, std::span(&g, 1));
    CHECK(d.winner == 0);
    CHECK(d.cancelled.empty());
  }
  SUBCASE("R15: dynamic beats CG even with an empty buffer") {
    std::vector<GrantRef> g{{false, 0, PhyPriority::HIGH, 0, false},
                            {true, -1, PhyPriority::LOW, 5, false}};
    auto d = resolve_overlap(Profile::NR_R15, g);
    CHECK(d.winner == 1);
  }
  SUBCASE("R16: PHY priority decides between CGs") {
    std::vector<GrantRef> g{{false, 0, PhyPriority::LOW, 0, false},
                            {false, 1, PhyPriority::HIGH, 3, false}};
    auto d = resolve_overlap(Profile::NR_R16, g);
    CHECK(d.winner == 1);
    CHECK(d.cancelled == std::vector<std::size_t>{0});
  }
  SUBCASE("R16 equal priorities: one TB on the dynamic grant") {
    std::vector<GrantRef> g{{false, 0, PhyPriority::LOW, 0, false},
                            {true, -1, PhyPriority::LOW, 3, false}};
    CHECK(resolve_overlap(Profile::NR_R16, g).winner == 1);
  }
  SUBCASE("R16 equal priorities without dynamic: earliest CG") {
    std::vector<GrantRef> g{{false, 3, PhyPriority::LOW, 7, false},
                            {false, 1, PhyPriority::LOW, 2, false}};
    CHECK(resolve_overlap(Profile::NR_R16, g).winner == 1);
  }
  SUBCASE("NR-U autonomous retransmissions are never cancelled") {
    std::vector<GrantRef> g{{false, 0, PhyPriority::HIGH, 0, false},
                            {false, 1, PhyPriority::LOW, 0, true}};
    CHECK(resolve_overlap(Profile::NRU_R16, g).winner == 1);
  }
}

TEST_CASE("shared pool fallback plan") {
  Rng rng(3, 0);
  auto full = shared_pool_fallback(4, 4, 4, rng);
  CHECK_FALSE(full.postponed);
  CHECK(full.occasion_choices.empty());

  auto partial = shared_pool_fallback(4, 1, 4, rng);
  CHECK_FALSE(partial.postponed);
  REQUIRE(partial.occasion_choices.size() == 3);
  for (int c : partial.occasion_choices) {
    CHECK(c >= 0);
    CHECK(c < 4);
  }

  auto missed = shared_pool_fallback(4, 0, 4, rng);
  CHECK(missed.postponed);
  CHECK(missed.occasion_choices.empty());
}

TEST_CASE("select_grant picks the nearest configuration") {
  // four CGs, p = 4, K = 1, offsets 0..3
  std::vector<CgConfig> cgs;
  for (int j = 0; j < 4; ++j) cgs.push_back(full_slot_cg(j, 4, 1, j));
  UeMac mac(0, Profile::NR_R16, cgs, all_ul_map(), UeMacParams{});

  SUBCASE("arrival just before c1's slot selects c1") {
    auto c = mac.select_grant(13.5);
    REQUIRE(c);
    CHECK(mac.cg(c->cg_index).cg_id == 1);
    CHECK(c->start_sym == 14);
  }
  SUBCASE("arrival exactly at occasion 0 uses it") {
    auto c = mac.select_grant(0.0);
    REQUIRE(c);
    CHECK(mac.cg(c->cg_index).cg_id == 0);
    CHECK(c->start_sym == 0);
  }
  SUBCASE("ties break toward the lower cg_id") {
    std::vector<CgConfig> pair{full_slot_cg(2, 4, 1, 1), full_slot_cg(5, 4, 1, 1)};
    UeMac m2(0, Profile::NR_R16, pair, all_ul_map(), UeMacParams{});
    auto c = m2.select_grant(0.0);
    REQUIRE(c);
    CHECK(m2.cg(c->cg_index).cg_id == 2);
  }
}

TEST_CASE("select_grant waits for the next period when the start rule blocks") {
  // p = 4, K = 2 at slots {0,1}, legacy first-TO start
  UeMac mac(0, Profile::NR_R16, {full_slot_cg(0, 4, 2)}, all_ul_map(),
            UeMacParams{});
  auto c = mac.select_grant(2 * 14.0);  // arrival in slot 2
  REQUIRE(c);
  CHECK(c->period_index == 1);
  CHECK(c->occasion_index == 0);
  CHECK(c->start_sym == 4 * 14);
}

TEST_CASE("select_grant with no active cg") {
  std::vector<CgConfig> cgs{full_slot_cg(0, 4, 1)};
  cgs[0].cg_type = CgType::TYPE2;  // needs an activation DCI, none applied
  UeMac mac(0, Profile::NR_R16, cgs, all_ul_map(), UeMacParams{});
  CHECK_FALSE(mac.select_grant(0.0));
}

TEST_CASE("transmit_repetitions emits the pattern") {
  CgConfig cg = full_slot_cg(0, 8, 4);
  cg.rv_pattern = RvPattern::rv0231();

  SUBCASE("start at the first occasion") {
    UeMac mac(0, Profile::NR_R16, {cg}, all_ul_map(), UeMacParams{});
    Packet pkt;
    auto plan = mac.transmit_repetitions(pkt, GrantChoice{0, 0, 0, 0});
    REQUIRE(plan.emissions.size() == 4);
    CHECK(plan.emissions[0].rv == 0);
    CHECK(plan.emissions[1].rv == 2);
    CHECK(plan.emissions[2].rv == 3);
    CHECK(plan.emissions[3].rv == 1);
    for (const auto& e : plan.emissions) {
      CHECK(e.harq_id == plan.harq_id);
      CHECK_FALSE(e.uci.has_value());  // no CG-UCI under NR profiles
    }
  }
  SUBCASE("flexible start re-anchors to RV0") {
    cg.flexible_start = true;
    UeMac mac(0, Profile::NR_R16, {cg}, all_ul_map(), UeMacParams{});
    Packet pkt;
    auto plan = mac.transmit_repetitions(pkt, GrantChoice{0, 0, 2, 2 * 14});
    REQUIRE(plan.emissions.size() == 2);
    CHECK(plan.emissions[0].rv == 0);
    CHECK(plan.emissions[1].rv == 2);
    CHECK(plan.occasions_available == 2);
  }
  SUBCASE("legacy nearest-RV0 start keeps period anchoring") {
    cg.rv_pattern = RvPattern::rv0303();
    cg.starting_from_rv0 = true;
    UeMac mac(0, Profile::NR_R16, {cg}, all_ul_map(), UeMacParams{});
    // arrival during occasion 1: nearest permitted start is occasion 2
    auto c = mac.select_grant(1 * 14.0 + 1);
    REQUIRE(c);
    CHECK(c->occasion_index == 2);
    Packet pkt;
    auto plan = mac.transmit_repetitions(pkt, *c);
    REQUIRE(plan.emissions.size() == 2);
    CHECK(plan.emissions[0].rv == 0);
    CHECK(plan.emissions[1].rv == 3);
  }
}

TEST_CASE("CG-UCI attaches to every NR-U emission") {
  CgConfig cg = full_slot_cg(0, 4, 2);
  cg.nru_tos_per_slot = 1;
  cg.nru_slots = 4;
  cg.cg_retx_timer_tos = 2;
  UeMacParams params;
  params.attach_cg_uci = true;
  UeMac mac(0, Profile::NRU_R16, {cg}, all_ul_map(), params);
  Packet pkt;
  auto plan = mac.transmit_repetitions(pkt, GrantChoice{0, 0, 0, 0});
  REQUIRE(plan.emissions.size() == 2);
  for (const auto& e : plan.emissions) {
    REQUIRE(e.uci.has_value());
    CHECK(e.uci->harq_id == plan.harq_id);
    CHECK(e.uci->rv == e.rv);
  }
}

TEST_CASE("NR harq ids follow the period rule, NR-U picks free processes") {
  CgConfig cg = full_slot_cg(0, 4, 1);
  UeMacParams params;
  params.harq_pool_size = 4;
  UeMac mac(0, Profile::NR_R16, {cg}, all_ul_map(), params);
  Packet pkt;
  for (std::int64_t period = 0; period < 6; ++period) {
    auto plan = mac.transmit_repetitions(
        pkt, GrantChoice{0, period, 0, period * 4 * 14});
    CHECK(plan.harq_id == static_cast<int>(period % 4));
  }

  CgConfig nru = full_slot_cg(0, 4, 1);
  nru.nru_slots = 4;
  nru.cg_retx_timer_tos = 8;
  UeMac mac2(0, Profile::NRU_R16, {nru}, all_ul_map(), params);
  auto p0 = mac2.transmit_repetitions(pkt, GrantChoice{0, 0, 0, 0});
  auto p1 = mac2.transmit_repetitions(pkt, GrantChoice{0, 0, 1, 14});
  CHECK(p0.harq_id == 0);
  CHECK(p1.harq_id == 1);  // process 0 is busy awaiting feedback
}

TEST_CASE("NR-U autonomous retransmission timers") {
  // 1 TO per slot, retx timer 1 TO, CGT 3 slots: initial tx, two autonomous
  // retransmissions, then DONE_FAILED at the timer walk hitting the deadline
  CgConfig cg = full_slot_cg(0, 1, 1);
  cg.cg_retx_timer_tos = 1;
  cg.cg_timer_slots = 3;
  UeMac mac(0, Profile::NRU_R16, {cg}, all_ul_map(), UeMacParams{});
  Packet pkt;
  pkt.id = 77;
  auto plan = mac.transmit_repetitions(pkt, GrantChoice{0, 0, 0, 0});
  auto* proc = mac.process(plan.harq_id);
  REQUIRE(proc);
  CHECK(proc->retx_deadline_to == 1);
  CHECK(proc->cgt_deadline == 3 * 14);

  auto due1 = mac.nru_feedback_step(1, 14);
  CHECK(due1 == std::vector<int>{plan.harq_id});
  auto r1 = mac.plan_retransmission(plan.harq_id, GrantChoice{0, 1, 0, 14});
  CHECK(r1.emissions.size() == 1);
  CHECK(proc->attempts == 2);
  CHECK(proc->retx_deadline_to == 2);

  auto due2 = mac.nru_feedback_step(2, 28);
  CHECK(due2 == std::vector<int>{plan.harq_id});
  mac.plan_retransmission(plan.harq_id, GrantChoice{0, 2, 0, 28});
  CHECK(proc->attempts == 3);

  auto due3 = mac.nru_feedback_step(3, 42);
  CHECK(due3.empty());
  CHECK(proc->state == HarqProcess::State::DONE_FAILED);
}

TEST_CASE("CG-DFI reactions") {
  CgConfig cg = full_slot_cg(0, 1, 1);
  cg.cg_retx_timer_tos = 4;
  cg.cg_timer_slots = 100;
  UeMac mac(0, Profile::NRU_R16, {cg}, all_ul_map(), UeMacParams{});
  Packet pkt;
  auto plan = mac.transmit_repetitions(pkt, GrantChoice{0, 0, 0, 0});
  auto* proc = mac.process(plan.harq_id);

  SUBCASE("ACK settles the process and suppresses retransmission") {
    std::pair<int, bool> ack{plan.harq_id, true};
    mac.on_cg_dfi(std::span(&ack, 1), 2);
    CHECK(proc->state == HarqProcess::State::DONE_ACK);
    CHECK(mac.nru_feedback_step(10, 140).empty());
  }
  SUBCASE("NACK makes the process immediately eligible") {
    std::pair<int, bool> nack{plan.harq_id, false};
    mac.on_cg_dfi(std::span(&nack, 1), 2);
    CHECK(proc->retx_deadline_to == 2);
    CHECK(mac.nru_feedback_step(2, 28) == std::vector<int>{plan.harq_id});
  }
}

TEST_CASE("NR implicit ACK and retransmission grants") {
  CgConfig cg = full_slot_cg(0, 4, 1);
  cg.cg_timer_slots = 8;
  UeMac mac(0, Profile::NR_R16, {cg}, all_ul_map(), UeMacParams{});
  Packet pkt;
  auto plan = mac.transmit_repetitions(pkt, GrantChoice{0, 0, 0, 0});
  auto* proc = mac.process(plan.harq_id);

  SUBCASE("CGT expiry without a grant is an implicit ACK") {
    mac.nr_feedback_step(8 * 14);
    CHECK(proc->state == HarqProcess::State::DONE_ACK);
  }
  SUBCASE("retransmission DCI with ndi=1 is accepted") {
    DciMessage dci;
    dci.purpose = DciPurpose::RETX_GRANT;
    dci.ndi = 1;
    dci.harq_field = plan.harq_id;
    CHECK(mac.on_retx_dci(dci));
    CHECK(proc->state == HarqProcess::State::RETRANSMITTING);
  }
  SUBCASE("ndi=0 is not a retransmission grant") {
    DciMessage dci;
    dci.purpose = DciPurpose::RETX_GRANT;
    dci.ndi = 0;
    dci.harq_field = plan.harq_id;
    CHECK_FALSE(mac.on_retx_dci(dci));
    CHECK(proc->state == HarqProcess::State::AWAITING_FEEDBACK);
  }
}

TEST_CASE("common NACK grid matching") {
  UeMac mac(0, Profile::NR_R16, {full_slot_cg(0, 4, 1)}, all_ul_map(),
            UeMacParams{});
  mac.record_emission_grid(0, 140, 0, 42);
  CHECK(mac.handle_common_nack(0, 140, 0) == 42);
  CHECK_FALSE(mac.handle_common_nack(0, 141, 0));
  CHECK_FALSE(mac.handle_common_nack(1, 140, 0));
  CHECK_FALSE(mac.handle_common_nack(0, 140, 3));
}

TEST_CASE("mean emitted repetitions over uniform occasion arrivals") {
  // flexible: (K+1)/2; legacy with spacing a: mean of max(0, K-ceil((b-1)/a)a)
  const int K = 4;
  Rng rng(17, 0);
  const int n = 20000;

  double flex_sum = 0, legacy_sum = 0;
  std::map<int, TddPattern> tdd = all_ul_map();
  for (int i = 0; i < n; ++i) {
    int b = 1 + static_cast<int>(rng.next_below(K));
    {
      CgConfig cg = full_slot_cg(0, K, K);
      cg.flexible_start = true;
      UeMac mac(0, Profile::NR_R16, {cg}, tdd, UeMacParams{});
      Packet pkt;
      auto plan = mac.transmit_repetitions(
          pkt, GrantChoice{0, 0, b - 1, (b - 1) * 14});
      flex_sum += static_cast<double>(plan.emissions.size());
    }
    {
      CgConfig cg = full_slot_cg(0, K, K);
      cg.rv_pattern = RvPattern::rv0303();
      cg.starting_from_rv0 = true;
      UeMac mac(0, Profile::NR_R16, {cg}, tdd, UeMacParams{});
      int start = legacy_start_occasion(cg.rv_pattern, b);
      if (start < K) {
        Packet pkt;
        auto plan =
            mac.transmit_repetitions(pkt, GrantChoice{0, 0, start, start * 14});
        legacy_sum += static_cast<double>(plan.emissions.size());
      }
    }
  }
  double expected_legacy = 0;
  for (int b = 1; b <= K; ++b)
    expected_legacy += occasions_available_legacy(K, 2, b);
  expected_legacy /= K;

  CHECK(flex_sum / n == doctest::Approx((K + 1) / 2.0).epsilon(0.03));
  CHECK(legacy_sum / n == doctest::Approx(expected_legacy).epsilon(0.03));
}

TEST_CASE("occasion layout cache tracks the TDD cycle") {
  std::vector<std::string> tdd = {"UUUUUUUUUUUUUU", "DDDDDDDDDDDDDD"};
  std::map<int, TddPattern> m{{0, TddPattern::from_strings(tdd)}};
  UeMac mac(0, Profile::NR_R16, {full_slot_cg(0, 1, 1)}, m, UeMacParams{});
  CHECK(mac.occasions_in_period(0, 0).size() == 1);
  CHECK(mac.occasions_in_period(0, 1).empty());  // DL slot
  CHECK(mac.occasions_in_period(0, 2).size() == 1);
  CHECK(mac.occasions_in_period(0, 4).front().segments[0].span.slot == 4);
  CHECK(mac.to_index(0, 3, 0) == 3);
}
