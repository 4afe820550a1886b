#include <set>

#include "cgsim/cg_core.hpp"
#include "cgsim/errors.hpp"
#include "doctest.h"

using namespace cgsim;

TEST_CASE("rv patterns") {
  auto p = RvPattern::parse("0231");
  REQUIRE(p);
  CHECK(p->rv0_spacing() == 4);
  CHECK(p->rv_at(0) == 0);
  CHECK(p->rv_at(1) == 2);
  CHECK(p->rv_at(2) == 3);
  CHECK(p->rv_at(3) == 1);
  CHECK(p->rv_at(4) == 0);  // cycles mod 4
  CHECK(RvPattern::rv0000().rv0_spacing() == 1);
  CHECK(RvPattern::rv0303().rv0_spacing() == 2);
  CHECK(RvPattern::self_decodable(0));
  CHECK(RvPattern::self_decodable(3));
  CHECK_FALSE(RvPattern::self_decodable(1));
  CHECK_FALSE(RvPattern::self_decodable(2));
  CHECK_FALSE(RvPattern::parse("0123"));
}

TEST_CASE("activation DCI validation") {
  DciMessage dci;
  dci.purpose = DciPurpose::ACTIVATE;

  SUBCASE("all-zero fields on CS-RNTI activate the single CG") {
    auto r = validate_activation(dci, Profile::NR_R15, false);
    CHECK(r.valid);
    CHECK(r.target_cg == 0);
  }
  SUBCASE("C-RNTI scrambling is not a CG activation") {
    dci.scrambling = Scrambling::C_RNTI;
    CHECK_FALSE(validate_activation(dci, Profile::NR_R15, false).valid);
  }
  SUBCASE("nonzero validation fields invalidate") {
    dci.ndi = 1;
    CHECK_FALSE(validate_activation(dci, Profile::NR_R16, false).valid);
    dci.ndi = 0;
    dci.rv_field = 2;
    CHECK_FALSE(validate_activation(dci, Profile::NR_R16, false).valid);
    dci.rv_field = 0;
    dci.dfi_field = 1;
    CHECK_FALSE(validate_activation(dci, Profile::NR_R16, false).valid);
  }
  SUBCASE("multi-CG reads the HARQ field as the target CG id") {
    dci.harq_field = 3;
    CHECK_FALSE(validate_activation(dci, Profile::NR_R16, false).valid);
    auto r = validate_activation(dci, Profile::NR_R16, true);
    CHECK(r.valid);
    CHECK(r.target_cg == 3);
  }
  SUBCASE("format 0-2 needs Release 16") {
    dci.format = DciFormat::F0_2;
    CHECK_FALSE(validate_activation(dci, Profile::NR_R15, false).valid);
    CHECK_FALSE(validate_activation(dci, Profile::NRU_R16, false).valid);
    CHECK(validate_activation(dci, Profile::NR_R16, false).valid);
  }
}

TEST_CASE("release DCI validation") {
  DciMessage dci;
  dci.purpose = DciPurpose::RELEASE;
  CHECK(validate_release(dci, Profile::NR_R16, {1, 2, 3}).valid);
  CHECK(validate_release(dci, Profile::NR_R15, {0}).valid);
  CHECK(validate_release(dci, Profile::NRU_R16, {0}).valid);
  auto r15 = validate_release(dci, Profile::NR_R15, {1, 2});
  CHECK_FALSE(r15.valid);
  CHECK(r15.violated_row == "group_release");
  auto nru = validate_release(dci, Profile::NRU_R16, {1, 2});
  CHECK_FALSE(nru.valid);
  CHECK(nru.violated_row == "group_release");
}

TEST_CASE("enumerate_occasions type A over a window") {
  CgConfig cfg;
  cfg.period_slots = 4;
  cfg.k_repetitions = 2;
  auto occ = enumerate_occasions(cfg, Profile::NR_R16, TddPattern::all_uplink(), 0, 8);
  REQUIRE(occ.size() == 4);
  CHECK(occ[0].segments[0].span.slot == 0);
  CHECK(occ[1].segments[0].span.slot == 1);
  CHECK(occ[2].segments[0].span.slot == 4);
  CHECK(occ[3].segments[0].span.slot == 5);
  CHECK(occ[2].period_index == 1);
  CHECK(occ[2].index_in_period == 0);
}

TEST_CASE("enumerate_occasions labels RVs from the period-anchored pattern") {
  CgConfig cfg;
  cfg.period_slots = 8;
  cfg.k_repetitions = 4;
  cfg.rv_pattern = RvPattern::rv0231();
  auto occ = enumerate_occasions(cfg, Profile::NR_R16, TddPattern::all_uplink(), 0, 8);
  REQUIRE(occ.size() == 4);
  CHECK(occ[0].rv_default == 0);
  CHECK(occ[1].rv_default == 2);
  CHECK(occ[2].rv_default == 3);
  CHECK(occ[3].rv_default == 1);
}

TEST_CASE("enumerate_occasions K=1 emits one TO per period") {
  CgConfig cfg;
  cfg.period_slots = 3;
  cfg.rv_pattern = RvPattern::rv0303();
  auto occ = enumerate_occasions(cfg, Profile::NR_R16, TddPattern::all_uplink(), 0, 9);
  CHECK(occ.size() == 3);
}

TEST_CASE("enumerate_occasions NR-U emits the TO product") {
  CgConfig cfg;
  cfg.period_slots = 4;
  cfg.k_repetitions = 2;
  cfg.nru_tos_per_slot = 2;
  cfg.nru_slots = 3;
  auto occ = enumerate_occasions(cfg, Profile::NRU_R16, TddPattern::all_uplink(), 0, 4);
  REQUIRE(occ.size() == 6);
  CHECK(occ[0].segments[0].span.length == 7);
  CHECK(occ[1].segments[0].span.start_symbol == 7);
  CHECK(occ[5].segments[0].span.slot == 2);
}

TEST_CASE("enumerate_occasions rejects oversized layouts") {
  CgConfig cfg;
  cfg.period_slots = 4;
  cfg.k_repetitions = 5;
  CHECK_THROWS_AS(
      enumerate_occasions(cfg, Profile::NR_R16, TddPattern::all_uplink(), 0, 8),
      ConfigError);
  cfg.k_repetitions = 2;
  cfg.gap_slots = 2;  // 2*(1+2) = 6 > 4
  CHECK_THROWS_AS(
      enumerate_occasions(cfg, Profile::NR_R16, TddPattern::all_uplink(), 0, 8),
      ConfigError);
}

TEST_CASE("allowed start indices per profile") {
  CgConfig cfg;
  cfg.period_slots = 8;
  cfg.k_repetitions = 4;
  cfg.rv_pattern = RvPattern::rv0303();

  SUBCASE("R15 and R16-without-flag start at the first TO") {
    CHECK(allowed_start_indices(cfg, Profile::NR_R15) == std::vector<int>{0});
    CHECK(allowed_start_indices(cfg, Profile::NR_R16) == std::vector<int>{0});
  }
  SUBCASE("startingFromRV0 opens every RV0 TO") {
    cfg.starting_from_rv0 = true;
    CHECK(allowed_start_indices(cfg, Profile::NR_R16) == std::vector<int>{0, 2});
  }
  SUBCASE("K >= 8 reverts to the first TO") {
    cfg.starting_from_rv0 = true;
    cfg.k_repetitions = 8;
    CHECK(allowed_start_indices(cfg, Profile::NR_R16) == std::vector<int>{0});
  }
  SUBCASE("NR-U starts at any TO") {
    cfg.nru_tos_per_slot = 2;
    cfg.nru_slots = 2;
    auto idx = allowed_start_indices(cfg, Profile::NRU_R16);
    CHECK(idx == std::vector<int>{0, 1, 2, 3});
  }
  SUBCASE("flexible start opens every occasion") {
    cfg.flexible_start = true;
    CHECK(allowed_start_indices(cfg, Profile::NR_R16) ==
          std::vector<int>{0, 1, 2, 3});
  }
  SUBCASE("index 0 is always allowed") {
    for (auto p : {Profile::NR_R15, Profile::NR_R16, Profile::NRU_R16}) {
      auto idx = allowed_start_indices(cfg, p);
      CHECK(std::find(idx.begin(), idx.end(), 0) != idx.end());
    }
  }
}

TEST_CASE("rv_for_start anchoring") {
  CgConfig cfg;
  cfg.k_repetitions = 4;
  cfg.rv_pattern = RvPattern::rv0231();

  SUBCASE("flexible start re-anchors the pattern") {
    cfg.flexible_start = true;
    CHECK(rv_for_start(cfg, 2, 2) == 0);
    CHECK(rv_for_start(cfg, 2, 3) == 2);
  }
  SUBCASE("zero shift is the default labeling") {
    cfg.flexible_start = true;
    for (int i = 0; i < 4; ++i)
      CHECK(rv_for_start(cfg, 0, i) == cfg.rv_pattern.rv_at(i));
  }
  SUBCASE("legacy stays period-anchored") {
    cfg.rv_pattern = RvPattern::rv0303();
    CHECK(rv_for_start(cfg, 2, 3) == 3);
    CHECK(rv_for_start(cfg, 0, 3) == 3);
  }
}

TEST_CASE("occasions available closed forms") {
  CHECK(occasions_available_legacy(8, 2, 2) == 6);
  CHECK(occasions_available_legacy(8, 1, 1) == 8);
  CHECK(occasions_available_legacy(8, 4, 2) == 4);
  CHECK(occasions_available_legacy(3, 4, 2) == 0);  // clamped
  CHECK(occasions_available_legacy(8, 2, 9) == 0);  // missed the period
  CHECK(occasions_available_flexible(8, 2) == 7);
  CHECK(occasions_available_flexible(8, 1) == 8);
  CHECK(occasions_available_flexible(8, 8) == 1);
  CHECK(occasions_available_flexible(8, 9) == 0);
}

TEST_CASE("flexible dominates legacy with equality iff (b-1) mod a == 0") {
  for (int K = 1; K <= 12; ++K) {
    for (int a : {1, 2, 4}) {
      for (int b = 1; b <= K; ++b) {
        int legacy = occasions_available_legacy(K, a, b);
        int flex = occasions_available_flexible(K, b);
        CHECK(flex >= legacy);
        if ((b - 1) % a == 0)
          CHECK(flex == legacy);
        else
          CHECK(flex > legacy);
      }
    }
  }
}

TEST_CASE("legacy_start_occasion finds the nearest RV0 TO") {
  CHECK(legacy_start_occasion(RvPattern::rv0000(), 3) == 2);
  CHECK(legacy_start_occasion(RvPattern::rv0303(), 2) == 2);
  CHECK(legacy_start_occasion(RvPattern::rv0303(), 3) == 2);
  CHECK(legacy_start_occasion(RvPattern::rv0231(), 2) == 4);
  CHECK(legacy_start_occasion(RvPattern::rv0231(), 1) == 0);
}

TEST_CASE("cg state machine") {
  CgConfig t1;
  t1.cg_id = 0;
  t1.cg_type = CgType::TYPE1;
  CgConfig t2;
  t2.cg_id = 1;
  t2.cg_type = CgType::TYPE2;

  CgStateMachine sm;
  sm.configure(t1);
  sm.configure(t2);
  CHECK(sm.state(0) == CgActivationState::ACTIVE);  // Type 1: offset-based
  CHECK(sm.state(1) == CgActivationState::CONFIGURED_INACTIVE);

  DciMessage act;
  act.purpose = DciPurpose::ACTIVATE;
  act.harq_field = 1;
  CHECK(sm.apply_activation(1, act, Profile::NR_R16, true));
  CHECK(sm.state(1) == CgActivationState::ACTIVE);
  CHECK(sm.pending_confirmation(1));
  sm.confirm(1);
  CHECK_FALSE(sm.pending_confirmation(1));

  // idempotence
  CHECK(sm.apply_activation(1, act, Profile::NR_R16, true));
  CHECK(sm.state(1) == CgActivationState::ACTIVE);
  CHECK_FALSE(sm.pending_confirmation(1));

  DciMessage rel;
  rel.purpose = DciPurpose::RELEASE;
  CHECK(sm.apply_release(rel, Profile::NR_R16, {1}));
  CHECK(sm.state(1) == CgActivationState::RELEASED);
  sm.confirm(1);
  CHECK(sm.apply_release(rel, Profile::NR_R16, {1}));  // no-op
  CHECK_FALSE(sm.pending_confirmation(1));
  CHECK(sm.any_active());

  // group release rejected outside R16
  CHECK_FALSE(sm.apply_release(rel, Profile::NRU_R16, {0, 1}));
  CHECK(sm.state(0) == CgActivationState::ACTIVE);
}

TEST_CASE("fdra resolution") {
  Fdra t1;
  t1.type = Fdra::Type::T1_CONTIGUOUS;
  t1.start_rb = 4;
  t1.length_rb = 3;
  CHECK(t1.resolve(50) == std::vector<int>{4, 5, 6});

  Fdra t0;
  t0.type = Fdra::Type::T0_BITMAP;
  t0.rbg_bitmap = "101";
  t0.rbg_size = 2;
  CHECK(t0.resolve(50) == std::vector<int>{0, 1, 4, 5});

  Fdra t2;
  t2.type = Fdra::Type::T2_INTERLACE;
  t2.interlace = 3;
  CHECK(t2.resolve(25) == std::vector<int>{3, 13, 23});
}

TEST_CASE("complementary occasion enumeration keeps all K repetitions") {
  std::vector<std::string> tdd = {"UUUUUUUUUUUUUU", "UUUUUUUUUUUUUU",
                                  "DDDDDDDDDDDDDD", "DDDDDDDDDDDDDD"};
  auto p = TddPattern::from_strings(tdd);
  CgConfig cfg;
  cfg.period_slots = 4;
  cfg.k_repetitions = 4;
  auto occ = enumerate_occasions_complementary(cfg, Profile::NR_R16, p, 1, 0, 4);
  REQUIRE(occ.size() == 4);
  CHECK(occ[0].segments[0].span.carrier_id == 0);
  CHECK(occ[1].segments[0].span.carrier_id == 0);
  CHECK(occ[2].segments[0].span.carrier_id == 1);
  CHECK(occ[3].segments[0].span.carrier_id == 1);
}
