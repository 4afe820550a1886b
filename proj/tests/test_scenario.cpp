#include <algorithm>

#include "cgsim/scenario.hpp"
#include "doctest.h"

using namespace cgsim;

namespace {

const char* kGoodScenario = R"({
  "schema_version": 1,
  "profile": "NR_R16",
  "numerology": {"scs_khz": 120},
  "carriers": [{"id": 0, "tdd": ["DDDDDDDDDDUUUU", "UUUUUUUUUUUUUU"]}],
  "configured_grants": [{
    "cg_id": 0, "cg_type": "TYPE1", "carrier": 0,
    "period_p": 4, "offset": 1,
    "sliv": {"start_symbol": 0, "length": 14},
    "repetition_type": "A", "k": 2,
    "rv_pattern": "0303", "starting_from_rv0": true,
    "fdra": {"type": "T1", "start_rb": 0, "length_rb": 4}
  }],
  "ues": [{
    "ue_id": 0, "cgs": [0],
    "traffic": {"kind": "uniform_in_period", "n_slots": 16, "payload_bits": 256},
    "link": {"gamma_db": 0.0, "p_e": 0.99, "p_d": 0.95, "p_md": 0.01, "p_cn": 0.99,
             "bler": {"kind": "finite_blocklength", "payload_bits": 256, "dmrs_overhead": 1}},
    "deadline_slots": 64
  }],
  "gnb": {"ack_mode": "implicit", "feedback_delay_slots": 1},
  "duration_slots": 64,
  "seed": 7,
  "replications": 2
})";

bool has_row(const std::vector<Violation>& v, const std::string& row) {
  return std::any_of(v.begin(), v.end(),
                     [&](const Violation& x) { return x.table1_row == row; });
}

}  // namespace

TEST_CASE("scenario parsing") {
  auto cfg = parse_scenario(kGoodScenario);
  CHECK(cfg.profile == Profile::NR_R16);
  CHECK(cfg.numerology.scs_khz == 120);
  REQUIRE(cfg.carriers.size() == 1);
  CHECK(cfg.carriers[0].tdd.period_slots == 2);
  CHECK(cfg.carriers[0].tdd.at(0, 3) == SymbolDir::DL);
  CHECK(cfg.carriers[0].tdd.at(0, 12) == SymbolDir::UL);
  REQUIRE(cfg.grants.size() == 1);
  CHECK(cfg.grants[0].cg.period_slots == 4);
  CHECK(cfg.grants[0].cg.rv_pattern == RvPattern::rv0303());
  CHECK(cfg.grants[0].cg.starting_from_rv0);
  REQUIRE(cfg.ues.size() == 1);
  CHECK(cfg.ues[0].traffic.kind == TrafficModel::Kind::UNIFORM_IN_PERIOD);
  CHECK(cfg.ues[0].traffic.n_slots == 16);
  CHECK(cfg.ues[0].link.p_misdetect == doctest::Approx(0.01));
  CHECK(cfg.ues[0].bler.kind == BlerModel::Kind::FINITE_BLOCKLENGTH);
  CHECK(cfg.ues[0].bler.payload_bits == 256);
  CHECK(cfg.gnb.explicit_ack.has_value());
  CHECK_FALSE(*cfg.gnb.explicit_ack);
  CHECK(cfg.replications == 2);
  CHECK(validate(cfg).empty());
}

TEST_CASE("unknown keys are errors, not warnings") {
  std::string bad = kGoodScenario;
  bad.replace(bad.find("\"seed\": 7"), 9, "\"sead\": 7");
  try {
    parse_scenario(bad);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    REQUIRE(e.violations.size() == 1);
    CHECK(e.violations[0].field == "scenario.sead");
    CHECK(e.violations[0].message == "unknown key");
  }
}

TEST_CASE("malformed values are rejected with the offending field") {
  std::string bad = kGoodScenario;
  bad.replace(bad.find("\"0303\""), 6, "\"0312\"");
  CHECK_THROWS_AS(parse_scenario(bad), ValidationError);

  std::string bad_tdd = kGoodScenario;
  bad_tdd.replace(bad_tdd.find("DDDDDDDDDDUUUU"), 14, "DDDDDDDDDDUUU");
  CHECK_THROWS_AS(parse_scenario(bad_tdd), ValidationError);

  std::string no_dur = kGoodScenario;
  no_dur.replace(no_dur.find("\"duration_slots\": 64,"), 21, "");
  CHECK_THROWS_AS(parse_scenario(no_dur), ValidationError);
}

TEST_CASE("validation names the violated conformance row") {
  auto cfg = parse_scenario(kGoodScenario);

  SUBCASE("multi-CG under R15") {
    cfg.profile = Profile::NR_R15;
    auto g = cfg.grants[0];
    g.cg.cg_id = 1;
    g.cg.offset_slots = 3;
    cfg.grants.push_back(g);
    cfg.ues[0].cg_ids = {0, 1};
    cfg.grants[0].cg.starting_from_rv0 = false;
    cfg.grants[1].cg.starting_from_rv0 = false;
    CHECK(has_row(validate(cfg), "max_configurations"));
  }
  SUBCASE("cg_uci requested under NR") {
    cfg.ues[0].cg_uci = true;
    CHECK(has_row(validate(cfg), "cg_uci"));
  }
  SUBCASE("NR-U grant without a retransmission timer") {
    cfg.profile = Profile::NRU_R16;
    cfg.grants[0].cg.starting_from_rv0 = false;
    CHECK(has_row(validate(cfg), "autonomous_retransmission"));
  }
  SUBCASE("explicit ack under NR") {
    cfg.gnb.explicit_ack = true;
    CHECK(has_row(validate(cfg), "ack_feedback"));
  }
}

TEST_CASE("dedicated grants of different UEs must not overlap") {
  auto cfg = parse_scenario(kGoodScenario);
  auto g = cfg.grants[0];
  g.cg.cg_id = 1;  // same slots, same RBs, different UE
  cfg.grants.push_back(g);
  UeScenario u2 = cfg.ues[0];
  u2.ue_id = 1;
  u2.cg_ids = {1};
  cfg.ues.push_back(u2);
  auto v = validate(cfg);
  bool overlap = std::any_of(v.begin(), v.end(), [](const Violation& x) {
    return x.message.find("dedicated overlap") != std::string::npos;
  });
  CHECK(overlap);

  // disjoint RBs resolve the conflict
  cfg.grants[1].cg.fdra.start_rb = 10;
  CHECK(validate(cfg).empty());
}

TEST_CASE("same-UE overlapping grants are allowed (priority resolves them)") {
  auto cfg = parse_scenario(kGoodScenario);
  auto g = cfg.grants[0];
  g.cg.cg_id = 1;
  cfg.grants.push_back(g);
  cfg.ues[0].cg_ids = {0, 1};
  CHECK(validate(cfg).empty());
}

TEST_CASE("shared pool gating") {
  auto cfg = parse_scenario(kGoodScenario);
  SharedPoolScenario pool;
  pool.carrier = 1;
  pool.k_plus = 4;
  cfg.shared_pool = pool;
  auto v = validate(cfg);
  CHECK_FALSE(v.empty());  // enhancement off and carrier unknown

  cfg.enhancements.shared_pool = true;
  CarrierConfig pool_carrier;
  pool_carrier.id = 1;
  pool_carrier.tdd = TddPattern::all_uplink();
  cfg.carriers.push_back(pool_carrier);
  CHECK(validate(cfg).empty());
}

TEST_CASE("effective knob defaults follow the profile") {
  auto cfg = parse_scenario(kGoodScenario);
  CHECK_FALSE(effective_cg_uci(cfg, cfg.ues[0]));
  CHECK_FALSE(effective_cg_dfi(cfg));
  CHECK_FALSE(effective_explicit_ack(cfg));
  cfg.profile = Profile::NRU_R16;
  cfg.gnb.explicit_ack.reset();
  CHECK(effective_cg_uci(cfg, cfg.ues[0]));
  CHECK(effective_cg_dfi(cfg));
  CHECK(effective_explicit_ack(cfg));
}

TEST_CASE("tdra rows reshape a grant") {
  CgConfig cfg;
  cfg.offset_slots = 1;
  cfg.sliv = {0, 0, 0, 14};
  cfg.k_repetitions = 1;
  TdraRow row{2, 4, 6, RepetitionType::B, 4};
  auto out = apply_tdra_row(cfg, row);
  CHECK(out.offset_slots == 3);
  CHECK(out.sliv.start_symbol == 4);
  CHECK(out.sliv.length == 6);
  CHECK(out.repetition_type == RepetitionType::B);
  CHECK(out.k_repetitions == 4);
}

TEST_CASE("tdra table parses from the scenario file") {
  std::string with_table = kGoodScenario;
  auto pos = with_table.find("\"duration_slots\"");
  with_table.insert(pos,
                    "\"tdra_table\": [{\"slot_offset\": 1, \"start_symbol\": 2, "
                    "\"length\": 4, \"mapping\": \"B\", \"repetitions\": 2}],\n  ");
  auto cfg = parse_scenario(with_table);
  REQUIRE(cfg.tdra_table.size() == 1);
  CHECK(cfg.tdra_table[0].start_symbol == 2);
  CHECK(cfg.tdra_table[0].mapping == RepetitionType::B);
}
