#include "cgsim/conformance.hpp"

#include <algorithm>

namespace cgsim {

namespace {

ScenarioConfig base_scenario(Profile profile) {
  ScenarioConfig cfg;
  cfg.profile = profile;
  CarrierConfig car;
  car.id = 0;
  car.tdd = TddPattern::all_uplink();
  cfg.carriers.push_back(car);

  GrantConfig g;
  g.cg.cg_id = 0;
  g.cg.period_slots = 4;
  g.cg.k_repetitions = 1;
  if (profile == Profile::NRU_R16) {
    g.cg.cg_retx_timer_tos = 4;
    g.cg.cg_timer_slots = 16;
  }
  cfg.grants.push_back(g);

  UeScenario u;
  u.ue_id = 0;
  u.cg_ids = {0};
  u.traffic.kind = TrafficModel::Kind::DETERMINISTIC;
  u.traffic.period_slots = 4;
  cfg.ues.push_back(u);
  cfg.duration_slots = 16;
  return cfg;
}

GrantConfig extra_grant(const ScenarioConfig& cfg, int cg_id) {
  GrantConfig g = cfg.grants.front();
  g.cg.cg_id = cg_id;
  g.cg.offset_slots = cg_id % g.cg.period_slots;
  return g;
}

bool has_row(const std::vector<Violation>& v, const std::string& row) {
  return std::any_of(v.begin(), v.end(),
                     [&](const Violation& x) { return x.table1_row == row; });
}

ConformanceCheck scenario_pair(const std::string& row,
                               const ScenarioConfig& allowed,
                               const ScenarioConfig& violating) {
  ConformanceCheck c;
  c.row = row;
  auto va = validate(allowed);
  auto vv = validate(violating);
  bool allowed_ok = va.empty();
  bool violated = has_row(vv, row);
  c.pass = allowed_ok && violated;
  if (!allowed_ok) c.detail = "permitted variant rejected: " + va.front().message;
  else if (!violated) c.detail = "out-of-profile variant not rejected";
  else c.detail = vv.front().message;
  return c;
}

}  // namespace

std::vector<ConformanceCheck> run_conformance_matrix() {
  std::vector<ConformanceCheck> out;

  {  // 1. maximum number of configurations
    ScenarioConfig allowed = base_scenario(Profile::NR_R16);
    allowed.grants.push_back(extra_grant(allowed, 1));
    allowed.ues[0].cg_ids = {0, 1};
    ScenarioConfig violating = base_scenario(Profile::NR_R15);
    violating.grants.push_back(extra_grant(violating, 1));
    violating.ues[0].cg_ids = {0, 1};
    out.push_back(scenario_pair("max_configurations", allowed, violating));
  }
  {  // 2. activation/release DCI formats
    ScenarioConfig allowed = base_scenario(Profile::NR_R16);
    allowed.grants[0].cg.cg_type = CgType::TYPE2;
    allowed.grants[0].activation_dci_format = DciFormat::F0_2;
    ScenarioConfig violating = base_scenario(Profile::NR_R15);
    violating.grants[0].cg.cg_type = CgType::TYPE2;
    violating.grants[0].activation_dci_format = DciFormat::F0_2;
    out.push_back(scenario_pair("activation_release_dci", allowed, violating));
  }
  {  // 3. group release (DCI-level check)
    ConformanceCheck c;
    c.row = "group_release";
    DciMessage dci;
    dci.purpose = DciPurpose::RELEASE;
    bool allowed_ok = validate_release(dci, Profile::NR_R16, {1, 2, 3}).valid &&
                      validate_release(dci, Profile::NRU_R16, {0}).valid;
    auto rejected = validate_release(dci, Profile::NRU_R16, {1, 2});
    auto rejected15 = validate_release(dci, Profile::NR_R15, {1, 2});
    c.pass = allowed_ok && !rejected.valid && rejected.violated_row == c.row &&
             !rejected15.valid && rejected15.violated_row == c.row;
    c.detail = c.pass ? "group release release-16 only" : "gating mismatch";
    out.push_back(c);
  }
  {  // 4. repetition types and Type B slot-boundary crossing
    ScenarioConfig allowed = base_scenario(Profile::NR_R16);
    allowed.grants[0].cg.repetition_type = RepetitionType::B;
    allowed.grants[0].cg.sliv = {0, 0, 10, 8};  // crosses into the next slot
    allowed.grants[0].cg.k_repetitions = 1;
    ScenarioConfig violating = base_scenario(Profile::NRU_R16);
    violating.grants[0].cg.repetition_type = RepetitionType::B;
    violating.grants[0].cg.sliv = {0, 0, 10, 8};
    violating.grants[0].cg.k_repetitions = 1;
    out.push_back(scenario_pair("repetition", allowed, violating));
  }
  {  // 5. PHY priority
    ScenarioConfig allowed = base_scenario(Profile::NR_R16);
    allowed.grants[0].cg.phy_priority = PhyPriority::HIGH;
    ScenarioConfig violating = base_scenario(Profile::NR_R15);
    violating.grants[0].cg.phy_priority = PhyPriority::HIGH;
    out.push_back(scenario_pair("phy_priority", allowed, violating));
  }
  {  // 6. ACK feedback mode
    ScenarioConfig allowed = base_scenario(Profile::NRU_R16);
    allowed.gnb.explicit_ack = true;
    ScenarioConfig violating = base_scenario(Profile::NR_R16);
    violating.gnb.explicit_ack = true;
    out.push_back(scenario_pair("ack_feedback", allowed, violating));
  }
  {  // 7. autonomous transmission
    ScenarioConfig allowed = base_scenario(Profile::NRU_R16);
    allowed.ues[0].autonomous_tx = true;
    ScenarioConfig violating = base_scenario(Profile::NR_R16);
    violating.ues[0].autonomous_tx = true;
    out.push_back(scenario_pair("autonomous_transmission", allowed, violating));
  }
  {  // 8. CG-UCI
    ScenarioConfig allowed = base_scenario(Profile::NRU_R16);
    allowed.ues[0].cg_uci = true;
    ScenarioConfig violating = base_scenario(Profile::NR_R16);
    violating.ues[0].cg_uci = true;
    out.push_back(scenario_pair("cg_uci", allowed, violating));
  }
  {  // 9. DFI
    ScenarioConfig allowed = base_scenario(Profile::NRU_R16);
    allowed.gnb.cg_dfi = true;
    ScenarioConfig violating = base_scenario(Profile::NR_R16);
    violating.gnb.cg_dfi = true;
    out.push_back(scenario_pair("dfi", allowed, violating));
  }
  {  // 10. transmission beginning in a period
    ScenarioConfig allowed = base_scenario(Profile::NR_R16);
    allowed.grants[0].cg.starting_from_rv0 = true;
    allowed.grants[0].cg.k_repetitions = 4;
    allowed.grants[0].cg.rv_pattern = RvPattern::rv0303();
    ScenarioConfig violating = base_scenario(Profile::NR_R15);
    violating.grants[0].cg.starting_from_rv0 = true;
    out.push_back(scenario_pair("transmission_beginning", allowed, violating));
  }
  {  // 11. HARQ ID determination
    ScenarioConfig allowed = base_scenario(Profile::NRU_R16);
    allowed.ues[0].ue_chooses_harq_id = true;
    ScenarioConfig violating = base_scenario(Profile::NR_R16);
    violating.ues[0].ue_chooses_harq_id = true;
    out.push_back(scenario_pair("harq_id_determination", allowed, violating));
  }
  {  // 12. RV pattern determination
    ScenarioConfig allowed = base_scenario(Profile::NRU_R16);
    allowed.ues[0].ue_selects_rv_pattern = true;
    ScenarioConfig violating = base_scenario(Profile::NR_R16);
    violating.ues[0].ue_selects_rv_pattern = true;
    out.push_back(scenario_pair("rv_pattern_determination", allowed, violating));
  }
  {  // 13. autonomous retransmission on CG
    ScenarioConfig allowed = base_scenario(Profile::NRU_R16);
    ScenarioConfig violating = base_scenario(Profile::NR_R16);
    violating.grants[0].cg.cg_retx_timer_tos = 4;
    out.push_back(scenario_pair("autonomous_retransmission", allowed, violating));
  }
  {  // 14. HARQ processes per CG period
    ScenarioConfig allowed = base_scenario(Profile::NRU_R16);
    allowed.grants[0].cg.nru_tos_per_slot = 2;
    allowed.grants[0].cg.nru_slots = 2;
    ScenarioConfig violating = base_scenario(Profile::NR_R16);
    violating.grants[0].cg.nru_tos_per_slot = 2;
    violating.grants[0].cg.nru_slots = 2;
    out.push_back(scenario_pair("harq_processes_per_period", allowed, violating));
  }
  return out;
}

}  // namespace cgsim
