#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgsim/analytics.hpp"
#include "cgsim/cg_core.hpp"
#include "cgsim/errors.hpp"
#include "cgsim/gnb_model.hpp"
#include "cgsim/ue_mac.hpp"

namespace cgsim {

struct CarrierConfig {
  int id = 0;
  TddPattern tdd;
  std::optional<LbtParams> lbt;  // unlicensed carriers only
};

/// TDRA allocation-table row; an activation DCI's tdra_row indexes into the
/// scenario-supplied table.
struct TdraRow {
  int slot_offset = 0;
  int start_symbol = 0;
  int length = 14;
  RepetitionType mapping = RepetitionType::A;
  int repetitions = 1;
};

CgConfig apply_tdra_row(CgConfig cfg, const TdraRow& row);

/// One grant plus its scenario-only knobs.
struct GrantConfig {
  CgConfig cg;
  DciFormat activation_dci_format = DciFormat::F0_0;
};

struct UeScenario {
  int ue_id = 0;
  std::vector<int> cg_ids;
  TrafficModel traffic;
  LinkModel link;
  BlerModel bler;
  std::int64_t deadline_slots = 1000000;
  int harq_pool_size = 16;
  // Profile-gated capabilities; unset means "whatever the profile mandates".
  std::optional<bool> cg_uci;
  std::optional<bool> autonomous_tx;
  std::optional<bool> ue_chooses_harq_id;
  std::optional<bool> ue_selects_rv_pattern;
};

struct GnbScenario {
  std::optional<bool> explicit_ack;  // ack_mode knob; profile default when unset
  std::optional<bool> cg_dfi;
  FeedbackPolicy feedback;
  bool blind_rv_decoding = false;
};

struct EnhancementToggles {
  bool time_gap = false;
  bool flexible_start = false;
  bool common_nack = false;
  bool shared_pool = false;
  bool complementary_tdd = false;
};

struct SharedPoolScenario {
  int carrier = 1;
  int k_plus = 1;
  double activity_q = 0.0;  // background contender activity per slot
  int n_background_ues = 0;
};

struct ScenarioConfig {
  int schema_version = 1;
  Profile profile = Profile::NR_R16;
  Numerology numerology;
  std::vector<CarrierConfig> carriers;
  std::vector<GrantConfig> grants;
  std::vector<UeScenario> ues;
  GnbScenario gnb;
  std::optional<SharedPoolScenario> shared_pool;
  EnhancementToggles enhancements;
  std::vector<TdraRow> tdra_table;
  int secondary_carrier = -1;             // complementary_tdd target
  int processing_margin_symbols = 0;
  int bandwidth_rbs = 50;
  bool confine_to_arrival_period = false;  // no cross-period rollover
  std::int64_t duration_slots = 100;
  std::uint64_t seed = 1;
  int replications = 1;

  const CarrierConfig* carrier(int id) const;
  const GrantConfig* grant(int cg_id) const;
};

/// Strict parse: unknown keys, wrong types and malformed values are errors.
ScenarioConfig parse_scenario(const std::string& json_text);
ScenarioConfig load_scenario(const std::filesystem::path& file);

/// Full profile-gating and consistency check. Violations of Table-gated
/// features carry the conformance row name.
std::vector<Violation> validate(const ScenarioConfig& cfg);

/// Throwing wrapper used by the run paths.
void validate_or_throw(const ScenarioConfig& cfg);

/// Effective (profile-defaulted) values of the gated knobs.
bool effective_cg_uci(const ScenarioConfig& cfg, const UeScenario& ue);
bool effective_explicit_ack(const ScenarioConfig& cfg);
bool effective_cg_dfi(const ScenarioConfig& cfg);

}  // namespace cgsim
