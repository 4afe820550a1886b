#include "cgsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cgsim/errors.hpp"
#include "json.hpp"

namespace cgsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ValidationError({Violation{field, "", msg}});
}

void expect_keys(const json& o, const std::string& ctx,
                 std::initializer_list<const char*> allowed) {
  if (!o.is_object()) fail(ctx, "expected an object");
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool known = std::any_of(allowed.begin(), allowed.end(),
                             [&](const char* k) { return it.key() == k; });
    if (!known) fail(ctx + "." + it.key(), "unknown key");
  }
}

const json* get(const json& o, const char* key) {
  auto it = o.find(key);
  return it == o.end() ? nullptr : &*it;
}

template <typename T>
T req(const json& o, const std::string& ctx, const char* key) {
  const json* v = get(o, key);
  if (!v) fail(ctx + "." + key, "missing required field");
  try {
    return v->get<T>();
  } catch (const json::exception&) {
    fail(ctx + "." + key, "wrong type");
  }
}

template <typename T>
T opt(const json& o, const std::string& ctx, const char* key, T def) {
  const json* v = get(o, key);
  if (!v) return def;
  try {
    return v->get<T>();
  } catch (const json::exception&) {
    fail(ctx + "." + key, "wrong type");
  }
}

TrafficModel parse_traffic(const json& o, const std::string& ctx) {
  expect_keys(o, ctx, {"kind", "period_slots", "phase_slots", "n_slots",
                       "jitter_slots", "payload_bits"});
  TrafficModel t;
  auto kind = req<std::string>(o, ctx, "kind");
  t.payload_bits = opt<int>(o, ctx, "payload_bits", 256);
  if (kind == "deterministic") {
    t.kind = TrafficModel::Kind::DETERMINISTIC;
    t.period_slots = req<int>(o, ctx, "period_slots");
    t.phase_slots = opt<int>(o, ctx, "phase_slots", 0);
  } else if (kind == "uniform_in_period") {
    t.kind = TrafficModel::Kind::UNIFORM_IN_PERIOD;
    t.n_slots = req<int>(o, ctx, "n_slots");
  } else if (kind == "jittered") {
    t.kind = TrafficModel::Kind::JITTERED;
    t.period_slots = req<int>(o, ctx, "period_slots");
    t.jitter_slots = req<double>(o, ctx, "jitter_slots");
  } else {
    fail(ctx + ".kind", "unknown traffic kind \"" + kind + "\"");
  }
  return t;
}

BlerModel parse_bler(const json& o, const std::string& ctx) {
  expect_keys(o, ctx, {"kind", "epsilon", "payload_bits", "dmrs_overhead",
                       "subcarriers_per_rb"});
  BlerModel b;
  auto kind = req<std::string>(o, ctx, "kind");
  if (kind == "bernoulli") {
    b.kind = BlerModel::Kind::BERNOULLI;
    b.epsilon = req<double>(o, ctx, "epsilon");
  } else if (kind == "finite_blocklength") {
    b.kind = BlerModel::Kind::FINITE_BLOCKLENGTH;
    b.payload_bits = req<int>(o, ctx, "payload_bits");
    b.dmrs_overhead_symbols = opt<int>(o, ctx, "dmrs_overhead", 1);
    b.subcarriers_per_rb = opt<int>(o, ctx, "subcarriers_per_rb", 12);
  } else {
    fail(ctx + ".kind", "unknown bler kind \"" + kind + "\"");
  }
  return b;
}

LinkModel parse_link(const json& o, const std::string& ctx, BlerModel* bler) {
  expect_keys(o, ctx, {"gamma_db", "p_e", "p_d", "p_md", "p_cn", "p_t", "bler"});
  LinkModel l;
  l.snr_gamma = db_to_linear(opt<double>(o, ctx, "gamma_db", 0.0));
  l.p_detect_energy = opt<double>(o, ctx, "p_e", 1.0);
  l.p_id_decode = opt<double>(o, ctx, "p_d", 1.0);
  l.p_misdetect = opt<double>(o, ctx, "p_md", 0.0);
  l.p_common_nack_decode = opt<double>(o, ctx, "p_cn", 1.0);
  l.p_transmit = opt<double>(o, ctx, "p_t", 1.0);
  if (const json* b = get(o, "bler")) *bler = parse_bler(*b, ctx + ".bler");
  return l;
}

Fdra parse_fdra(const json& o, const std::string& ctx) {
  expect_keys(o, ctx, {"type", "rbg_bitmap", "rbg_size", "start_rb", "length_rb",
                       "interlace"});
  Fdra f;
  auto type = req<std::string>(o, ctx, "type");
  if (type == "T0") {
    f.type = Fdra::Type::T0_BITMAP;
    f.rbg_bitmap = req<std::string>(o, ctx, "rbg_bitmap");
    f.rbg_size = opt<int>(o, ctx, "rbg_size", 4);
  } else if (type == "T1") {
    f.type = Fdra::Type::T1_CONTIGUOUS;
    f.start_rb = req<int>(o, ctx, "start_rb");
    f.length_rb = req<int>(o, ctx, "length_rb");
  } else if (type == "T2") {
    f.type = Fdra::Type::T2_INTERLACE;
    f.interlace = req<int>(o, ctx, "interlace");
  } else {
    fail(ctx + ".type", "fdra type must be T0, T1 or T2");
  }
  return f;
}

DciFormat parse_dci_format(const std::string& s, const std::string& ctx) {
  if (s == "0_0") return DciFormat::F0_0;
  if (s == "0_1") return DciFormat::F0_1;
  if (s == "0_2") return DciFormat::F0_2;
  fail(ctx, "dci format must be 0_0, 0_1 or 0_2");
}

GrantConfig parse_grant(const json& o, const std::string& ctx) {
  expect_keys(o, ctx,
              {"cg_id", "cg_type", "carrier", "period_p", "offset", "sliv",
               "repetition_type", "k", "rv_pattern", "starting_from_rv0",
               "phy_priority", "gap_t", "flexible_start", "fdra",
               "nru_tos_per_slot", "nru_slots", "cg_retx_timer", "cg_timer",
               "activation_dci_format"});
  GrantConfig g;
  CgConfig& c = g.cg;
  c.cg_id = req<int>(o, ctx, "cg_id");
  auto type = opt<std::string>(o, ctx, "cg_type", "TYPE1");
  if (type == "TYPE1") c.cg_type = CgType::TYPE1;
  else if (type == "TYPE2") c.cg_type = CgType::TYPE2;
  else fail(ctx + ".cg_type", "cg_type must be TYPE1 or TYPE2");
  c.carrier_id = opt<int>(o, ctx, "carrier", 0);
  c.period_slots = req<int>(o, ctx, "period_p");
  c.offset_slots = opt<int>(o, ctx, "offset", 0);
  if (const json* s = get(o, "sliv")) {
    expect_keys(*s, ctx + ".sliv", {"start_symbol", "length"});
    c.sliv.start_symbol = req<int>(*s, ctx + ".sliv", "start_symbol");
    c.sliv.length = req<int>(*s, ctx + ".sliv", "length");
  } else {
    c.sliv.start_symbol = 0;
    c.sliv.length = kSymbolsPerSlot;
  }
  auto rep = opt<std::string>(o, ctx, "repetition_type", "A");
  if (rep == "A") c.repetition_type = RepetitionType::A;
  else if (rep == "B") c.repetition_type = RepetitionType::B;
  else fail(ctx + ".repetition_type", "repetition_type must be A or B");
  c.k_repetitions = opt<int>(o, ctx, "k", 1);
  auto rv = opt<std::string>(o, ctx, "rv_pattern", "0000");
  auto parsed = RvPattern::parse(rv);
  if (!parsed)
    fail(ctx + ".rv_pattern", "rv_pattern must be 0000, 0303 or 0231");
  c.rv_pattern = *parsed;
  c.starting_from_rv0 = opt<bool>(o, ctx, "starting_from_rv0", false);
  auto prio = opt<std::string>(o, ctx, "phy_priority", "low");
  if (prio == "low") c.phy_priority = PhyPriority::LOW;
  else if (prio == "high") c.phy_priority = PhyPriority::HIGH;
  else fail(ctx + ".phy_priority", "phy_priority must be low or high");
  c.gap_slots = opt<int>(o, ctx, "gap_t", 0);
  c.flexible_start = opt<bool>(o, ctx, "flexible_start", false);
  if (const json* f = get(o, "fdra")) c.fdra = parse_fdra(*f, ctx + ".fdra");
  c.nru_tos_per_slot = opt<int>(o, ctx, "nru_tos_per_slot", 1);
  c.nru_slots = opt<int>(o, ctx, "nru_slots", 1);
  c.cg_retx_timer_tos = opt<int>(o, ctx, "cg_retx_timer", 0);
  c.cg_timer_slots = opt<int>(o, ctx, "cg_timer", 0);
  g.activation_dci_format = parse_dci_format(
      opt<std::string>(o, ctx, "activation_dci_format", "0_0"),
      ctx + ".activation_dci_format");
  return g;
}

CarrierConfig parse_carrier(const json& o, const std::string& ctx) {
  expect_keys(o, ctx, {"id", "tdd", "lbt"});
  CarrierConfig c;
  c.id = req<int>(o, ctx, "id");
  auto tdd = req<std::vector<std::string>>(o, ctx, "tdd");
  try {
    c.tdd = TddPattern::from_strings(tdd);
  } catch (const ConfigError& e) {
    fail(ctx + ".tdd", e.what());
  }
  if (const json* l = get(o, "lbt")) {
    expect_keys(*l, ctx + ".lbt",
                {"mode", "p_busy", "backoff_window_symbols", "ffp_slots"});
    LbtParams p;
    auto mode = req<std::string>(*l, ctx + ".lbt", "mode");
    if (mode == "LBE") p.mode = LbtMode::LBE;
    else if (mode == "FBE") p.mode = LbtMode::FBE;
    else fail(ctx + ".lbt.mode", "mode must be LBE or FBE");
    p.p_busy = opt<double>(*l, ctx + ".lbt", "p_busy", 0.0);
    p.backoff_window_symbols = opt<int>(*l, ctx + ".lbt", "backoff_window_symbols", 4);
    p.ffp_slots = opt<int>(*l, ctx + ".lbt", "ffp_slots", 10);
    c.lbt = p;
  }
  return c;
}

UeScenario parse_ue(const json& o, const std::string& ctx) {
  expect_keys(o, ctx,
              {"ue_id", "cgs", "traffic", "link", "deadline_slots",
               "harq_pool_size", "cg_uci", "autonomous_tx",
               "ue_chooses_harq_id", "ue_selects_rv_pattern"});
  UeScenario u;
  u.ue_id = req<int>(o, ctx, "ue_id");
  u.cg_ids = req<std::vector<int>>(o, ctx, "cgs");
  if (const json* t = get(o, "traffic"))
    u.traffic = parse_traffic(*t, ctx + ".traffic");
  else
    fail(ctx + ".traffic", "missing required field");
  if (const json* l = get(o, "link"))
    u.link = parse_link(*l, ctx + ".link", &u.bler);
  u.deadline_slots = opt<std::int64_t>(o, ctx, "deadline_slots", 1000000);
  u.harq_pool_size = opt<int>(o, ctx, "harq_pool_size", 16);
  if (const json* v = get(o, "cg_uci")) u.cg_uci = v->get<bool>();
  if (const json* v = get(o, "autonomous_tx")) u.autonomous_tx = v->get<bool>();
  if (const json* v = get(o, "ue_chooses_harq_id"))
    u.ue_chooses_harq_id = v->get<bool>();
  if (const json* v = get(o, "ue_selects_rv_pattern"))
    u.ue_selects_rv_pattern = v->get<bool>();
  return u;
}

}  // namespace

CgConfig apply_tdra_row(CgConfig cfg, const TdraRow& row) {
  cfg.offset_slots += row.slot_offset;
  cfg.sliv.start_symbol = row.start_symbol;
  cfg.sliv.length = row.length;
  cfg.repetition_type = row.mapping;
  cfg.k_repetitions = row.repetitions;
  return cfg;
}

const CarrierConfig* ScenarioConfig::carrier(int id) const {
  for (const auto& c : carriers)
    if (c.id == id) return &c;
  return nullptr;
}

const GrantConfig* ScenarioConfig::grant(int cg_id) const {
  for (const auto& g : grants)
    if (g.cg.cg_id == cg_id) return &g;
  return nullptr;
}

ScenarioConfig parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail("scenario", std::string("not valid JSON: ") + e.what());
  }
  const std::string ctx = "scenario";
  expect_keys(root, ctx,
              {"schema_version", "profile", "numerology", "carriers",
               "configured_grants", "ues", "gnb", "shared_pool", "enhancements",
               "tdra_table", "secondary_carrier", "processing_margin_symbols",
               "bandwidth_rbs", "confine_to_arrival_period", "duration_slots",
               "seed", "replications"});

  ScenarioConfig cfg;
  cfg.schema_version = req<int>(root, ctx, "schema_version");
  auto prof = parse_profile(req<std::string>(root, ctx, "profile"));
  if (!prof) fail(ctx + ".profile", "profile must be NR_R15, NR_R16 or NRU_R16");
  cfg.profile = *prof;

  if (const json* n = get(root, "numerology")) {
    expect_keys(*n, ctx + ".numerology", {"scs_khz"});
    cfg.numerology.scs_khz = req<int>(*n, ctx + ".numerology", "scs_khz");
  }

  const json* carriers = get(root, "carriers");
  if (!carriers || !carriers->is_array() || carriers->empty())
    fail(ctx + ".carriers", "at least one carrier required");
  for (std::size_t i = 0; i < carriers->size(); ++i)
    cfg.carriers.push_back(
        parse_carrier((*carriers)[i], ctx + ".carriers[" + std::to_string(i) + "]"));

  if (const json* grants = get(root, "configured_grants"))
    for (std::size_t i = 0; i < grants->size(); ++i)
      cfg.grants.push_back(parse_grant(
          (*grants)[i], ctx + ".configured_grants[" + std::to_string(i) + "]"));

  if (const json* ues = get(root, "ues"))
    for (std::size_t i = 0; i < ues->size(); ++i)
      cfg.ues.push_back(parse_ue((*ues)[i], ctx + ".ues[" + std::to_string(i) + "]"));

  if (const json* g = get(root, "gnb")) {
    const std::string gctx = ctx + ".gnb";
    expect_keys(*g, gctx,
                {"ack_mode", "cg_dfi", "feedback_delay_slots", "dfi_delay_slots",
                 "nack_delay_slots", "blind_rv_decoding"});
    if (const json* a = get(*g, "ack_mode")) {
      auto mode = a->get<std::string>();
      if (mode == "implicit") cfg.gnb.explicit_ack = false;
      else if (mode == "explicit") cfg.gnb.explicit_ack = true;
      else fail(gctx + ".ack_mode", "ack_mode must be implicit or explicit");
    }
    if (const json* v = get(*g, "cg_dfi")) cfg.gnb.cg_dfi = v->get<bool>();
    cfg.gnb.feedback.feedback_delay_slots = opt<int>(*g, gctx, "feedback_delay_slots", 1);
    cfg.gnb.feedback.dfi_delay_slots = opt<int>(*g, gctx, "dfi_delay_slots", 1);
    cfg.gnb.feedback.nack_delay_slots = opt<int>(*g, gctx, "nack_delay_slots", 1);
    cfg.gnb.blind_rv_decoding = opt<bool>(*g, gctx, "blind_rv_decoding", false);
  }

  if (const json* p = get(root, "shared_pool")) {
    const std::string pctx = ctx + ".shared_pool";
    expect_keys(*p, pctx, {"carrier", "k_plus", "activity_q", "n_background_ues"});
    SharedPoolScenario sp;
    sp.carrier = req<int>(*p, pctx, "carrier");
    sp.k_plus = req<int>(*p, pctx, "k_plus");
    sp.activity_q = opt<double>(*p, pctx, "activity_q", 0.0);
    sp.n_background_ues = opt<int>(*p, pctx, "n_background_ues", 0);
    cfg.shared_pool = sp;
  }

  if (const json* e = get(root, "enhancements")) {
    const std::string ectx = ctx + ".enhancements";
    expect_keys(*e, ectx, {"time_gap", "flexible_start", "common_nack",
                           "shared_pool", "complementary_tdd"});
    cfg.enhancements.time_gap = opt<bool>(*e, ectx, "time_gap", false);
    cfg.enhancements.flexible_start = opt<bool>(*e, ectx, "flexible_start", false);
    cfg.enhancements.common_nack = opt<bool>(*e, ectx, "common_nack", false);
    cfg.enhancements.shared_pool = opt<bool>(*e, ectx, "shared_pool", false);
    cfg.enhancements.complementary_tdd =
        opt<bool>(*e, ectx, "complementary_tdd", false);
  }

  if (const json* t = get(root, "tdra_table")) {
    for (std::size_t i = 0; i < t->size(); ++i) {
      const std::string tctx = ctx + ".tdra_table[" + std::to_string(i) + "]";
      const json& row = (*t)[i];
      expect_keys(row, tctx,
                  {"slot_offset", "start_symbol", "length", "mapping", "repetitions"});
      TdraRow r;
      r.slot_offset = opt<int>(row, tctx, "slot_offset", 0);
      r.start_symbol = req<int>(row, tctx, "start_symbol");
      r.length = req<int>(row, tctx, "length");
      auto m = opt<std::string>(row, tctx, "mapping", "A");
      if (m == "A") r.mapping = RepetitionType::A;
      else if (m == "B") r.mapping = RepetitionType::B;
      else fail(tctx + ".mapping", "mapping must be A or B");
      r.repetitions = opt<int>(row, tctx, "repetitions", 1);
      cfg.tdra_table.push_back(r);
    }
  }

  cfg.secondary_carrier = opt<int>(root, ctx, "secondary_carrier", -1);
  cfg.processing_margin_symbols = opt<int>(root, ctx, "processing_margin_symbols", 0);
  cfg.bandwidth_rbs = opt<int>(root, ctx, "bandwidth_rbs", 50);
  cfg.confine_to_arrival_period =
      opt<bool>(root, ctx, "confine_to_arrival_period", false);
  cfg.duration_slots = req<std::int64_t>(root, ctx, "duration_slots");
  cfg.seed = opt<std::uint64_t>(root, ctx, "seed", 1);
  cfg.replications = opt<int>(root, ctx, "replications", 1);
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail("scenario", "cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

bool effective_cg_uci(const ScenarioConfig& cfg, const UeScenario& ue) {
  return ue.cg_uci.value_or(gates(cfg.profile).cg_uci);
}
bool effective_explicit_ack(const ScenarioConfig& cfg) {
  return cfg.gnb.explicit_ack.value_or(gates(cfg.profile).explicit_ack);
}
bool effective_cg_dfi(const ScenarioConfig& cfg) {
  return cfg.gnb.cg_dfi.value_or(gates(cfg.profile).dfi);
}

namespace {

bool type_b_crosses_slot(const CgConfig& c) {
  for (int i = 0; i < c.k_repetitions; ++i) {
    int first = c.sliv.start_symbol + i * c.sliv.length;
    int last = first + c.sliv.length - 1;
    if (first / kSymbolsPerSlot != last / kSymbolsPerSlot) return true;
  }
  return false;
}

void check_grant(const ScenarioConfig& cfg, const GrantConfig& g,
                 std::vector<Violation>& out) {
  const auto& gate = gates(cfg.profile);
  const CgConfig& c = g.cg;
  const std::string field = "configured_grants[cg_id=" + std::to_string(c.cg_id) + "]";

  if (c.cg_id < 0 || c.cg_id > 11)
    out.push_back({field + ".cg_id", "", "cg_id must be in 0..11"});
  if (!cfg.carrier(c.carrier_id))
    out.push_back({field + ".carrier", "", "unknown carrier"});
  if (c.period_slots < 1)
    out.push_back({field + ".period_p", "", "period must be >= 1 slot"});
  if (c.k_repetitions < 1)
    out.push_back({field + ".k", "", "K must be >= 1"});
  if (c.sliv.start_symbol < 0 || c.sliv.start_symbol > 13 || c.sliv.length < 1 ||
      c.sliv.length > 14)
    out.push_back({field + ".sliv", "", "SLIV needs S in 0..13 and L in 1..14"});
  if (c.offset_slots < 0 || c.offset_slots >= c.period_slots)
    out.push_back({field + ".offset", "", "offset must lie inside the period"});

  if (c.repetition_type == RepetitionType::B && !gate.type_b_repetition)
    out.push_back({field + ".repetition_type", "repetition",
                   "Type B repetition requires Release 16"});
  if (c.repetition_type == RepetitionType::B && cfg.profile == Profile::NRU_R16 &&
      type_b_crosses_slot(c))
    out.push_back({field + ".sliv", "repetition",
                   "NR-U Type B repetition cannot cross the slot boundary"});
  if (c.repetition_type == RepetitionType::A &&
      c.sliv.start_symbol + c.sliv.length > kSymbolsPerSlot)
    out.push_back({field + ".sliv", "", "Type A SLIV must fit one slot"});

  if (c.phy_priority == PhyPriority::HIGH && !gate.phy_priority)
    out.push_back({field + ".phy_priority", "phy_priority",
                   "PHY priority requires NR Release 16"});
  if (c.starting_from_rv0 && cfg.profile == Profile::NR_R15)
    out.push_back({field + ".starting_from_rv0", "transmission_beginning",
                   "Release 15 begins transmission at the first TO only"});

  if (c.gap_slots < 0)
    out.push_back({field + ".gap_t", "", "gap must be >= 0"});
  if (c.gap_slots > 0 && !cfg.enhancements.time_gap)
    out.push_back({field + ".gap_t", "", "time_gap enhancement not enabled"});
  if (c.gap_slots > 0 && cfg.profile == Profile::NR_R15)
    out.push_back({field + ".gap_t", "", "gap requires the R16 baseline"});
  if (c.flexible_start && !cfg.enhancements.flexible_start)
    out.push_back({field + ".flexible_start", "", "flexible_start enhancement not enabled"});
  if (c.flexible_start && cfg.profile == Profile::NR_R15)
    out.push_back({field + ".flexible_start", "", "flexible start requires the R16 baseline"});

  if (c.cg_retx_timer_tos > 0 && !gate.autonomous_retx)
    out.push_back({field + ".cg_retx_timer", "autonomous_retransmission",
                   "autonomous retransmission on CG is NR-U only"});
  if (cfg.profile == Profile::NRU_R16 && c.cg_retx_timer_tos < 1)
    out.push_back({field + ".cg_retx_timer", "autonomous_retransmission",
                   "NR-U CG requires cgRetransmissionTimer"});
  if ((c.nru_tos_per_slot > 1 || c.nru_slots > 1) && !gate.multi_harq_per_period)
    out.push_back({field + ".nru_tos_per_slot", "harq_processes_per_period",
                   "multiple HARQ processes per period are NR-U only"});

  if (g.activation_dci_format == DciFormat::F0_2 && !gate.dci_format_0_2)
    out.push_back({field + ".activation_dci_format", "activation_release_dci",
                   "DCI format 0-2 requires NR Release 16"});

  if (cfg.profile == Profile::NRU_R16) {
    if (c.nru_tos_per_slot < 1 || c.nru_slots < 1)
      out.push_back({field + ".nru_tos_per_slot", "", "NR-U TO counts must be >= 1"});
    else if (c.nru_slots > c.period_slots)
      out.push_back({field + ".nru_slots", "", "cg-nrofSlots exceeds the period"});
    else if (c.nru_tos_per_period() < c.k_repetitions)
      out.push_back({field + ".k", "", "NR-U TOs per period below K"});
    else if (kSymbolsPerSlot % c.nru_tos_per_slot != 0)
      out.push_back({field + ".nru_tos_per_slot", "",
                     "TOs per slot must divide 14 symbols"});
  } else if (c.repetition_type == RepetitionType::A) {
    if (static_cast<std::int64_t>(c.k_repetitions) * (1 + c.gap_slots) >
        c.period_slots)
      out.push_back({field + ".k", "", "type A layout K*(1+gap) exceeds the period"});
  } else {
    std::int64_t total = c.sliv.start_symbol +
                         static_cast<std::int64_t>(c.k_repetitions) * c.sliv.length;
    if (total > static_cast<std::int64_t>(c.period_slots) * kSymbolsPerSlot)
      out.push_back({field + ".k", "", "type B layout exceeds the period"});
  }
}

// symbol + RB overlap between two grants owned by different UEs
bool grants_overlap(const ScenarioConfig& cfg, const GrantConfig& a,
                    const GrantConfig& b) {
  if (a.cg.carrier_id != b.cg.carrier_id) return false;
  auto rbs_a = a.cg.fdra.resolve(cfg.bandwidth_rbs);
  auto rbs_b = b.cg.fdra.resolve(cfg.bandwidth_rbs);
  bool rb_overlap = std::any_of(rbs_a.begin(), rbs_a.end(), [&](int rb) {
    return std::find(rbs_b.begin(), rbs_b.end(), rb) != rbs_b.end();
  });
  if (!rb_overlap) return false;

  const CarrierConfig* car = cfg.carrier(a.cg.carrier_id);
  std::int64_t window = std::lcm<std::int64_t>(a.cg.period_slots, b.cg.period_slots);
  window = std::min<std::int64_t>(window * 2, 1024);
  auto occ_a = enumerate_occasions(a.cg, cfg.profile, car->tdd, 0, window);
  auto occ_b = enumerate_occasions(b.cg, cfg.profile, car->tdd, 0, window);
  for (const auto& oa : occ_a)
    for (const auto& ob : occ_b)
      for (const auto& sa : oa.segments)
        for (const auto& sb : ob.segments)
          if (sa.span.first_sym() < sb.span.end_sym() &&
              sb.span.first_sym() < sa.span.end_sym())
            return true;
  return false;
}

}  // namespace

std::vector<Violation> validate(const ScenarioConfig& cfg) {
  std::vector<Violation> out;
  const auto& gate = gates(cfg.profile);

  if (cfg.schema_version != 1)
    out.push_back({"schema_version", "", "unsupported schema version"});
  if (!Numerology::valid_scs(cfg.numerology.scs_khz))
    out.push_back({"numerology.scs_khz", "", "SCS must be 15, 30, 60 or 120 kHz"});
  if (cfg.duration_slots < 1)
    out.push_back({"duration_slots", "", "duration must be >= 1 slot"});
  if (cfg.replications < 1)
    out.push_back({"replications", "", "replications must be >= 1"});

  std::set<int> carrier_ids;
  for (const auto& c : cfg.carriers)
    if (!carrier_ids.insert(c.id).second)
      out.push_back({"carriers", "", "duplicate carrier id " + std::to_string(c.id)});

  std::set<int> cg_ids;
  for (const auto& g : cfg.grants) {
    if (!cg_ids.insert(g.cg.cg_id).second)
      out.push_back({"configured_grants", "",
                     "duplicate cg_id " + std::to_string(g.cg.cg_id)});
    check_grant(cfg, g, out);
  }
  if (static_cast<int>(cfg.grants.size()) > 12)
    out.push_back({"configured_grants", "max_configurations",
                   "at most 12 configurations"});

  std::map<int, int> owner;  // cg_id -> ue_id
  for (const auto& u : cfg.ues) {
    const std::string field = "ues[ue_id=" + std::to_string(u.ue_id) + "]";
    if (static_cast<int>(u.cg_ids.size()) > gate.max_configurations)
      out.push_back({field + ".cgs", "max_configurations",
                     profile_name(cfg.profile) == "NR_R15"
                         ? std::string("Release 15 allows a single configuration")
                         : std::string("at most 12 configurations per UE")});
    for (int id : u.cg_ids) {
      if (!cfg.grant(id)) {
        out.push_back({field + ".cgs", "", "unknown cg_id " + std::to_string(id)});
        continue;
      }
      auto [it, fresh] = owner.emplace(id, u.ue_id);
      if (!fresh)
        out.push_back({field + ".cgs", "",
                       "cg " + std::to_string(id) + " already owned by ue " +
                           std::to_string(it->second)});
    }
    auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob_ok(u.link.p_detect_energy) || !prob_ok(u.link.p_id_decode) ||
        !prob_ok(u.link.p_misdetect) || !prob_ok(u.link.p_common_nack_decode) ||
        !prob_ok(u.link.p_transmit))
      out.push_back({field + ".link", "", "probabilities must lie in [0,1]"});
    if (u.link.p_id_decode + u.link.p_misdetect > 1.0 + 1e-12)
      out.push_back({field + ".link", "", "P_D + P_MD must be <= 1"});
    if (u.deadline_slots < 1)
      out.push_back({field + ".deadline_slots", "", "deadline must be >= 1 slot"});
    if (u.harq_pool_size < 1)
      out.push_back({field + ".harq_pool_size", "", "harq pool must be >= 1"});

    if (u.cg_uci && *u.cg_uci != gate.cg_uci)
      out.push_back({field + ".cg_uci", "cg_uci",
                     gate.cg_uci ? "NR-U includes CG-UCI in every CG transmission"
                                 : "CG-UCI is NR-U only"});
    if (u.autonomous_tx && *u.autonomous_tx != gate.autonomous_tx)
      out.push_back({field + ".autonomous_tx", "autonomous_transmission",
                     "autonomous transmission is NR-U only"});
    if (u.ue_chooses_harq_id && *u.ue_chooses_harq_id != gate.ue_chooses_harq_id)
      out.push_back({field + ".ue_chooses_harq_id", "harq_id_determination",
                     gate.ue_chooses_harq_id
                         ? "NR-U UEs choose the HARQ ID and indicate it in CG-UCI"
                         : "NR HARQ IDs follow the gNB-defined rule"});
    if (u.ue_selects_rv_pattern &&
        *u.ue_selects_rv_pattern != gate.ue_selects_rv_pattern)
      out.push_back({field + ".ue_selects_rv_pattern", "rv_pattern_determination",
                     gate.ue_selects_rv_pattern
                         ? "NR-U UEs select the RV pattern"
                         : "NR RV patterns are indicated by the gNB"});
  }

  if (cfg.gnb.explicit_ack && *cfg.gnb.explicit_ack != gate.explicit_ack)
    out.push_back({"gnb.ack_mode", "ack_feedback",
                   gate.explicit_ack ? "NR-U ACK feedback is explicit"
                                     : "NR ACK is implicit"});
  if (cfg.gnb.cg_dfi && *cfg.gnb.cg_dfi != gate.dfi)
    out.push_back({"gnb.cg_dfi", "dfi",
                   gate.dfi ? "NR-U uses CG-DFI" : "CG-DFI is NR-U only"});

  if (cfg.shared_pool && !cfg.enhancements.shared_pool)
    out.push_back({"shared_pool", "", "shared_pool enhancement not enabled"});
  if (cfg.enhancements.shared_pool && !cfg.shared_pool)
    out.push_back({"enhancements.shared_pool", "", "shared_pool config missing"});
  if (cfg.shared_pool) {
    if (cfg.shared_pool->k_plus < 1)
      out.push_back({"shared_pool.k_plus", "", "k_plus must be >= 1"});
    if (cfg.shared_pool->activity_q < 0 || cfg.shared_pool->activity_q > 1)
      out.push_back({"shared_pool.activity_q", "", "activity must lie in [0,1]"});
    if (!cfg.carrier(cfg.shared_pool->carrier))
      out.push_back({"shared_pool.carrier", "", "unknown carrier"});
    for (const auto& g : cfg.grants)
      if (g.cg.carrier_id == cfg.shared_pool->carrier)
        out.push_back({"shared_pool.carrier", "",
                       "pool carrier must not host dedicated grants"});
  }
  if (cfg.enhancements.complementary_tdd && !cfg.carrier(cfg.secondary_carrier))
    out.push_back({"secondary_carrier", "",
                   "complementary_tdd needs a valid secondary carrier"});

  // dedicated allocations of different UEs must stay orthogonal
  for (std::size_t i = 0; i < cfg.grants.size(); ++i) {
    for (std::size_t j = i + 1; j < cfg.grants.size(); ++j) {
      auto oi = owner.find(cfg.grants[i].cg.cg_id);
      auto oj = owner.find(cfg.grants[j].cg.cg_id);
      if (oi == owner.end() || oj == owner.end() || oi->second == oj->second)
        continue;
      bool layout_ok = true;
      for (const auto& v : out)
        if (v.field.find("cg_id=" + std::to_string(cfg.grants[i].cg.cg_id)) !=
                std::string::npos ||
            v.field.find("cg_id=" + std::to_string(cfg.grants[j].cg.cg_id)) !=
                std::string::npos)
          layout_ok = false;
      if (layout_ok && grants_overlap(cfg, cfg.grants[i], cfg.grants[j]))
        out.push_back({"configured_grants", "",
                       "dedicated overlap between cg " +
                           std::to_string(cfg.grants[i].cg.cg_id) + " and cg " +
                           std::to_string(cfg.grants[j].cg.cg_id)});
    }
  }
  return out;
}

void validate_or_throw(const ScenarioConfig& cfg) {
  auto v = validate(cfg);
  if (!v.empty()) throw ValidationError(std::move(v));
}

}  // namespace cgsim
