#include "cgsim/drivers.hpp"

#include <cmath>

#include "cgsim/analytics.hpp"
#include "cgsim/errors.hpp"

namespace cgsim {

namespace {

double binomial_z(double empirical, double expected, std::int64_t n) {
  double se = std::sqrt(std::max(expected * (1.0 - expected), 1e-300) /
                        static_cast<double>(n));
  return (empirical - expected) / se;
}

CarrierConfig all_ul_carrier(int id) {
  CarrierConfig c;
  c.id = id;
  c.tdd = TddPattern::all_uplink();
  return c;
}

UeScenario perfect_ue(int ue_id, std::vector<int> cgs) {
  UeScenario u;
  u.ue_id = ue_id;
  u.cg_ids = std::move(cgs);
  u.bler.kind = BlerModel::Kind::BERNOULLI;
  u.bler.epsilon = 0.0;
  return u;
}

}  // namespace

ScenarioConfig make_gap_scenario(int K, int N, int T, std::int64_t periods,
                                 std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.profile = Profile::NR_R16;
  cfg.carriers.push_back(all_ul_carrier(0));

  GrantConfig g;
  g.cg.cg_id = 0;
  g.cg.period_slots = N;
  g.cg.k_repetitions = K;
  g.cg.gap_slots = T;
  g.cg.flexible_start = true;
  g.cg.rv_pattern = RvPattern::rv0000();
  cfg.grants.push_back(g);

  UeScenario u = perfect_ue(0, {0});
  u.traffic.kind = TrafficModel::Kind::UNIFORM_IN_PERIOD;
  u.traffic.n_slots = N;
  cfg.ues.push_back(u);

  cfg.enhancements.time_gap = T > 0;
  cfg.enhancements.flexible_start = true;
  cfg.confine_to_arrival_period = true;
  cfg.duration_slots = periods * N;
  cfg.seed = seed;
  return cfg;
}

ProbeResult run_gap_probe(int K, int N, int T, std::int64_t periods,
                          std::uint64_t seed) {
  auto cfg = make_gap_scenario(K, N, T, periods, seed);
  auto rep = run_single(cfg, seed, 0);
  const UeMetrics& m = rep.ues.front();
  ProbeResult r;
  r.samples = m.offered;
  r.simulated = m.at_least_one_fraction().value_or(0.0);
  r.analytical = p_at_least_one_rep(K, N, T);
  r.z = binomial_z(r.simulated, r.analytical, r.samples);
  return r;
}

std::vector<OccasionSweepRow> run_occasion_sweep(int k_max) {
  std::vector<OccasionSweepRow> rows;
  std::map<int, TddPattern> tdd{{0, TddPattern::all_uplink()}};
  const int spacings[] = {1, 2, 4};
  for (int K = 1; K <= k_max; ++K) {
    for (int a : spacings) {
      RvPattern pattern = a == 1   ? RvPattern::rv0000()
                          : a == 2 ? RvPattern::rv0303()
                                   : RvPattern::rv0231();
      for (int b = 1; b <= K; ++b) {
        OccasionSweepRow row{K, a, b, 0, 0,
                             occasions_available_legacy(K, a, b),
                             occasions_available_flexible(K, b)};

        CgConfig cg;
        cg.cg_id = 0;
        cg.period_slots = K;
        cg.k_repetitions = K;
        cg.rv_pattern = pattern;

        {  // legacy: nearest RV0 occasion at or after the arrival
          UeMac mac(0, Profile::NR_R16, {cg}, tdd, UeMacParams{});
          int start = legacy_start_occasion(pattern, b);
          if (start < K) {
            Packet pkt;
            auto plan = mac.transmit_repetitions(
                pkt, GrantChoice{0, 0, start,
                                 static_cast<SymbolTime>(start) * kSymbolsPerSlot});
            row.simulated_legacy = static_cast<int>(plan.emissions.size());
          }
        }
        {
          CgConfig flex = cg;
          flex.flexible_start = true;
          UeMac mac(0, Profile::NR_R16, {flex}, tdd, UeMacParams{});
          Packet pkt;
          auto plan = mac.transmit_repetitions(
              pkt, GrantChoice{0, 0, b - 1,
                               static_cast<SymbolTime>(b - 1) * kSymbolsPerSlot});
          row.simulated_flexible = static_cast<int>(plan.emissions.size());
        }
        rows.push_back(row);
      }
    }
  }
  return rows;
}

ProbeResult run_recovery_probe(const LinkModel& link, std::int64_t transmissions,
                               std::uint64_t seed) {
  Rng rng(seed, 0);
  std::int64_t recovered = 0;
  for (std::int64_t i = 0; i < transmissions; ++i) {
    if (!rng.bernoulli(link.p_transmit)) continue;
    if (detect(link, rng) != Detection::UNKNOWN_DETECTION) continue;
    if (!rng.bernoulli(link.p_common_nack_decode)) continue;
    if (detect(link, rng) == Detection::IDENTIFIED) recovered += 1;
  }
  ProbeResult r;
  r.samples = transmissions;
  r.simulated = static_cast<double>(recovered) / transmissions;
  r.analytical = p_common_nack_recovery(link);
  r.z = binomial_z(r.simulated, r.analytical, transmissions);
  return r;
}

ProbeResult run_collision_probe(const SharedPoolConfig& pool, std::int64_t slots,
                                std::uint64_t seed) {
  Rng rng(seed, 0);
  std::int64_t tx = 0, collided = 0;
  std::vector<int> occupancy(static_cast<std::size_t>(pool.k_plus));
  std::vector<int> picks(static_cast<std::size_t>(pool.n_ues));
  for (std::int64_t s = 0; s < slots; ++s) {
    std::fill(occupancy.begin(), occupancy.end(), 0);
    int active = 0;
    for (int u = 0; u < pool.n_ues; ++u) {
      if (!rng.bernoulli(pool.activity_q)) continue;
      int cell = static_cast<int>(rng.next_below(pool.k_plus));
      picks[active++] = cell;
      occupancy[cell] += 1;
    }
    for (int i = 0; i < active; ++i) {
      tx += 1;
      if (resolve_collisions(occupancy[picks[i]], true).empty()) collided += 1;
    }
  }
  ProbeResult r;
  r.samples = tx;
  r.simulated = tx ? static_cast<double>(collided) / tx : 0.0;
  r.analytical = p_shared_collision(pool);
  r.z = binomial_z(r.simulated, r.analytical, std::max<std::int64_t>(tx, 1));
  return r;
}

ScenarioConfig make_alignment_scenario(int period_slots, int m_configs,
                                       std::int64_t arrivals, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.profile = Profile::NR_R16;
  cfg.carriers.push_back(all_ul_carrier(0));
  std::vector<int> ids;
  for (int j = 0; j < m_configs; ++j) {
    GrantConfig g;
    g.cg.cg_id = j;
    g.cg.period_slots = period_slots;
    g.cg.offset_slots = j * period_slots / m_configs;
    g.cg.k_repetitions = 1;
    cfg.grants.push_back(g);
    ids.push_back(j);
  }
  UeScenario u = perfect_ue(0, ids);
  u.traffic.kind = TrafficModel::Kind::JITTERED;
  u.traffic.period_slots = period_slots;
  u.traffic.jitter_slots = period_slots;
  cfg.ues.push_back(u);
  cfg.duration_slots = arrivals * period_slots;
  cfg.seed = seed;
  return cfg;
}

ProbeResult run_alignment_probe(int period_slots, int m_configs,
                                std::int64_t arrivals, std::uint64_t seed) {
  auto cfg = make_alignment_scenario(period_slots, m_configs, arrivals, seed);
  auto rep = run_single(cfg, seed, 0);
  const UeMetrics& m = rep.ues.front();
  ProbeResult r;
  r.samples = m.packets_with_emission;
  r.simulated = m.mean_alignment_slots().value_or(0.0);
  r.analytical = mean_alignment_delay(period_slots, m_configs);
  // wait times are bounded by the start spacing; use its uniform sd
  double spacing = static_cast<double>(period_slots) / m_configs;
  double se = spacing / std::sqrt(12.0 * static_cast<double>(std::max<std::int64_t>(r.samples, 1)));
  r.z = (r.simulated - r.analytical) / se;
  return r;
}

ScenarioConfig make_nru_timer_scenario(bool ack_path, int retx_timer_tos,
                                       int cgt_slots, std::int64_t duration_slots) {
  ScenarioConfig cfg;
  cfg.profile = Profile::NRU_R16;
  CarrierConfig car = all_ul_carrier(0);
  LbtParams lbt;
  lbt.mode = LbtMode::LBE;
  lbt.p_busy = 0.0;
  car.lbt = lbt;
  cfg.carriers.push_back(car);

  GrantConfig g;
  g.cg.cg_id = 0;
  g.cg.period_slots = 1;
  g.cg.k_repetitions = 1;
  g.cg.nru_tos_per_slot = 1;
  g.cg.nru_slots = 1;
  g.cg.cg_retx_timer_tos = retx_timer_tos;
  g.cg.cg_timer_slots = cgt_slots;
  cfg.grants.push_back(g);

  UeScenario u = perfect_ue(0, {0});
  u.traffic.kind = TrafficModel::Kind::DETERMINISTIC;
  u.traffic.period_slots = 1000000;  // a single packet at t = 0
  if (!ack_path) {
    u.link.p_detect_energy = 0.0;  // gNB deaf: no CG-DFI ever
  }
  cfg.ues.push_back(u);
  cfg.duration_slots = duration_slots;
  return cfg;
}

OracleComparison compare_with_oracle(const ScenarioConfig& cfg,
                                     std::string_view metric) {
  OracleComparison out;

  if (metric == "at_least_one_rep") {
    if (cfg.ues.size() != 1 || cfg.grants.size() != 1 ||
        cfg.ues[0].traffic.kind != TrafficModel::Kind::UNIFORM_IN_PERIOD ||
        cfg.grants[0].cg.repetition_type != RepetitionType::A) {
      out.note = "no oracle: needs one UE, one Type A grant, uniform arrivals";
      return out;
    }
    const CgConfig& c = cfg.grants[0].cg;
    auto rep = run_single(cfg, cfg.seed, 0);
    const UeMetrics& m = rep.ues.front();
    out.covered = true;
    out.simulated = m.at_least_one_fraction().value_or(0.0);
    out.analytical = p_at_least_one_rep(c.k_repetitions, cfg.ues[0].traffic.n_slots,
                                        c.gap_slots);
    out.z = binomial_z(out.simulated, out.analytical, std::max<std::int64_t>(m.offered, 1));
    return out;
  }

  if (metric == "recovery") {
    if (cfg.ues.empty()) {
      out.note = "no oracle: needs a UE link model";
      return out;
    }
    auto probe = run_recovery_probe(cfg.ues[0].link, 1000000, cfg.seed);
    out.covered = true;
    out.simulated = probe.simulated;
    out.analytical = probe.analytical;
    out.z = probe.z;
    return out;
  }

  if (metric == "collision") {
    if (!cfg.shared_pool) {
      out.note = "no oracle: needs a shared_pool";
      return out;
    }
    SharedPoolConfig pool;
    pool.k_plus = cfg.shared_pool->k_plus;
    pool.activity_q = cfg.shared_pool->activity_q;
    pool.n_ues = cfg.shared_pool->n_background_ues +
                 static_cast<int>(cfg.ues.size());
    auto probe = run_collision_probe(pool, 1000000, cfg.seed);
    out.covered = true;
    out.simulated = probe.simulated;
    out.analytical = probe.analytical;
    out.z = probe.z;
    return out;
  }

  if (metric == "alignment_delay") {
    if (cfg.ues.size() != 1 || cfg.grants.empty()) {
      out.note = "no oracle: needs one UE with equally offset grants";
      return out;
    }
    int p = cfg.grants[0].cg.period_slots;
    int m_configs = static_cast<int>(cfg.grants.size());
    auto rep = run_single(cfg, cfg.seed, 0);
    const UeMetrics& m = rep.ues.front();
    out.covered = true;
    out.simulated = m.mean_alignment_slots().value_or(0.0);
    out.analytical = mean_alignment_delay(p, m_configs);
    double spacing = static_cast<double>(p) / m_configs;
    double se = spacing / std::sqrt(12.0 * static_cast<double>(std::max<std::int64_t>(
                                               m.packets_with_emission, 1)));
    out.z = (out.simulated - out.analytical) / se;
    return out;
  }

  out.note = "no oracle";
  return out;
}

}  // namespace cgsim
