#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cgsim/sim_engine.hpp"

namespace cgsim {

/// Simulated-vs-analytical probe outcome. z is the difference in binomial (or
/// replication) standard errors.
struct ProbeResult {
  double simulated = 0.0;
  double analytical = 0.0;
  double z = 0.0;
  std::int64_t samples = 0;
};

/// Single UE, K Type-A repetitions spaced T slots apart in an N-slot period,
/// one uniform arrival per period confined to its own period.
ScenarioConfig make_gap_scenario(int K, int N, int T, std::int64_t periods,
                                 std::uint64_t seed);
/// m equally offset single-repetition CGs over a period of p slots,
/// continuous-uniform arrivals.
ScenarioConfig make_alignment_scenario(int period_slots, int m_configs,
                                       std::int64_t arrivals, std::uint64_t seed);
/// NR-U single-TO-per-slot grant for timer traces: P_E = 1 on the ACK path,
/// P_E = 0 (gNB deaf, no CG-DFI) otherwise.
ScenarioConfig make_nru_timer_scenario(bool ack_path, int retx_timer_tos,
                                       int cgt_slots, std::int64_t duration_slots);

/// Empirical at-least-one-repetition frequency against (T(K-1)+K)/N.
ProbeResult run_gap_probe(int K, int N, int T, std::int64_t periods,
                          std::uint64_t seed);

/// Emission counts from the transmit machinery against the closed forms,
/// resolved with the nearest-RV0 rule (the analytical comparison deliberately
/// ignores the K >= 8 first-TO clamp, as the closed form does).
struct OccasionSweepRow {
  int K = 0, a = 0, b = 0;
  int simulated_legacy = 0, simulated_flexible = 0;
  int closed_legacy = 0, closed_flexible = 0;
};
std::vector<OccasionSweepRow> run_occasion_sweep(int k_max = 12);

/// Detection-chain probe for the common-NACK recovery product.
ProbeResult run_recovery_probe(const LinkModel& link, std::int64_t transmissions,
                               std::uint64_t seed);

/// Slotted contention probe for the shared-pool collision probability.
ProbeResult run_collision_probe(const SharedPoolConfig& pool, std::int64_t slots,
                                std::uint64_t seed);

/// Full-simulation mean alignment delay against p/(2m).
ProbeResult run_alignment_probe(int period_slots, int m_configs,
                                std::int64_t arrivals, std::uint64_t seed);

struct OracleComparison {
  bool covered = false;
  double simulated = 0.0;
  double analytical = 0.0;
  double z = 0.0;
  std::string note;
};

/// Binds a scenario to the closed-form oracle it maps to. Metrics:
/// at_least_one_rep, recovery, collision, alignment_delay. Scenarios outside
/// oracle coverage return covered = false.
OracleComparison compare_with_oracle(const ScenarioConfig& cfg,
                                     std::string_view metric);

}  // namespace cgsim
