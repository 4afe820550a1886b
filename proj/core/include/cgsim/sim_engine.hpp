#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgsim/scenario.hpp"

namespace cgsim {

struct UeMetrics {
  int ue_id = 0;
  std::int64_t offered = 0;
  std::int64_t delivered = 0;
  std::int64_t delivered_within_deadline = 0;
  std::int64_t packets_with_emission = 0;  // first emission inside the arrival window
  std::int64_t reps_scheduled = 0;
  std::int64_t reps_emitted = 0;
  std::int64_t skipped_missed = 0;
  std::int64_t skipped_lbt = 0;
  std::int64_t skipped_cancelled = 0;
  std::int64_t shared_emissions = 0;
  std::int64_t collisions = 0;
  std::int64_t lbt_blocks = 0;
  std::int64_t common_nack_recoveries = 0;
  double sum_alignment_slots = 0.0;  // over packets_with_emission
  std::vector<float> latencies_us;   // delivered packets

  std::optional<double> reliability() const {
    if (offered == 0) return std::nullopt;
    return static_cast<double>(delivered_within_deadline) / offered;
  }
  std::optional<double> at_least_one_fraction() const {
    if (offered == 0) return std::nullopt;
    return static_cast<double>(packets_with_emission) / offered;
  }
  std::optional<double> mean_alignment_slots() const {
    if (packets_with_emission == 0) return std::nullopt;
    return sum_alignment_slots / packets_with_emission;
  }
};

struct ReplicationResult {
  std::vector<UeMetrics> ues;  // ordered by ue_id
};

struct MetricsReport {
  ScenarioConfig scenario;  // the validated input the report belongs to
  std::vector<ReplicationResult> replications;

  /// Metric means and standard errors across replications, one entry per UE.
  struct Aggregate {
    int ue_id = 0;
    std::int64_t offered = 0, delivered = 0, delivered_within_deadline = 0;
    double reliability_mean = 0, reliability_se = 0;
    bool reliability_defined = false;
    bool reliability_undersampled = true;  // five-nines needs offered >= 1e7
    double at_least_one_mean = 0, at_least_one_se = 0;
    double alignment_mean = 0, alignment_se = 0;
    bool alignment_defined = false;
    std::int64_t reps_scheduled = 0, reps_emitted = 0, skipped_missed = 0,
                 skipped_lbt = 0, skipped_cancelled = 0, shared_emissions = 0,
                 collisions = 0, lbt_blocks = 0, common_nack_recoveries = 0;
    std::vector<float> pooled_latencies_us;  // across replications, sorted
  };
  std::vector<Aggregate> aggregates() const;
};

/// MAC-level event record for trace-equality tests and CG-UCI inspection.
struct TraceEvent {
  enum class Kind { TX, RETX, ACKED, FAILED, DELIVERED, LBT_BLOCKED, CANCELLED };
  Kind kind = Kind::TX;
  SymbolTime t = 0;
  int ue_id = 0;
  int cg_id = -1;
  std::int64_t to_index = -1;
  int harq_id = -1;
  int rv = -1;
  bool cg_uci = false;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

std::string trace_kind_name(TraceEvent::Kind k);

/// One replication on stream `stream` of `seed`. Validates first.
ReplicationResult run_single(const ScenarioConfig& cfg, std::uint64_t seed,
                             std::uint64_t stream,
                             std::vector<TraceEvent>* trace = nullptr);

/// Single-replication report on stream 0 of `seed`.
MetricsReport run_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

/// R independent replications on streams 0..R-1 of cfg.seed, reduced in
/// stream order.
MetricsReport run_replications(const ScenarioConfig& cfg, int replications);

/// Nearest-rank percentile over sorted values; empty when the sample cannot
/// support the quantile (needs n*(1 - q/100) >= 1 and n >= 2).
std::optional<double> percentile(std::span<const float> sorted_values, double q);

}  // namespace cgsim
