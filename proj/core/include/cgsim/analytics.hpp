#pragma once

#include <optional>
#include <vector>

#include "cgsim/gnb_model.hpp"

namespace cgsim {

/// Contention pool: k_plus occasions per slot shared by n_ues, each UE
/// accessing a slot with probability activity_q.
struct SharedPoolConfig {
  int k_plus = 1;
  int n_ues = 1;
  double activity_q = 0.0;
};

struct DedicatedCgSummary {
  double p_arrival = 0.0;  // P_a, per-occasion arrival probability
  int k_repetitions = 1;
  double gamma = 1.0;  // linear SINR
};

/// Probability that an arrival uniform over an N-slot period reaches at least
/// one of K occasions spaced T slots apart: (T(K-1) + K) / N.
double p_at_least_one_rep(int K, int N_slots, int T_gap);

/// P_T * P_E * (1 - P_D - P_MD): transmission detected but carrying no usable
/// UE identity.
double p_unknown_detection(const LinkModel& link);

/// Full common-NACK chain: P_T * P_E * (1-P_D-P_MD) * P_CN * P_E * P_D.
double p_common_nack_recovery(const LinkModel& link);

/// Probability a tagged shared-pool transmission collides with at least one
/// of the n_ues - 1 contenders: 1 - (1 - q/k_plus)^(n_ues - 1).
double p_shared_collision(const SharedPoolConfig& pool);

/// Arrival-offset distribution over the K occasions of a period. p_start[b-1]
/// is the probability of arriving at 1-based occasion b; p_miss the
/// probability of missing every dedicated occasion (postponement branch).
struct ArrivalDistribution {
  std::vector<double> p_start;
  double p_miss = 0.0;

  /// Independent per-occasion probability P_a, miss = 1 - K*P_a.
  static ArrivalDistribution per_occasion(double p_arrival, int K);
  static ArrivalDistribution deterministic(int K, int b);
};

/// Per-attempt decode error of one reference occasion (`symbols` x `rbs`,
/// RV0) under the model; the scalar the composed error builds on.
double per_attempt_error(const BlerModel& bler, double gamma, int symbols = 14,
                         int rbs = 1);

/// Dedicated-then-shared error product P_eD * P_eS. An arrival at occasion b
/// transmits K-b+1 dedicated repetitions and b-1 shared ones; a shared
/// repetition is useless if it collides or fails decoding; an arrival that
/// missed every dedicated occasion postpones to the next period (all K
/// dedicated, nothing shared). Each factor is an expectation over the arrival
/// offset.
double composed_error(const DedicatedCgSummary& ded, const SharedPoolConfig& pool,
                      const BlerModel& bler, const ArrivalDistribution& arrival,
                      int ref_symbols = 14, int ref_rbs = 1);

/// Arrival distribution derived from ded.p_arrival.
double composed_error(const DedicatedCgSummary& ded, const SharedPoolConfig& pool,
                      const BlerModel& bler);

/// Smallest k_plus in [1, k_max] meeting the error target, by linear scan.
/// Throws ModelViolation if composed_error is seen increasing along the scan.
std::optional<int> find_min_kplus(const DedicatedCgSummary& ded,
                                  const SharedPoolConfig& pool_template,
                                  const BlerModel& bler, double target,
                                  int k_max = 64);

/// Expected wait, in slots, from a continuous-uniform arrival to the next of
/// m equally offset period-p CG starts: p/(2m) when m divides p, otherwise an
/// exact enumeration over the floor-spaced offsets.
double mean_alignment_delay(int period_slots, int m_configs);

}  // namespace cgsim
