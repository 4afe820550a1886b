#include "cgsim/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cgsim/errors.hpp"

namespace cgsim {

double p_at_least_one_rep(int K, int N_slots, int T_gap) {
  if (K < 1 || T_gap < 0 || N_slots < 1)
    throw DomainError("p_at_least_one_rep: K >= 1, T >= 0, N >= 1 required");
  int span = T_gap * (K - 1) + K;
  if (span > N_slots)
    throw DomainError("p_at_least_one_rep: layout T(K-1)+K = " +
                      std::to_string(span) + " exceeds the period of " +
                      std::to_string(N_slots) + " slots");
  return static_cast<double>(span) / N_slots;
}

double p_unknown_detection(const LinkModel& link) {
  if (link.p_id_decode + link.p_misdetect > 1.0 + 1e-12)
    throw DomainError("p_unknown_detection: P_D + P_MD must be <= 1");
  return link.p_transmit * link.p_detect_energy *
         (1.0 - link.p_id_decode - link.p_misdetect);
}

double p_common_nack_recovery(const LinkModel& link) {
  return p_unknown_detection(link) * link.p_common_nack_decode *
         link.p_detect_energy * link.p_id_decode;
}

double p_shared_collision(const SharedPoolConfig& pool) {
  if (pool.k_plus < 1 || pool.n_ues < 1)
    throw DomainError("p_shared_collision: k_plus >= 1 and n_ues >= 1 required");
  double per_contender = pool.activity_q / pool.k_plus;
  return 1.0 - std::pow(1.0 - per_contender, pool.n_ues - 1);
}

ArrivalDistribution ArrivalDistribution::per_occasion(double p_arrival, int K) {
  if (p_arrival < 0.0 || p_arrival * K > 1.0 + 1e-12)
    throw DomainError("arrival distribution needs 0 <= K*P_a <= 1");
  ArrivalDistribution d;
  d.p_start.assign(static_cast<std::size_t>(K), p_arrival);
  d.p_miss = std::max(0.0, 1.0 - p_arrival * K);
  return d;
}

ArrivalDistribution ArrivalDistribution::deterministic(int K, int b) {
  if (b < 1 || b > K) throw DomainError("deterministic arrival needs 1 <= b <= K");
  ArrivalDistribution d;
  d.p_start.assign(static_cast<std::size_t>(K), 0.0);
  d.p_start[static_cast<std::size_t>(b - 1)] = 1.0;
  return d;
}

double per_attempt_error(const BlerModel& bler_model, double gamma, int symbols,
                         int rbs) {
  ReceivedSegment ref{symbols, rbs, 0};
  return bler(bler_model, gamma, std::span<const ReceivedSegment>(&ref, 1));
}

double composed_error(const DedicatedCgSummary& ded, const SharedPoolConfig& pool,
                      const BlerModel& bler_model,
                      const ArrivalDistribution& arrival, int ref_symbols,
                      int ref_rbs) {
  const int K = ded.k_repetitions;
  if (static_cast<int>(arrival.p_start.size()) != K)
    throw DomainError("arrival distribution size must equal K");

  const double eps = per_attempt_error(bler_model, ded.gamma, ref_symbols, ref_rbs);
  const double p_coll = p_shared_collision(pool);
  const double shared_fail = p_coll + (1.0 - p_coll) * eps;

  double p_ed = arrival.p_miss * std::pow(eps, K);
  double p_es = arrival.p_miss;  // postponed arrivals use no shared repetitions
  for (int b = 1; b <= K; ++b) {
    double pb = arrival.p_start[static_cast<std::size_t>(b - 1)];
    p_ed += pb * std::pow(eps, K - b + 1);
    p_es += pb * std::pow(shared_fail, b - 1);
  }
  return p_ed * p_es;
}

double composed_error(const DedicatedCgSummary& ded, const SharedPoolConfig& pool,
                      const BlerModel& bler_model) {
  return composed_error(ded, pool, bler_model,
                        ArrivalDistribution::per_occasion(ded.p_arrival,
                                                          ded.k_repetitions));
}

std::optional<int> find_min_kplus(const DedicatedCgSummary& ded,
                                  const SharedPoolConfig& pool_template,
                                  const BlerModel& bler, double target,
                                  int k_max) {
  double prev = 2.0;
  for (int k = 1; k <= k_max; ++k) {
    SharedPoolConfig pool = pool_template;
    pool.k_plus = k;
    double e = composed_error(ded, pool, bler);
    if (e > prev + 1e-12)
      throw ModelViolation("composed_error increased from k_plus=" +
                           std::to_string(k - 1) + " to " + std::to_string(k));
    prev = e;
    if (e <= target) return k;
  }
  return std::nullopt;
}

double mean_alignment_delay(int period_slots, int m_configs) {
  if (m_configs < 1 || period_slots < 1)
    throw DomainError("mean_alignment_delay: p >= 1 and m >= 1 required");
  if (period_slots % m_configs == 0)
    return static_cast<double>(period_slots) / (2.0 * m_configs);

  // floor-spaced offsets; E[wait] = sum(gap^2) / (2p) over the start gaps
  std::vector<int> offsets;
  for (int j = 0; j < m_configs; ++j)
    offsets.push_back(static_cast<int>(
        static_cast<std::int64_t>(j) * period_slots / m_configs));
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

  double sum_sq = 0.0;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    int next = (i + 1 < offsets.size()) ? offsets[i + 1] : offsets[0] + period_slots;
    double gap = next - offsets[i];
    sum_sq += gap * gap;
  }
  return sum_sq / (2.0 * period_slots);
}

}  // namespace cgsim
