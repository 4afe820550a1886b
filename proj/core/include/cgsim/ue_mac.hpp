#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cgsim/cg_core.hpp"
#include "cgsim/rng.hpp"
#include "cgsim/time_grid.hpp"

namespace cgsim {

struct Packet {
  std::int64_t id = 0;
  SymbolTime arrival_symbol = 0;   // first symbol usable for transmission
  double arrival_instant = 0.0;    // exact arrival, sub-symbol, metrics only
  int size_bits = 0;
  SymbolTime deadline_symbols = 0;  // latency budget from arrival
  std::optional<SymbolTime> delivered_symbol;
};

struct TrafficModel {
  enum class Kind { DETERMINISTIC, UNIFORM_IN_PERIOD, JITTERED };
  Kind kind = Kind::DETERMINISTIC;
  int period_slots = 1;      // DETERMINISTIC / JITTERED
  int phase_slots = 0;       // DETERMINISTIC
  int n_slots = 1;           // UNIFORM_IN_PERIOD: slot uniform in 0..N-1
  double jitter_slots = 0.0; // JITTERED: uniform-continuous in [0, jitter)
  int payload_bits = 256;
};

/// Slot length of one arrival epoch.
std::int64_t traffic_epoch_slots(const TrafficModel& t);
/// Arrival instant of epoch n, in symbols (continuous for JITTERED).
double traffic_arrival_instant(const TrafficModel& t, std::int64_t epoch, Rng& rng);

enum class LbtMode { LBE, FBE };

struct LbtParams {
  LbtMode mode = LbtMode::LBE;
  double p_busy = 0.0;
  int backoff_window_symbols = 4;  // LBE backoff upper bound W
  int ffp_slots = 10;              // FBE fixed frame period
};

struct LbtOutcome {
  bool proceed = true;
  int delay_symbols = 0;  // LBE backoff consumed from the TO
};

/// Load-based gate at a TO start: idle channel proceeds at once; a busy draw
/// costs a uniform backoff in [1, W] symbols and one retry, which must leave
/// at least one TO symbol and find the channel idle.
LbtOutcome lbt_gate_lbe(const LbtParams& lbt, int to_length_symbols, Rng& rng);

/// FBE frame index of a symbol time.
std::int64_t ffp_index(SymbolTime t, int ffp_slots);

struct GrantRef {
  bool is_dynamic = false;
  int cg_id = -1;
  PhyPriority priority = PhyPriority::LOW;
  SymbolTime start = 0;
  bool nru_autonomous_retx = false;
};

struct OverlapDecision {
  std::size_t winner = 0;
  std::vector<std::size_t> cancelled;
};

/// Single-TB overlap rule. NR_R15: a dynamic grant always beats a CG.
/// NR_R16: higher PHY priority wins; equal priorities collapse onto the
/// dynamic grant when present, otherwise the earliest-starting CG. NR-U
/// autonomous retransmissions carry implicit high priority and are never
/// cancelled in favor of anything else.
OverlapDecision resolve_overlap(Profile profile, std::span<const GrantRef> grants);

struct SharedPoolPlan {
  bool postponed = false;           // arrival missed every dedicated TO
  std::vector<int> occasion_choices;  // pool occasion per upcoming slot
};

/// Remaining-repetition fallback: X of K repetitions went out on the
/// dedicated CG; the other K - X each pick a uniform occasion out of k_plus
/// in consecutive upcoming slots. X = 0 postpones the whole transmission to
/// the next dedicated period instead.
SharedPoolPlan shared_pool_fallback(int K, int emitted_x, int k_plus, Rng& rng);

struct CgUci {
  int harq_id = 0;
  int rv = 0;
  int ndi = 0;
  bool cot_share = false;
};

struct GrantChoice {
  int cg_index = 0;  // index into the UE's cg list
  std::int64_t period_index = 0;
  int occasion_index = 0;  // nominal index in period
  SymbolTime start_sym = 0;
};

struct PlannedEmission {
  Occasion occasion;
  int rv = 0;
  int harq_id = 0;
  std::optional<CgUci> uci;
  bool retransmission = false;
};

struct TxPlan {
  int cg_index = 0;
  std::int64_t period_index = 0;
  int start_index = 0;
  int harq_id = 0;
  int nominal_k = 0;
  int occasions_available = 0;  // X, counted from the start rule
  std::vector<PlannedEmission> emissions;
};

struct HarqProcess {
  int harq_id = 0;
  int ndi = 0;
  int attempts = 0;
  int rv_cursor = 0;
  SymbolTime cgt_deadline = 0;
  std::int64_t retx_deadline_to = -1;  // cgRetransmissionTimer, in TO index
  enum class State { IDLE, AWAITING_FEEDBACK, RETRANSMITTING, DONE_ACK, DONE_FAILED };
  State state = State::IDLE;
  std::int64_t packet_id = -1;
  int cg_index = 0;
};

struct UeMacParams {
  int harq_pool_size = 16;
  int processing_margin_symbols = 0;
  bool attach_cg_uci = false;  // implied by NRU_R16
  std::optional<int> complementary_secondary_carrier;
};

/// UE-side MAC: grant selection over the active CG set, repetition
/// transmission under the profile's start rule, HARQ process state, and the
/// NR / NR-U feedback reactions. One instance is owned by one simulation
/// event loop; queries are const.
class UeMac {
 public:
  UeMac(int ue_id, Profile profile, std::vector<CgConfig> cgs,
        std::map<int, TddPattern> carrier_tdd, UeMacParams params);

  int ue_id() const { return ue_id_; }
  Profile profile() const { return profile_; }
  std::size_t cg_count() const { return cgs_.size(); }
  const CgConfig& cg(int idx) const { return cgs_[static_cast<std::size_t>(idx)].cfg; }
  CgStateMachine& states() { return states_; }

  /// Occasion layout of one period of one CG, absolute symbol times.
  const std::vector<Occasion>& occasions_in_period(int cg_index,
                                                   std::int64_t period) const;
  std::int64_t tos_per_period(int cg_index) const;
  /// Global TO index of a nominal occasion (NR-U timer arithmetic).
  std::int64_t to_index(int cg_index, std::int64_t period, int index_in_period) const;

  /// Earliest permitted start at or after `ready_instant` over all ACTIVE
  /// CGs; ties fall to the lower cg_id. Empty when no CG is active.
  std::optional<GrantChoice> select_grant(double ready_instant) const;

  /// Commits a packet to the chosen grant: plans the repetition emissions,
  /// assigns the HARQ process, advances the per-CG period cursor.
  TxPlan transmit_repetitions(const Packet& packet, const GrantChoice& choice);

  /// Plans an NR-U autonomous retransmission bundle, or an NR common-NACK /
  /// dynamic-grant retransmission re-bundle, for an existing process.
  TxPlan plan_retransmission(int harq_id, const GrantChoice& choice);

  /// NR-U timer walk at a TO boundary: marks CGT-expired processes failed and
  /// returns the processes whose retransmission timer has expired unACKed.
  std::vector<int> nru_feedback_step(std::int64_t now_to_index, SymbolTime now_sym);

  /// NR implicit-ACK walk: AWAITING processes past their configuredGrantTimer
  /// resolve to DONE_ACK.
  void nr_feedback_step(SymbolTime now_sym);

  void on_cg_dfi(std::span<const std::pair<int, bool>> bits, std::int64_t now_to_index);
  /// Retransmission DCI (CS-RNTI, ndi=1). ndi=0 falls through to activation
  /// validation and is not a retransmission grant.
  bool on_retx_dci(const DciMessage& dci);

  void record_emission_grid(int carrier, SymbolTime end, int rb_tag,
                            std::int64_t packet_id);
  /// Did this UE transmit on the flagged grid? Returns the packet to
  /// retransmit on its own CG when it did.
  std::optional<std::int64_t> handle_common_nack(int carrier, SymbolTime end,
                                                 int rb_tag) const;

  HarqProcess* process(int harq_id);
  const std::vector<HarqProcess>& processes() const { return harq_; }

 private:
  struct CgRuntime {
    CgConfig cfg;
    const TddPattern* tdd = nullptr;
    std::int64_t cache_cycle = 1;
    mutable std::map<std::int64_t, std::vector<Occasion>> layout_cache;
    std::int64_t next_free_period = 0;
    int bundles_in_period = 0;  // NR-U: multiple HARQ bundles per period
  };

  std::optional<GrantChoice> earliest_start(const CgRuntime& rt, int cg_index,
                                            double ready_instant) const;
  int assign_harq_id(std::int64_t period_index);
  HarqProcess& obtain_process(int harq_id);

  int ue_id_;
  Profile profile_;
  UeMacParams params_;
  std::vector<CgRuntime> cgs_;
  std::map<int, TddPattern> carrier_tdd_;
  CgStateMachine states_;
  std::vector<HarqProcess> harq_;
  std::map<std::tuple<int, SymbolTime, int>, std::int64_t> emission_grids_;
};

}  // namespace cgsim
