#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cgsim/time_grid.hpp"

namespace cgsim {

enum class Profile { NR_R15, NR_R16, NRU_R16 };

std::string_view profile_name(Profile p);
std::optional<Profile> parse_profile(std::string_view s);

enum class StartRule { FIRST_TO, FIRST_OR_RV0_TO, ANY_TO };

/// Feature gates, one struct per conformance row set. Row names used in
/// validation messages: max_configurations, activation_release_dci,
/// group_release, repetition, phy_priority, ack_feedback,
/// autonomous_transmission, cg_uci, dfi, transmission_beginning,
/// harq_id_determination, rv_pattern_determination, autonomous_retransmission,
/// harq_processes_per_period.
struct ProfileGates {
  int max_configurations;
  bool dci_format_0_2;
  bool group_release;
  bool type_b_repetition;
  bool type_b_cross_slot;
  bool phy_priority;
  bool explicit_ack;
  bool autonomous_tx;
  bool cg_uci;
  bool dfi;
  StartRule start_rule;
  bool ue_chooses_harq_id;
  bool ue_selects_rv_pattern;
  bool autonomous_retx;
  bool multi_harq_per_period;
};

const ProfileGates& gates(Profile p);

/// RV sequence cycled over occasions. Self-decodable RVs are 0 and 3;
/// rv0_spacing is the distance between consecutive RV0 occasions.
class RvPattern {
 public:
  static RvPattern rv0000() { return RvPattern({0, 0, 0, 0}, 1); }
  static RvPattern rv0303() { return RvPattern({0, 3, 0, 3}, 2); }
  static RvPattern rv0231() { return RvPattern({0, 2, 3, 1}, 4); }
  static std::optional<RvPattern> parse(std::string_view s);  // "0000" "0303" "0231"

  int rv_at(int occasion_index) const { return seq_[occasion_index & 3]; }
  int rv0_spacing() const { return spacing_; }
  const std::array<int, 4>& sequence() const { return seq_; }
  std::string to_string() const;

  static bool self_decodable(int rv) { return rv == 0 || rv == 3; }
  bool contains(int rv) const;

  friend bool operator==(const RvPattern&, const RvPattern&) = default;

 private:
  RvPattern(std::array<int, 4> seq, int spacing) : seq_(seq), spacing_(spacing) {}
  std::array<int, 4> seq_;
  int spacing_;
};

enum class CgType { TYPE1, TYPE2 };
enum class RepetitionType { A, B };
enum class PhyPriority { LOW, HIGH };

/// Frequency allocation resolved to an RB index set; only overlap detection
/// consumes it.
struct Fdra {
  enum class Type { T0_BITMAP, T1_CONTIGUOUS, T2_INTERLACE };
  Type type = Type::T1_CONTIGUOUS;
  std::string rbg_bitmap;  // T0: '1'/'0' per RBG
  int rbg_size = 4;        // T0
  int start_rb = 0;        // T1
  int length_rb = 1;       // T1
  int interlace = 0;       // T2, rb = interlace + 10*k
  std::vector<int> resolve(int bandwidth_rbs) const;
};

/// One configured grant. Field semantics follow ConfiguredGrantConfig:
/// offset_slots plays timeDomainOffset, starting_from_rv0 plays
/// startingFromRV0-r16, nru_tos_per_slot / nru_slots play
/// cg-nrofPUSCH-InSlot-r16 / cg-nrofSlots-r16.
struct CgConfig {
  int cg_id = 0;  // 0..11
  CgType cg_type = CgType::TYPE1;
  int carrier_id = 0;
  int period_slots = 1;
  int offset_slots = 0;
  SymbolSpan sliv;            // slot field unused; S/L template
  RepetitionType repetition_type = RepetitionType::A;
  int k_repetitions = 1;
  RvPattern rv_pattern = RvPattern::rv0000();
  bool starting_from_rv0 = false;
  PhyPriority phy_priority = PhyPriority::LOW;
  int gap_slots = 0;            // time-gap enhancement, 0 = standard
  bool flexible_start = false;  // flexible-repetition enhancement
  Fdra fdra;
  int nru_tos_per_slot = 1;
  int nru_slots = 1;
  int cg_retx_timer_tos = 0;  // cgRetransmissionTimer, counted in TOs
  int cg_timer_slots = 0;     // configuredGrantTimer, counted in slots

  int nru_tos_per_period() const { return nru_tos_per_slot * nru_slots; }
};

enum class DciFormat { F0_0, F0_1, F0_2 };
enum class DciPurpose { ACTIVATE, RELEASE, RETX_GRANT, CG_DFI };
enum class Scrambling { CS_RNTI, C_RNTI };

struct DciMessage {
  Scrambling scrambling = Scrambling::CS_RNTI;
  int ndi = 0;
  int harq_field = 0;
  int rv_field = 0;
  int dfi_field = 0;
  DciFormat format = DciFormat::F0_0;
  int tdra_row = 0;
  int fdra_field = 0;
  int priority_bit = 0;
  DciPurpose purpose = DciPurpose::ACTIVATE;
};

struct ActivationResult {
  bool valid = false;
  std::optional<int> target_cg;
};

/// Activation DCI validation: CS-RNTI scrambling with NDI, RV and DFI fields
/// zero; the HARQ field must be zero unless multiple CGs are configured, in
/// which case it addresses the target CG ID. Format 0-2 is Release 16 only.
ActivationResult validate_activation(const DciMessage& dci, Profile profile,
                                     bool multi_cg);

struct ReleaseResult {
  bool valid = false;
  std::string violated_row;  // "group_release" when rejected by gating
};

/// Single-CG release is always valid; releasing a group needs NR_R16.
ReleaseResult validate_release(const DciMessage& dci, Profile profile,
                               const std::set<int>& targets);

/// One pre-assigned opportunity inside a period. `segments` carries the
/// transmittable symbol runs (Type B occasions may hold several).
struct Occasion {
  int cg_id = 0;
  std::int64_t period_index = 0;
  int index_in_period = 0;
  int rv_default = 0;
  std::vector<Segment> segments;

  SymbolTime start_sym() const { return segments.front().span.first_sym(); }
  SymbolTime end_sym() const { return segments.back().span.end_sym(); }
};

/// TO layout of `cfg` over `window_slots` slots starting at `window_start`.
/// Type A expands with the configured gap, Type B segments (cross-slot only
/// under NR_R16), NR-U tiles nru_tos_per_slot * nru_slots mini-slot TOs.
/// Dropped occasions keep their nominal index out of the emitted list, so RV
/// labels stay period-anchored.
std::vector<Occasion> enumerate_occasions(const CgConfig& cfg, Profile profile,
                                          const TddPattern& tdd,
                                          std::int64_t window_start_slot,
                                          std::int64_t window_slots);

/// Layout with the complementary-carrier enhancement: nominal repetitions the
/// primary TDD pattern would drop or truncate move whole to the secondary
/// carrier, so every period carries its full K repetitions.
std::vector<Occasion> enumerate_occasions_complementary(
    const CgConfig& cfg, Profile profile, const TddPattern& primary_tdd,
    int secondary_carrier, std::int64_t window_start_slot,
    std::int64_t window_slots);

/// Occasion indices where a new transmission may begin.
std::vector<int> allowed_start_indices(const CgConfig& cfg, Profile profile);

/// RV label for occasion i when the transmission started at occasion b0:
/// flexible start re-anchors the pattern to b0, legacy anchors to the period.
int rv_for_start(const CgConfig& cfg, int start_index, int occasion_index);

/// Occasions the UE gets when arriving at 1-based occasion b with RV0 spacing
/// a: K - ceil((b-1)/a)*a, clamped at 0. b beyond the period yields 0.
int occasions_available_legacy(int K, int a, int b);

/// Flexible-start count: K - b + 1 (0 when the arrival missed the period).
int occasions_available_flexible(int K, int b);

/// 0-based start occasion for a 1-based arrival occasion under the legacy
/// nearest-RV0 rule (no K >= 8 clamp; see allowed_start_indices for that).
int legacy_start_occasion(const RvPattern& pattern, int arrival_b);

enum class CgActivationState { CONFIGURED_INACTIVE, ACTIVE, RELEASED };

/// Per-CG activation state machine. Type 1 CGs activate on configuration,
/// Type 2 CGs on a validated activation DCI. (De)activations set
/// pending_confirmation until the MAC CE confirm is applied. Activating an
/// ACTIVE CG and releasing a RELEASED one are no-ops.
class CgStateMachine {
 public:
  void configure(const CgConfig& cfg);
  bool apply_activation(int cg_id, const DciMessage& dci, Profile profile,
                        bool multi_cg);
  bool apply_release(const DciMessage& dci, Profile profile,
                     const std::set<int>& targets);
  void confirm(int cg_id);  // MAC CE confirmation

  CgActivationState state(int cg_id) const;
  bool pending_confirmation(int cg_id) const;
  bool any_active() const;

 private:
  struct Entry {
    CgActivationState state = CgActivationState::CONFIGURED_INACTIVE;
    bool pending_confirmation = false;
  };
  const Entry& at(int cg_id) const;
  std::vector<std::pair<int, Entry>> entries_;
};

}  // namespace cgsim
