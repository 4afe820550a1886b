#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgsim/cg_core.hpp"
#include "cgsim/rng.hpp"

namespace cgsim {

/// Detection / decoding probabilities of one UE's link. gamma is linear SINR.
struct LinkModel {
  double snr_gamma = 1.0;
  double p_detect_energy = 1.0;       // P_E
  double p_id_decode = 1.0;           // P_D
  double p_misdetect = 0.0;           // P_MD, requires P_D + P_MD <= 1
  double p_common_nack_decode = 1.0;  // P_CN, UE-side broadcast decode
  double p_transmit = 1.0;            // P_T, analytical use only
};

double db_to_linear(double db);

struct BlerModel {
  enum class Kind { BERNOULLI, FINITE_BLOCKLENGTH };
  Kind kind = Kind::BERNOULLI;
  double epsilon = 0.0;  // BERNOULLI per-attempt error
  int dmrs_overhead_symbols = 1;
  int subcarriers_per_rb = 12;
  int payload_bits = 256;
};

enum class Detection : std::uint8_t {
  NOT_DETECTED,
  IDENTIFIED,
  MISDETECTED,
  UNKNOWN_DETECTION,
};

/// Four-way outcome draw: 1-P_E / P_E*P_D / P_E*P_MD / P_E*(1-P_D-P_MD).
Detection detect(const LinkModel& link, Rng& rng);

/// One received slice as the decoder sees it.
struct ReceivedSegment {
  int symbols = 0;
  int rbs = 1;
  int rv = 0;
};

/// Gaussian tail probability Q(x), via erfc.
double q_function(double x);

/// Residual error probability after combining `segments`.
/// BERNOULLI: each self-decodable attempt fails independently with epsilon,
/// so the block fails with epsilon^(self-decodable attempts). FINITE_BLOCKLENGTH:
/// normal approximation Q((C - B/n) / sqrt(V/n)) on the accumulated
/// information-carrying resource elements, each segment paying its own DMRS
/// overhead. No self-decodable RV present, or n <= 0, means error 1.
double bler(const BlerModel& model, double gamma_linear,
            std::span<const ReceivedSegment> segments);

/// Shared-pool contention: an occasion holding two or more transmissions
/// destroys all of them. Overlap on dedicated resources is a configuration
/// error caught at scenario load; hitting it here is a logic fault.
std::vector<std::size_t> resolve_collisions(std::size_t n_transmissions,
                                            bool shared_pool);

/// Pattern rotation inferred from one blind-decoded repetition: occasion j's
/// label is pattern[(j - anchor_occasion + anchor_pos) mod 4]. Fails when the
/// hypothesized RV never occurs in the pattern.
struct RvRotation {
  int anchor_occasion = 0;
  int anchor_pos = 0;
  RvPattern pattern = RvPattern::rv0000();

  int label(int occasion_index) const {
    return pattern.rv_at(occasion_index - anchor_occasion + anchor_pos);
  }
};

std::optional<RvRotation> blind_rv_recovery(int detected_rv,
                                            int detected_occasion,
                                            const RvPattern& pattern);

struct FeedbackPolicy {
  bool common_nack = false;
  int feedback_delay_slots = 1;  // retransmission DCI
  int dfi_delay_slots = 1;
  int nack_delay_slots = 1;
};

/// End-of-occasion receiver outcome for one transmission. rb_tag
/// disambiguates frequency-multiplexed occasions sharing a symbol span
/// (shared-pool cells, overlapping-CG grids).
struct ProcessOutcome {
  int ue_id = 0;
  int harq_id = 0;
  Detection detection = Detection::NOT_DETECTED;
  bool decoded = false;
  SymbolTime occasion_end = 0;
  int carrier_id = 0;
  int rb_tag = 0;
};

struct FeedbackMsg {
  enum class Kind { RETX_DCI, CG_DFI, COMMON_NACK };
  Kind kind = Kind::RETX_DCI;
  SymbolTime delivery_time = 0;
  int ue_id = 0;               // RETX_DCI / CG_DFI addressee
  DciMessage dci;              // RETX_DCI payload (ndi=1) or DFI container
  std::vector<std::pair<int, bool>> dfi_bits;  // CG_DFI: (harq_id, ack)
  SymbolTime grid_end = 0;     // COMMON_NACK grid reference
  int grid_carrier = 0;
  int grid_rb_tag = 0;
};

/// Feedback for one occasion's outcomes. NR profiles answer an identified but
/// undecoded transmission with a retransmission DCI (CS-RNTI, ndi=1); NR-U
/// emits a CG-DFI ACK bitmap over the processes it has detected; unknown
/// detections raise a common NACK broadcast when the policy enables it.
std::vector<FeedbackMsg> emit_feedback(Profile profile,
                                       std::span<const ProcessOutcome> outcomes,
                                       const FeedbackPolicy& policy,
                                       SymbolTime now);

}  // namespace cgsim
