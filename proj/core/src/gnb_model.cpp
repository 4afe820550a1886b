#include "cgsim/gnb_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cgsim {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

Detection detect(const LinkModel& link, Rng& rng) {
  if (!rng.bernoulli(link.p_detect_energy)) return Detection::NOT_DETECTED;
  double u = rng.next_double();
  if (u < link.p_id_decode) return Detection::IDENTIFIED;
  if (u < link.p_id_decode + link.p_misdetect) return Detection::MISDETECTED;
  return Detection::UNKNOWN_DETECTION;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double bler(const BlerModel& model, double gamma_linear,
            std::span<const ReceivedSegment> segments) {
  if (segments.empty()) return 1.0;

  bool self_decodable = false;
  for (const auto& s : segments)
    self_decodable |= RvPattern::self_decodable(s.rv);
  if (!self_decodable) return 1.0;

  if (model.kind == BlerModel::Kind::BERNOULLI) {
    int attempts = 0;
    for (const auto& s : segments)
      attempts += RvPattern::self_decodable(s.rv) ? 1 : 0;
    return std::pow(model.epsilon, attempts);
  }

  // normal approximation; combining accumulates information-carrying REs
  double n = 0;
  for (const auto& s : segments) {
    int info_symbols = std::max(0, s.symbols - model.dmrs_overhead_symbols);
    n += static_cast<double>(info_symbols) * model.subcarriers_per_rb * s.rbs;
  }
  if (n <= 0) return 1.0;

  const double g = gamma_linear;
  const double log2e = 1.4426950408889634;  // log2(e)
  double capacity = std::log2(1.0 + g);
  double dispersion = (g * (g + 2.0)) / (2.0 * (g + 1.0) * (g + 1.0)) * log2e * log2e;
  double rate = static_cast<double>(model.payload_bits) / n;
  double arg = (capacity - rate) / std::sqrt(dispersion / n);
  return std::clamp(q_function(arg), 0.0, 1.0);
}

std::vector<std::size_t> resolve_collisions(std::size_t n_transmissions,
                                            bool shared_pool) {
  if (n_transmissions >= 2) {
    if (!shared_pool)
      throw std::logic_error("overlap on dedicated resources escaped validation");
    return {};  // destructive collision, no capture
  }
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < n_transmissions; ++i) survivors.push_back(i);
  return survivors;
}

std::optional<RvRotation> blind_rv_recovery(int detected_rv,
                                            int detected_occasion,
                                            const RvPattern& pattern) {
  if (!pattern.contains(detected_rv)) return std::nullopt;
  RvRotation rot;
  rot.anchor_occasion = detected_occasion;
  rot.pattern = pattern;
  for (int i = 0; i < 4; ++i) {
    if (pattern.rv_at(i) == detected_rv) {
      rot.anchor_pos = i;
      break;
    }
  }
  return rot;
}

std::vector<FeedbackMsg> emit_feedback(Profile profile,
                                       std::span<const ProcessOutcome> outcomes,
                                       const FeedbackPolicy& policy,
                                       SymbolTime now) {
  std::vector<FeedbackMsg> msgs;

  if (profile == Profile::NRU_R16) {
    // one CG-DFI per UE with a bit per process the gNB has seen
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& o = outcomes[i];
      if (o.detection == Detection::NOT_DETECTED ||
          o.detection == Detection::UNKNOWN_DETECTION)
        continue;
      FeedbackMsg* msg = nullptr;
      for (auto& m : msgs)
        if (m.kind == FeedbackMsg::Kind::CG_DFI && m.ue_id == o.ue_id) msg = &m;
      if (!msg) {
        FeedbackMsg m;
        m.kind = FeedbackMsg::Kind::CG_DFI;
        m.ue_id = o.ue_id;
        m.delivery_time = now + static_cast<SymbolTime>(policy.dfi_delay_slots) *
                                    kSymbolsPerSlot;
        m.dci.purpose = DciPurpose::CG_DFI;
        msgs.push_back(m);
        msg = &msgs.back();
      }
      msg->dfi_bits.emplace_back(o.harq_id, o.decoded);
    }
  } else {
    for (const auto& o : outcomes) {
      if (o.detection != Detection::IDENTIFIED || o.decoded) continue;
      FeedbackMsg m;
      m.kind = FeedbackMsg::Kind::RETX_DCI;
      m.ue_id = o.ue_id;
      m.delivery_time =
          now + static_cast<SymbolTime>(policy.feedback_delay_slots) * kSymbolsPerSlot;
      m.dci.purpose = DciPurpose::RETX_GRANT;
      m.dci.scrambling = Scrambling::CS_RNTI;
      m.dci.ndi = 1;
      m.dci.harq_field = o.harq_id;
      msgs.push_back(m);
    }
  }

  if (policy.common_nack) {
    for (const auto& o : outcomes) {
      if (o.detection != Detection::UNKNOWN_DETECTION) continue;
      FeedbackMsg m;
      m.kind = FeedbackMsg::Kind::COMMON_NACK;
      m.delivery_time =
          now + static_cast<SymbolTime>(policy.nack_delay_slots) * kSymbolsPerSlot;
      m.grid_end = o.occasion_end;
      m.grid_carrier = o.carrier_id;
      m.grid_rb_tag = o.rb_tag;
      msgs.push_back(m);
    }
  }
  return msgs;
}

}  // namespace cgsim
