#include "ntlab/variant.hpp"

namespace ntlab {

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::base: return "base";
    case Variant::gate: return "gate";
    case Variant::gate_only: return "gate_only";
    case Variant::label_only: return "label_only";
    case Variant::joint_only: return "joint_only";
    case Variant::marginal_only: return "marginal_only";
    case Variant::none_match: return "none_match";
    case Variant::oracle: return "oracle";
    case Variant::target_only: return "target_only";
    case Variant::source_ignoring_stub: return "source_ignoring_stub";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) noexcept {
  for (Variant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

Wiring wiring_for(Variant v) noexcept {
  const AdvTerms marginal = AdvTerms::marginal(), augmented = AdvTerms::augmented();
  switch (v) {
    case Variant::base:
    case Variant::target_only:
    case Variant::source_ignoring_stub:
      return {false, marginal, marginal, false};
    case Variant::oracle:
      return {false, marginal, marginal, true};
    case Variant::gate:
      return {true, augmented, augmented, false};
    case Variant::gate_only:
      return {true, marginal, marginal, false};
    case Variant::label_only:
      return {false, augmented, augmented, false};
    case Variant::joint_only:
      return {true, augmented, AdvTerms::joint(), false};
    case Variant::marginal_only:
      return {true, augmented, marginal, false};
    case Variant::none_match:
      return {true, augmented, AdvTerms::none(), false};
  }
  return {};
}

}  // namespace ntlab
