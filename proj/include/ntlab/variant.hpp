#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace ntlab {

enum class Variant {
  base,                  // DANN: plain classification + marginal adversarial
  gate,                  // gated classification + augmented adversarial
  gate_only,             // gated classification + marginal adversarial
  label_only,            // plain classification + augmented adversarial
  joint_only,            // gate, feature matching on the joint terms only
  marginal_only,         // gate, feature matching on the nil terms only
  none_match,            // gate, no feature matching
  oracle,                // base on the source with every perturbed example removed
  target_only,           // base with labeled target data in the source role
  source_ignoring_stub,  // target_only wiring whatever source is supplied
};

inline constexpr std::array<Variant, 10> kAllVariants = {
    Variant::base,       Variant::gate,          Variant::gate_only,  Variant::label_only,
    Variant::joint_only, Variant::marginal_only, Variant::none_match, Variant::oracle,
    Variant::target_only, Variant::source_ignoring_stub};

std::string_view to_string(Variant v) noexcept;
std::optional<Variant> parse_variant(std::string_view name) noexcept;

/// Which of the four adversarial terms take part. Order follows the
/// augmented adversarial loss: nil target, nil source, joint target, joint source.
struct AdvTerms {
  bool nil_target = true;
  bool nil_source = true;
  bool joint_target = false;
  bool joint_source = false;

  static AdvTerms marginal() { return {true, true, false, false}; }
  static AdvTerms augmented() { return {true, true, true, true}; }
  static AdvTerms joint() { return {false, false, true, true}; }
  static AdvTerms none() { return {false, false, false, false}; }
  bool any() const { return nil_target || nil_source || joint_target || joint_source; }
  AdvTerms operator&(const AdvTerms& o) const {
    return {nil_target && o.nil_target, nil_source && o.nil_source, joint_target && o.joint_target,
            joint_source && o.joint_source};
  }
  AdvTerms operator-(const AdvTerms& o) const {
    return {nil_target && !o.nil_target, nil_source && !o.nil_source, joint_target && !o.joint_target,
            joint_source && !o.joint_source};
  }
  bool operator==(const AdvTerms&) const = default;
};

struct Wiring {
  bool gated = false;         // omega-weighted source classification
  AdvTerms terms;             // adversarial terms the discriminator is trained on
  AdvTerms matched;           // subset of terms whose reversed gradient reaches F
  bool scale_source = false;  // lambda scales the plain source term (oracle)
};

Wiring wiring_for(Variant v) noexcept;

}  // namespace ntlab
