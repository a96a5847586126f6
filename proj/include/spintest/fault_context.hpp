#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spintest/error.hpp"
#include "spintest/network.hpp"
#include "spintest/rng.hpp"
#include "spintest/tensor.hpp"

namespace spintest {

enum class FaultLocation { WeightCells, BufferMemory, DropoutModule, MacConductance };

enum class FaultKind {
  StuckAt0,
  StuckAt1,
  BitFlip,
  AdditiveGaussian,
  MultiplicativeGaussian,
  DropProbVariation
};

/// Declarative description of what to corrupt, where, at what rate.
/// rate applies to stuck/flip kinds, sigma to the Gaussian kinds.
/// seed == 0 means "use the stream handed to inject()".
struct FaultSpec {
  FaultLocation location = FaultLocation::WeightCells;
  FaultKind kind = FaultKind::StuckAt0;
  double rate = 0.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    const bool stuck_or_flip =
        kind == FaultKind::StuckAt0 || kind == FaultKind::StuckAt1 || kind == FaultKind::BitFlip;
    switch (location) {
      case FaultLocation::WeightCells:
      case FaultLocation::BufferMemory:
        if (!stuck_or_flip)
          throw spec_error("FaultSpec: only stuck-at/bit-flip kinds are legal here");
        break;
      case FaultLocation::DropoutModule:
        if (!stuck_or_flip && kind != FaultKind::DropProbVariation)
          throw spec_error("FaultSpec: illegal kind for DropoutModule");
        break;
      case FaultLocation::MacConductance:
        if (kind != FaultKind::AdditiveGaussian && kind != FaultKind::MultiplicativeGaussian)
          throw spec_error("FaultSpec: MacConductance takes Gaussian kinds only");
        break;
    }
    if (stuck_or_flip && !(rate >= 0.0 && rate <= 1.0))
      throw spec_error("FaultSpec: rate must be in [0,1]");
    if (!stuck_or_flip && !(sigma >= 0.0))
      throw spec_error("FaultSpec: sigma must be >= 0");
  }
};

/// Buffer corruption plan for one layer's activation buffer. Stuck positions
/// are fixed per injection; bit-flips are resampled every pass and skip
/// stuck positions.
struct BufferPlan {
  std::map<int, Bit> stuck;
  double flip_rate = 0.0;

  bool empty() const { return stuck.empty() && flip_rate == 0.0; }
};

/// Gaussian MAC non-ideality. The noise itself is drawn per pass from the
/// forward stream; noise_seed (when non-zero) salts that stream so distinct
/// injections of the same sigma are distinct noise processes even when the
/// surrounding evaluation reuses common random numbers.
struct MacVariation {
  double sigma_add = 0.0;  // in units of the layer-calibrated MAC std
  double sigma_mul = 0.0;
  std::uint64_t noise_seed = 0;
};

/// Materialized corruption plan consumed by the forward pass. Weight
/// overrides are applied once at injection (persistent); dropout faults live
/// in the DropoutBank itself.
struct FaultContext {
  // cell (row, col) -> forced value, one map per layer
  std::vector<std::map<std::pair<int, int>, Bit>> weight_overrides;
  std::vector<std::optional<BitMat>> faulted_weights;  // materialized overrides
  std::vector<BufferPlan> buffer_plans;                // indexed by layer
  std::optional<MacVariation> mac_variation;
  RealVec mac_calibration;  // per-layer MAC std; required when sigma_add > 0

  bool clean() const {
    for (const auto& m : weight_overrides)
      if (!m.empty()) return false;
    for (const auto& p : buffer_plans)
      if (!p.empty()) return false;
    return !mac_variation.has_value();
  }

  /// Weights to use for the given layer, or nullptr when unfaulted.
  const BitMat* weights_override(std::size_t layer) const {
    if (layer < faulted_weights.size() && faulted_weights[layer].has_value())
      return &*faulted_weights[layer];
    return nullptr;
  }

  const BufferPlan* buffer_plan(std::size_t layer) const {
    if (layer < buffer_plans.size() && !buffer_plans[layer].empty())
      return &buffer_plans[layer];
    return nullptr;
  }
};

/// y'_j = y_j * (1 + eps_m) + eps_a * calibration_std, fresh noise per column.
inline RealVec perturb_mac(const RealVec& y, const MacVariation& v,
                           double layer_calibration_std, RngStream& stream) {
  if (v.sigma_add > 0.0 && !(layer_calibration_std > 0.0))
    throw contract_error("perturb_mac: calibration std required for additive variation");
  RealVec out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double eps_m = v.sigma_mul > 0.0 ? stream.gaussian(0.0, v.sigma_mul) : 0.0;
    const double eps_a = v.sigma_add > 0.0 ? stream.gaussian(0.0, v.sigma_add) : 0.0;
    out[j] = y[j] * (1.0 + eps_m) + eps_a * layer_calibration_std;
  }
  return out;
}

/// Stuck overrides first, then per-pass flips on the non-stuck positions.
inline BitVec apply_buffer_faults(const BitVec& a, const BufferPlan& plan, RngStream& stream) {
  BitVec out = a;
  for (const auto& [idx, val] : plan.stuck) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= out.size())
      throw contract_error("apply_buffer_faults: stuck index out of bounds");
    out[static_cast<std::size_t>(idx)] = val;
  }
  if (plan.flip_rate > 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (plan.stuck.count(static_cast<int>(i))) continue;
      if (stream.bernoulli(plan.flip_rate)) out[i] = static_cast<Bit>(-out[i]);
    }
  }
  return out;
}

}  // namespace spintest
