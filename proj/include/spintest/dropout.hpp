#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spintest/error.hpp"
#include "spintest/network.hpp"
#include "spintest/rng.hpp"

namespace spintest {

enum class GeneratorState { Healthy, StuckDrop, StuckPass, BitFlip };

/// One stochastic bit generator of the dropout module (abstracted MTJ
/// SET/read/RESET loop as a Bernoulli source).
struct DropoutGenerator {
  double p_effective = 0.0;
  GeneratorState state = GeneratorState::Healthy;
  double flip_rate = 0.0;  // BitFlip only
};

/// Per-layer drop decisions for one forward pass. mask bit 1 means the
/// bit-line is disabled (SpinDrop/SpatialSpinDrop) or its sum is scaled
/// (ScaleDrop). The output layer mask is always all-zero.
struct MaskSet {
  std::vector<std::vector<std::uint8_t>> layer_masks;
};

/// The bank of dropout generators wired to a network. Generator layout
/// depends on the sharing scope:
///   PerColumn    - one generator per bit-line (SpinDrop/ScaleDrop) or per
///                  contiguous group of group_size bit-lines (SpatialSpinDrop)
///   LayerShared  - one generator per dropout-bearing layer
///   GlobalShared - a single generator for the whole network
/// Fault state mutations go through fault-models inject(); inference treats
/// the bank as read-only.
class DropoutBank {
 public:
  DropoutBank() = default;

  explicit DropoutBank(const BinaryNetwork& net)
      : sharing_(net.sharing), method_(net.method), group_size_(net.group_size),
        base_p_(net.dropout_p) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      if (!net.layers[l].has_dropout) continue;
      dropout_layers_.push_back(static_cast<int>(l));
      layer_out_dims_.push_back(net.layers[l].out_dim());
    }
    if (sharing_ == Sharing::GlobalShared) {
      gens_.resize(dropout_layers_.empty() ? 0 : 1);
      if (!gens_.empty()) gens_[0].resize(1);
    } else {
      gens_.resize(dropout_layers_.size());
      for (std::size_t h = 0; h < gens_.size(); ++h) {
        std::size_t count = 1;
        if (sharing_ == Sharing::PerColumn) {
          count = static_cast<std::size_t>(layer_out_dims_[h]);
          if (method_ == DropoutMethod::SpatialSpinDrop)
            count = static_cast<std::size_t>(layer_out_dims_[h] / group_size_);
        }
        gens_[h].resize(count);
      }
    }
    reset();
  }

  /// All generators back to Healthy at the configured dropout probability.
  void reset() {
    for (auto& layer : gens_)
      for (auto& g : layer) g = DropoutGenerator{base_p_, GeneratorState::Healthy, 0.0};
  }

  std::size_t generator_count() const {
    std::size_t n = 0;
    for (const auto& layer : gens_) n += layer.size();
    return n;
  }

  DropoutGenerator& generator(std::size_t flat) {
    for (auto& layer : gens_) {
      if (flat < layer.size()) return layer[flat];
      flat -= layer.size();
    }
    throw contract_error("DropoutBank: generator index out of range");
  }
  const DropoutGenerator& generator(std::size_t flat) const {
    return const_cast<DropoutBank*>(this)->generator(flat);
  }

  std::vector<std::vector<DropoutGenerator>>& generators() { return gens_; }
  const std::vector<std::vector<DropoutGenerator>>& generators() const { return gens_; }

  Sharing sharing() const { return sharing_; }
  DropoutMethod method() const { return method_; }
  double base_p() const { return base_p_; }
  const std::vector<int>& dropout_layers() const { return dropout_layers_; }

  bool consistent_with(const BinaryNetwork& net) const {
    std::vector<int> expect_layers;
    std::vector<int> expect_dims;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      if (!net.layers[l].has_dropout) continue;
      expect_layers.push_back(static_cast<int>(l));
      expect_dims.push_back(net.layers[l].out_dim());
    }
    if (expect_layers != dropout_layers_ || expect_dims != layer_out_dims_) return false;
    if (sharing_ != net.sharing || method_ != net.method) return false;
    if (sharing_ == Sharing::GlobalShared)
      return gens_.size() == (dropout_layers_.empty() ? 0u : 1u);
    return gens_.size() == dropout_layers_.size();
  }

  friend MaskSet sample_masks(const DropoutBank& bank, const BinaryNetwork& net,
                              RngStream stream);

 private:
  static int fire(const DropoutGenerator& g, RngStream& s) {
    switch (g.state) {
      case GeneratorState::StuckDrop: return 1;
      case GeneratorState::StuckPass: return 0;
      case GeneratorState::BitFlip: {
        int b = s.bernoulli(g.p_effective) ? 1 : 0;
        if (s.bernoulli(g.flip_rate)) b = 1 - b;
        return b;
      }
      case GeneratorState::Healthy: break;
    }
    return s.bernoulli(g.p_effective) ? 1 : 0;
  }

  Sharing sharing_ = Sharing::PerColumn;
  DropoutMethod method_ = DropoutMethod::SpinDrop;
  int group_size_ = 4;
  double base_p_ = 0.25;
  std::vector<int> dropout_layers_;   // indices into net.layers
  std::vector<int> layer_out_dims_;
  std::vector<std::vector<DropoutGenerator>> gens_;
};

/// Draw one MaskSet. Faulted generators behave per their state; the mask bit
/// is replicated over the generator's scope (group, layer, or network).
inline MaskSet sample_masks(const DropoutBank& bank, const BinaryNetwork& net,
                            RngStream stream) {
  if (!bank.consistent_with(net))
    throw contract_error("sample_masks: bank does not match network");
  MaskSet ms;
  ms.layer_masks.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    ms.layer_masks[l].assign(static_cast<std::size_t>(net.layers[l].out_dim()), 0);

  const auto& gens = bank.generators();
  if (bank.sharing_ == Sharing::GlobalShared) {
    if (gens.empty()) return ms;
    const int bit = DropoutBank::fire(gens[0][0], stream);
    if (bit)
      for (int l : bank.dropout_layers_)
        ms.layer_masks[static_cast<std::size_t>(l)].assign(
            ms.layer_masks[static_cast<std::size_t>(l)].size(), 1);
    return ms;
  }

  for (std::size_t h = 0; h < bank.dropout_layers_.size(); ++h) {
    auto& mask = ms.layer_masks[static_cast<std::size_t>(bank.dropout_layers_[h])];
    RngStream ls = stream.derive(h);
    if (bank.sharing_ == Sharing::LayerShared) {
      const int bit = DropoutBank::fire(gens[h][0], ls);
      if (bit) mask.assign(mask.size(), 1);
      continue;
    }
    // PerColumn
    if (bank.method_ == DropoutMethod::SpatialSpinDrop) {
      const std::size_t gs = static_cast<std::size_t>(bank.group_size_);
      for (std::size_t g = 0; g < gens[h].size(); ++g) {
        const int bit = DropoutBank::fire(gens[h][g], ls);
        if (bit)
          for (std::size_t j = g * gs; j < (g + 1) * gs; ++j) mask[j] = 1;
      }
    } else {
      for (std::size_t j = 0; j < gens[h].size(); ++j)
        mask[j] = static_cast<std::uint8_t>(DropoutBank::fire(gens[h][j], ls));
    }
  }
  return ms;
}

}  // namespace spintest
