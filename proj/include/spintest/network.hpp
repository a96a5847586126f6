#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spintest/error.hpp"
#include "spintest/tensor.hpp"

namespace spintest {

// Dropout realizations of the crossbar periphery: disable single bit-lines,
// disable contiguous groups of bit-lines, or scale selected bit-line sums.
enum class DropoutMethod { SpinDrop, SpatialSpinDrop, ScaleDrop };

// How dropout generators are wired: one per bit-line/group, one per layer,
// or a single generator shared by every layer.
enum class Sharing { PerColumn, LayerShared, GlobalShared };

// Numerical floor added to batch-norm variance.
inline constexpr double kBnEpsilon = 1e-5;

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  bool has_dropout = false;
  bool is_output = false;
};

/// One crossbar tile: binary weights (rows = word-lines/inputs,
/// cols = bit-lines/outputs) plus batch-norm parameters frozen after training.
struct Layer {
  BitMat weights;  // in_dim x out_dim
  RealVec bn_gamma, bn_beta, bn_mean, bn_var;
  bool has_dropout = false;
  bool is_output = false;

  int in_dim() const { return static_cast<int>(weights.rows()); }
  int out_dim() const { return static_cast<int>(weights.cols()); }
};

/// Binarized MLP mapped onto per-layer crossbars with a pluggable dropout
/// mechanism. Read-only during inference.
struct BinaryNetwork {
  std::vector<Layer> layers;
  DropoutMethod method = DropoutMethod::SpinDrop;
  double dropout_p = 0.25;
  int group_size = 4;       // SpatialSpinDrop only
  double scale_gamma = 0.5; // ScaleDrop only
  Sharing sharing = Sharing::PerColumn;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  std::size_t layer_count() const { return layers.size(); }

  std::size_t weight_cell_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.weights.size();
    return n;
  }

  /// Throws contract_error if any structural invariant is broken.
  void validate() const {
    if (layers.empty()) throw contract_error("BinaryNetwork: no layers");
    if (!(dropout_p > 0.0 && dropout_p < 1.0))
      throw contract_error("BinaryNetwork: dropout_p must be in (0,1)");
    if (group_size < 1) throw contract_error("BinaryNetwork: group_size must be positive");
    if (!(scale_gamma > 0.0 && scale_gamma <= 1.0))
      throw contract_error("BinaryNetwork: scale_gamma must be in (0,1]");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const Layer& l = layers[i];
      if (l.weights.rows() == 0 || l.weights.cols() == 0)
        throw contract_error("BinaryNetwork: empty weight matrix");
      if (!is_binary(l.weights.data()))
        throw contract_error("BinaryNetwork: weights must be -1/+1");
      const auto d = static_cast<std::size_t>(l.out_dim());
      if (l.bn_gamma.size() != d || l.bn_beta.size() != d || l.bn_mean.size() != d ||
          l.bn_var.size() != d)
        throw contract_error("BinaryNetwork: batch-norm parameter shape mismatch");
      for (double v : l.bn_var)
        if (!(v >= kBnEpsilon)) throw contract_error("BinaryNetwork: bn_var below floor");
      if (i + 1 < layers.size() && l.out_dim() != layers[i + 1].in_dim())
        throw contract_error("BinaryNetwork: layer dimension chain broken");
      if (l.is_output != (i + 1 == layers.size()))
        throw contract_error("BinaryNetwork: is_output flag misplaced");
      if (l.has_dropout && method == DropoutMethod::SpatialSpinDrop &&
          l.out_dim() % group_size != 0)
        throw contract_error("BinaryNetwork: group_size must divide out_dim");
      if (l.is_output && l.has_dropout)
        throw contract_error("BinaryNetwork: output layer must not carry dropout");
    }
  }
};

inline std::vector<LayerSpec> layer_specs_from_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw contract_error("layer_specs_from_dims: need >= 2 dims");
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] < 1 || dims[i + 1] < 1)
      throw contract_error("layer_specs_from_dims: dims must be positive");
    const bool output = (i + 2 == dims.size());
    specs.push_back({dims[i], dims[i + 1], !output, output});
  }
  return specs;
}

}  // namespace spintest
