#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "spintest/dropout.hpp"
#include "spintest/engine.hpp"
#include "spintest/error.hpp"
#include "spintest/fault_context.hpp"
#include "spintest/network.hpp"
#include "spintest/rng.hpp"

namespace spintest {

/// ceil(rate * n): any positive rate corrupts at least one cell.
inline std::size_t fault_cell_count(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n)));
}

/// k distinct indices from [0, n), ascending. Partial Fisher-Yates.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           RngStream& stream) {
  if (k > n) throw contract_error("sample_without_replacement: k > n");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + stream.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace detail {

inline Bit stuck_value(FaultKind kind) {
  // one logic-to-binary mapping everywhere: 0 -> -1, 1 -> +1
  return kind == FaultKind::StuckAt1 ? Bit{1} : Bit{-1};
}

inline void inject_weight_cells(const BinaryNetwork& net, const FaultSpec& spec,
                                FaultContext& ctx, RngStream& stream) {
  const std::size_t total = net.weight_cell_count();
  const std::size_t k = fault_cell_count(spec.rate, total);
  const auto cells = sample_without_replacement(total, k, stream);
  ctx.weight_overrides.assign(net.layers.size(), {});
  std::size_t base = 0, layer = 0;
  for (std::size_t cell : cells) {
    while (cell >= base + net.layers[layer].weights.size()) {
      base += net.layers[layer].weights.size();
      ++layer;
    }
    const std::size_t local = cell - base;
    const int row = static_cast<int>(local / net.layers[layer].weights.cols());
    const int col = static_cast<int>(local % net.layers[layer].weights.cols());
    Bit v;
    if (spec.kind == FaultKind::BitFlip)
      v = static_cast<Bit>(-net.layers[layer].weights(static_cast<std::size_t>(row),
                                                      static_cast<std::size_t>(col)));
    else
      v = stuck_value(spec.kind);
    ctx.weight_overrides[layer][{row, col}] = v;
  }
  ctx.faulted_weights.assign(net.layers.size(), std::nullopt);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (ctx.weight_overrides[l].empty()) continue;
    BitMat w = net.layers[l].weights;
    for (const auto& [rc, v] : ctx.weight_overrides[l])
      w(static_cast<std::size_t>(rc.first), static_cast<std::size_t>(rc.second)) = v;
    ctx.faulted_weights[l] = std::move(w);
  }
}

inline void inject_buffer_memory(const BinaryNetwork& net, const FaultSpec& spec,
                                 FaultContext& ctx, RngStream& stream) {
  ctx.buffer_plans.assign(net.layers.size(), {});
  if (spec.kind == FaultKind::BitFlip) {
    for (std::size_t l = 0; l + 1 < net.layers.size(); ++l)
      ctx.buffer_plans[l].flip_rate = spec.rate;
    return;
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l)
    total += static_cast<std::size_t>(net.layers[l].out_dim());
  const std::size_t k = fault_cell_count(spec.rate, total);
  const auto slots = sample_without_replacement(total, k, stream);
  std::size_t base = 0, layer = 0;
  for (std::size_t slot : slots) {
    while (slot >= base + static_cast<std::size_t>(net.layers[layer].out_dim())) {
      base += static_cast<std::size_t>(net.layers[layer].out_dim());
      ++layer;
    }
    ctx.buffer_plans[layer].stuck[static_cast<int>(slot - base)] = stuck_value(spec.kind);
  }
}

inline void inject_dropout_module(DropoutBank& bank, const FaultSpec& spec,
                                  RngStream& stream) {
  const std::size_t total = bank.generator_count();
  if (spec.kind == FaultKind::DropProbVariation) {
    for (std::size_t g = 0; g < total; ++g) {
      const double p = stream.gaussian(bank.base_p(), spec.sigma);
      bank.generator(g).p_effective = std::clamp(p, 0.0, 1.0);
    }
    return;
  }
  const std::size_t k = fault_cell_count(spec.rate, total);
  for (std::size_t g : sample_without_replacement(total, k, stream)) {
    DropoutGenerator& gen = bank.generator(g);
    switch (spec.kind) {
      case FaultKind::StuckAt0: gen.state = GeneratorState::StuckPass; break;
      case FaultKind::StuckAt1: gen.state = GeneratorState::StuckDrop; break;
      case FaultKind::BitFlip:
        gen.state = GeneratorState::BitFlip;
        gen.flip_rate = spec.rate;
        break;
      default: break;
    }
  }
}

}  // namespace detail

/// Materialize a fault specification: persistent weight/buffer corruption
/// goes into the returned FaultContext; dropout-module faults are applied
/// directly to the bank. spec.seed, when non-zero, replaces the stream.
inline FaultContext inject(const BinaryNetwork& net, DropoutBank& bank,
                           const FaultSpec& spec, RngStream stream) {
  spec.validate();
  if (spec.seed != 0) stream = RngStream(spec.seed);
  FaultContext ctx;
  switch (spec.location) {
    case FaultLocation::WeightCells:
      detail::inject_weight_cells(net, spec, ctx, stream);
      break;
    case FaultLocation::BufferMemory:
      detail::inject_buffer_memory(net, spec, ctx, stream);
      break;
    case FaultLocation::DropoutModule:
      detail::inject_dropout_module(bank, spec, stream);
      break;
    case FaultLocation::MacConductance: {
      MacVariation v;
      if (spec.kind == FaultKind::AdditiveGaussian)
        v.sigma_add = spec.sigma;
      else
        v.sigma_mul = spec.sigma;
      // Each injection is its own noise process: salt the per-pass noise
      // streams so repeated injections of the same sigma do not collapse to
      // one realization under common-random-number evaluation.
      if (spec.sigma > 0.0) v.noise_seed = stream.next_u64();
      ctx.mac_variation = v;
      break;
    }
  }
  return ctx;
}

/// Per-layer population std of fault-free, dropout-live MAC outputs over the
/// given inputs. Gives the additive variation model its per-layer scale.
inline RealVec calibrate_layer_std(const BinaryNetwork& net, const DropoutBank& bank,
                                   std::span<const BitVec> inputs, RngStream stream) {
  if (inputs.size() < 30) throw contract_error("calibrate_layer_std: need >= 30 inputs");
  std::vector<RealVec> samples(net.layers.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    RngStream si = stream.derive(i);
    const MaskSet masks = sample_masks(bank, net, si.derive(0));
    BitVec cur = inputs[i];
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const Layer& layer = net.layers[l];
      const RealVec y = crossbar_mac(layer.weights, cur, masks.layer_masks[l], net.method,
                                     net.scale_gamma);
      samples[l].insert(samples[l].end(), y.begin(), y.end());
      if (!layer.is_output) {
        BitVec a(y.size());
        for (std::size_t j = 0; j < y.size(); ++j)
          a[j] = sign_bit(layer.bn_gamma[j] * (y[j] - layer.bn_mean[j]) /
                              std::sqrt(layer.bn_var[j] + kBnEpsilon) +
                          layer.bn_beta[j]);
        cur = std::move(a);
      }
    }
  }
  RealVec stds(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    stds[l] = population_std(samples[l]);
    if (!(stds[l] > 0.0))
      throw numeric_error("calibrate_layer_std: degenerate (zero-variance) layer");
  }
  return stds;
}

}  // namespace spintest
