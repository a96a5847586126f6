#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "spintest/dropout.hpp"
#include "spintest/error.hpp"
#include "spintest/fault_context.hpp"
#include "spintest/network.hpp"
#include "spintest/rng.hpp"
#include "spintest/tensor.hpp"

namespace spintest {

/// Max-subtracted exponential normalization. Output sums to 1, entries > 0.
inline RealVec softmax(const RealVec& logits) {
  if (logits.empty()) throw contract_error("softmax: empty logits");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  RealVec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

/// Bit-line currents for one crossbar: column j is the signed sum of the
/// inputs gated by column j's weights. A dropped column reads 0
/// (SpinDrop/SpatialSpinDrop); a selected column is scaled by scale_gamma
/// (ScaleDrop). mac_fault, when present, perturbs every column afterwards.
inline RealVec crossbar_mac(const BitMat& weights, const BitVec& input,
                            std::span<const std::uint8_t> drop_mask,
                            DropoutMethod method, double scale_gamma,
                            const MacVariation* mac_fault = nullptr,
                            double calibration_std = 0.0,
                            RngStream* noise = nullptr) {
  const std::size_t rows = weights.rows();
  const std::size_t cols = weights.cols();
  if (input.size() != rows) throw contract_error("crossbar_mac: input length != rows");
  if (!drop_mask.empty() && drop_mask.size() != cols)
    throw contract_error("crossbar_mac: mask length != cols");

  std::vector<int> acc(cols, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    const int xi = input[i];
    const Bit* w = weights.row(i).data();
    for (std::size_t j = 0; j < cols; ++j) acc[j] += xi * w[j];
  }

  RealVec y(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    if (!drop_mask.empty() && drop_mask[j])
      y[j] = method == DropoutMethod::ScaleDrop ? acc[j] * scale_gamma : 0.0;
    else
      y[j] = static_cast<double>(acc[j]);
  }

  if (mac_fault != nullptr) {
    if (noise == nullptr) throw contract_error("crossbar_mac: mac fault needs a stream");
    y = perturb_mac(y, *mac_fault, calibration_std, *noise);
  }
  return y;
}

struct LayerForwardResult {
  RealVec z;          // post batch-norm
  BitVec activation;  // empty for the output layer
};

/// MAC -> batch normalization -> binarization (hidden layers) or logits
/// (output layer). Buffer faults corrupt the binarized activation.
inline LayerForwardResult layer_forward(const Layer& layer, const BitVec& input,
                                        std::span<const std::uint8_t> mask,
                                        DropoutMethod method, double scale_gamma,
                                        const MacVariation* mac_fault = nullptr,
                                        double calibration_std = 0.0,
                                        RngStream* mac_noise = nullptr,
                                        const BufferPlan* buf_fault = nullptr,
                                        RngStream* buf_noise = nullptr,
                                        const BitMat* weights_override = nullptr) {
  const BitMat& w = weights_override ? *weights_override : layer.weights;
  LayerForwardResult r;
  r.z = crossbar_mac(w, input, mask, method, scale_gamma, mac_fault, calibration_std,
                     mac_noise);
  for (std::size_t j = 0; j < r.z.size(); ++j)
    r.z[j] = layer.bn_gamma[j] * (r.z[j] - layer.bn_mean[j]) /
                 std::sqrt(layer.bn_var[j] + kBnEpsilon) +
             layer.bn_beta[j];
  if (!layer.is_output) {
    r.activation.resize(r.z.size());
    for (std::size_t j = 0; j < r.z.size(); ++j) r.activation[j] = sign_bit(r.z[j]);
    if (buf_fault != nullptr) {
      if (buf_noise == nullptr) throw contract_error("layer_forward: buffer fault needs a stream");
      r.activation = apply_buffer_faults(r.activation, *buf_fault, *buf_noise);
    }
  }
  return r;
}

/// One stochastic forward pass under the given masks and fault context.
/// Per-pass randomness (buffer flips, MAC noise) is drawn from streams
/// derived per layer, so the pass is reproducible from (stream, masks, ctx).
inline RealVec forward(const BinaryNetwork& net, const BitVec& x, const MaskSet& masks,
                       const FaultContext& ctx, RngStream stream) {
  if (net.layers.empty()) throw contract_error("forward: empty network");
  if (static_cast<int>(x.size()) != net.input_dim())
    throw contract_error("forward: input dimension mismatch");
  if (masks.layer_masks.size() != net.layers.size())
    throw contract_error("forward: mask set does not match network");

  const MacVariation* mv = ctx.mac_variation ? &*ctx.mac_variation : nullptr;
  BitVec cur = x;
  RealVec logits;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    double calib = 0.0;
    RngStream mac_s, buf_s;
    RngStream* mac_noise = nullptr;
    RngStream* buf_noise = nullptr;
    if (mv != nullptr) {
      if (mv->sigma_add > 0.0) {
        if (l >= ctx.mac_calibration.size())
          throw contract_error("forward: missing MAC calibration for additive variation");
        calib = ctx.mac_calibration[l];
      }
      mac_s = stream.derive(l).derive(0);
      if (mv->noise_seed != 0) mac_s = mac_s.derive(mv->noise_seed);
      mac_noise = &mac_s;
    }
    const BufferPlan* plan = ctx.buffer_plan(l);
    if (plan != nullptr) {
      buf_s = stream.derive(l).derive(1);
      buf_noise = &buf_s;
    }
    auto r = layer_forward(layer, cur, masks.layer_masks[l], net.method, net.scale_gamma,
                           mv, calib, mac_noise, plan, buf_noise, ctx.weights_override(l));
    if (layer.is_output)
      logits = std::move(r.z);
    else
      cur = std::move(r.activation);
  }
  return logits;
}

}  // namespace spintest
