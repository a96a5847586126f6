#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spintest/dataset.hpp"
#include "spintest/dropout.hpp"
#include "spintest/engine.hpp"
#include "spintest/error.hpp"
#include "spintest/inference.hpp"
#include "spintest/network.hpp"
#include "spintest/rng.hpp"
#include "spintest/tensor.hpp"

namespace spintest {

/// Dropout mechanism settings shared by a network and its generator bank.
struct MethodConfig {
  DropoutMethod method = DropoutMethod::SpinDrop;
  double dropout_p = 0.25;
  int group_size = 4;
  double scale_gamma = 0.5;
  Sharing sharing = Sharing::PerColumn;
};

struct TrainConfig {
  int epochs = 40;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1 || batch_size < 1)
      throw spec_error("TrainConfig: epochs and batch_size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw spec_error("TrainConfig: learning_rate must be finite and >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw spec_error("TrainConfig: momentum must be in [0,1)");
  }
};

/// Stream labels used inside train(); exposed so tests can reproduce the
/// initial latents (e.g. the learning_rate = 0 identity).
namespace train_labels {
inline constexpr std::uint64_t kInit = 0;
inline constexpr std::uint64_t kShuffle = 1;
inline constexpr std::uint64_t kMasks = 2;
inline constexpr std::uint64_t kFreeze = 3;
inline constexpr std::uint64_t kReport = 4;
}  // namespace train_labels

/// Real-valued training state behind a binarized network.
struct LatentState {
  std::vector<RealMat> weights;  // latent W_r, in x out, clipped to [-1,1]
  std::vector<RealVec> gamma, beta;
};

/// Latent weights ~ Uniform(-1,1), batch-norm scale 1 / shift 0.
inline LatentState init_latents(const std::vector<int>& layer_dims, RngStream stream) {
  const auto specs = layer_specs_from_dims(layer_dims);
  LatentState st;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    RngStream s = stream.derive(l);
    RealMat w(static_cast<std::size_t>(specs[l].in_dim),
              static_cast<std::size_t>(specs[l].out_dim));
    for (double& v : w.data()) v = 2.0 * s.uniform() - 1.0;
    st.weights.push_back(std::move(w));
    st.gamma.emplace_back(static_cast<std::size_t>(specs[l].out_dim), 1.0);
    st.beta.emplace_back(static_cast<std::size_t>(specs[l].out_dim), 0.0);
  }
  return st;
}

/// Fraction of samples whose argmax of the T-pass mean softmax matches the
/// label. T = 1 is allowed (plain single-pass accuracy); sample i draws its
/// passes from stream.derive(i).
inline double evaluate_accuracy(const BinaryNetwork& net,
                                const std::vector<BitVec>& inputs,
                                const std::vector<int>& labels, int t_passes,
                                const DropoutBank& bank, const FaultContext& ctx,
                                RngStream stream) {
  if (inputs.size() != labels.size())
    throw contract_error("evaluate_accuracy: inputs/labels length mismatch");
  if (inputs.empty()) throw contract_error("evaluate_accuracy: empty split");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const RealMat probs =
        sample_prob_matrix(net, inputs[i], t_passes, bank, ctx, stream.derive(i));
    RealVec mean(probs.cols(), 0.0);
    for (std::size_t t = 0; t < probs.rows(); ++t)
      for (std::size_t j = 0; j < probs.cols(); ++j) mean[j] += probs(t, j);
    for (double& v : mean) v /= static_cast<double>(probs.rows());
    if (argmax_lowest(mean) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(inputs.size());
}

/// Filled in by train() when requested.
struct TrainReport {
  double final_loss = 0.0;
  double bayes_eval_accuracy = 0.0;  // T = 20, healthy bank, clean context
  std::vector<double> epoch_losses;
};

namespace detail {

inline Bit binarize_latent(double v) { return sign_bit(v); }

}  // namespace detail

/// From-scratch training of a binarized MLP with dropout live during
/// training. Forward runs sign(W_r) through crossbar_mac with one fresh
/// MaskSet per batch; batch norm uses batch statistics; gradients flow
/// through the straight-through estimator (|W_r| <= 1 for weights,
/// |z| <= 1 for binarized activations); SGD with momentum; latents clipped
/// to [-1,1]. Batch-norm statistics are frozen layer-by-layer over the full
/// training split at the end (dropout still live, matching inference).
inline BinaryNetwork train(const std::vector<int>& layer_dims, const MethodConfig& mcfg,
                           const Dataset& data, const TrainConfig& cfg,
                           TrainReport* report = nullptr) {
  cfg.validate();
  data.validate();
  if (layer_dims.size() < 2) throw spec_error("train: need >= 2 layer dims");
  if (layer_dims.front() != data.dim)
    throw spec_error("train: input dim does not match dataset");
  if (layer_dims.back() != data.n_classes)
    throw spec_error("train: output dim does not match class count");

  const auto specs = layer_specs_from_dims(layer_dims);
  const std::size_t n_layers = specs.size();
  RngStream root(cfg.seed);

  LatentState st = init_latents(layer_dims, root.derive(train_labels::kInit));
  std::vector<RealMat> vel_w;
  std::vector<RealVec> vel_g, vel_b;
  for (std::size_t l = 0; l < n_layers; ++l) {
    vel_w.emplace_back(st.weights[l].rows(), st.weights[l].cols());
    vel_g.emplace_back(st.gamma[l].size(), 0.0);
    vel_b.emplace_back(st.beta[l].size(), 0.0);
  }

  // Structural scaffold: sample_masks() only reads dimensions and the
  // dropout wiring, so placeholder weights/bn values are fine here.
  BinaryNetwork net;
  net.method = mcfg.method;
  net.dropout_p = mcfg.dropout_p;
  net.group_size = mcfg.group_size;
  net.scale_gamma = mcfg.scale_gamma;
  net.sharing = mcfg.sharing;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Layer layer;
    layer.weights = BitMat(st.weights[l].rows(), st.weights[l].cols());
    for (std::size_t k = 0; k < layer.weights.size(); ++k)
      layer.weights.data()[k] = detail::binarize_latent(st.weights[l].data()[k]);
    const auto d = static_cast<std::size_t>(specs[l].out_dim);
    layer.bn_gamma.assign(d, 1.0);
    layer.bn_beta.assign(d, 0.0);
    layer.bn_mean.assign(d, 0.0);
    layer.bn_var.assign(d, 1.0);
    layer.has_dropout = specs[l].has_dropout;
    layer.is_output = specs[l].is_output;
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  DropoutBank bank(net);

  const std::size_t n_train = data.train_inputs.size();
  std::vector<BitMat> wbin(n_layers);
  auto rebinarize = [&]() {
    for (std::size_t l = 0; l < n_layers; ++l) {
      BitMat w(st.weights[l].rows(), st.weights[l].cols());
      for (std::size_t k = 0; k < w.size(); ++k)
        w.data()[k] = detail::binarize_latent(st.weights[l].data()[k]);
      wbin[l] = std::move(w);
    }
  };

  std::vector<double> epoch_losses;
  double last_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = detail::shuffled_indices(
        n_train, root.derive(train_labels::kShuffle).derive(static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size), ++step) {
      const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t bsz = stop - start;
      if (bsz < 2) continue;  // batch statistics need >= 2 samples
      rebinarize();
      const MaskSet masks = sample_masks(
          bank, net,
          root.derive(train_labels::kMasks)
              .derive(static_cast<std::uint64_t>(epoch))
              .derive(step));

      // ---- forward, recording the tape ----
      std::vector<std::vector<BitVec>> xs(n_layers);
      std::vector<RealMat> ys(n_layers), xhats(n_layers), zs(n_layers);
      std::vector<RealVec> inv_stds(n_layers);
      std::vector<BitVec> cur(bsz);
      for (std::size_t b = 0; b < bsz; ++b) cur[b] = data.train_inputs[order[start + b]];
      for (std::size_t l = 0; l < n_layers; ++l) {
        const auto out_d = static_cast<std::size_t>(specs[l].out_dim);
        xs[l] = cur;
        RealMat y(bsz, out_d);
        for (std::size_t b = 0; b < bsz; ++b) {
          const RealVec yb = crossbar_mac(wbin[l], xs[l][b], masks.layer_masks[l],
                                          net.method, net.scale_gamma);
          for (std::size_t j = 0; j < out_d; ++j) y(b, j) = yb[j];
        }
        RealVec mu(out_d, 0.0), var(out_d, 0.0), inv_std(out_d, 0.0);
        for (std::size_t j = 0; j < out_d; ++j) {
          for (std::size_t b = 0; b < bsz; ++b) mu[j] += y(b, j);
          mu[j] /= static_cast<double>(bsz);
          for (std::size_t b = 0; b < bsz; ++b) {
            const double d = y(b, j) - mu[j];
            var[j] += d * d;
          }
          var[j] /= static_cast<double>(bsz);
          inv_std[j] = 1.0 / std::sqrt(var[j] + kBnEpsilon);
        }
        RealMat xhat(bsz, out_d), z(bsz, out_d);
        for (std::size_t b = 0; b < bsz; ++b)
          for (std::size_t j = 0; j < out_d; ++j) {
            xhat(b, j) = (y(b, j) - mu[j]) * inv_std[j];
            z(b, j) = st.gamma[l][j] * xhat(b, j) + st.beta[l][j];
          }
        if (!specs[l].is_output) {
          std::vector<BitVec> nxt(bsz, BitVec(out_d));
          for (std::size_t b = 0; b < bsz; ++b)
            for (std::size_t j = 0; j < out_d; ++j) nxt[b][j] = sign_bit(z(b, j));
          cur = std::move(nxt);
        }
        ys[l] = std::move(y);
        xhats[l] = std::move(xhat);
        zs[l] = std::move(z);
        inv_stds[l] = std::move(inv_std);
      }

      // ---- loss ----
      const std::size_t n_cls = static_cast<std::size_t>(specs.back().out_dim);
      RealMat probs(bsz, n_cls);
      double loss = 0.0;
      for (std::size_t b = 0; b < bsz; ++b) {
        RealVec row(n_cls);
        for (std::size_t j = 0; j < n_cls; ++j) row[j] = zs[n_layers - 1](b, j);
        const RealVec p = softmax(row);
        for (std::size_t j = 0; j < n_cls; ++j) probs(b, j) = p[j];
        loss -= std::log(std::max(p[static_cast<std::size_t>(
                             data.train_labels[order[start + b]])],
                                  1e-300));
      }
      loss /= static_cast<double>(bsz);
      if (!std::isfinite(loss)) throw numeric_error("train: non-finite loss");
      loss_sum += loss;
      ++loss_batches;

      // ---- backward ----
      RealMat dz(bsz, n_cls);
      for (std::size_t b = 0; b < bsz; ++b)
        for (std::size_t j = 0; j < n_cls; ++j)
          dz(b, j) = (probs(b, j) -
                      (static_cast<int>(j) == data.train_labels[order[start + b]] ? 1.0 : 0.0)) /
                     static_cast<double>(bsz);

      for (std::size_t li = n_layers; li-- > 0;) {
        const auto out_d = static_cast<std::size_t>(specs[li].out_dim);
        const auto in_d = static_cast<std::size_t>(specs[li].in_dim);
        // batch-norm backward
        RealVec dgamma(out_d, 0.0), dbeta(out_d, 0.0), dxh_sum(out_d, 0.0),
            dxh_xh_sum(out_d, 0.0);
        RealMat dxhat(bsz, out_d);
        for (std::size_t b = 0; b < bsz; ++b)
          for (std::size_t j = 0; j < out_d; ++j) {
            dgamma[j] += dz(b, j) * xhats[li](b, j);
            dbeta[j] += dz(b, j);
            dxhat(b, j) = dz(b, j) * st.gamma[li][j];
            dxh_sum[j] += dxhat(b, j);
            dxh_xh_sum[j] += dxhat(b, j) * xhats[li](b, j);
          }
        RealMat dy(bsz, out_d);
        for (std::size_t b = 0; b < bsz; ++b)
          for (std::size_t j = 0; j < out_d; ++j)
            dy(b, j) = inv_stds[li][j] / static_cast<double>(bsz) *
                       (static_cast<double>(bsz) * dxhat(b, j) - dxh_sum[j] -
                        xhats[li](b, j) * dxh_xh_sum[j]);
        // back through the mask multiplier
        for (std::size_t j = 0; j < out_d; ++j) {
          double mult = 1.0;
          if (masks.layer_masks[li][j])
            mult = net.method == DropoutMethod::ScaleDrop ? net.scale_gamma : 0.0;
          if (mult != 1.0)
            for (std::size_t b = 0; b < bsz; ++b) dy(b, j) *= mult;
        }
        // weight gradient (STE gate applied at the update)
        RealMat gw(in_d, out_d);
        for (std::size_t b = 0; b < bsz; ++b) {
          const BitVec& xb = xs[li][b];
          for (std::size_t i = 0; i < in_d; ++i) {
            if (xb[i] == 0) continue;
            const double xi = static_cast<double>(xb[i]);
            for (std::size_t j = 0; j < out_d; ++j) gw(i, j) += xi * dy(b, j);
          }
        }
        // input gradient -> previous layer's dz via the sign STE
        if (li > 0) {
          RealMat dz_prev(bsz, in_d);
          for (std::size_t b = 0; b < bsz; ++b)
            for (std::size_t i = 0; i < in_d; ++i) {
              double acc = 0.0;
              const Bit* w = wbin[li].row(i).data();
              for (std::size_t j = 0; j < out_d; ++j)
                acc += static_cast<double>(w[j]) * dy(b, j);
              dz_prev(b, i) = std::abs(zs[li - 1](b, i)) <= 1.0 ? acc : 0.0;
            }
          dz = std::move(dz_prev);
        }
        // momentum updates; latent weights clipped to [-1,1]
        for (std::size_t i = 0; i < in_d; ++i)
          for (std::size_t j = 0; j < out_d; ++j) {
            const double gate = std::abs(st.weights[li](i, j)) <= 1.0 ? 1.0 : 0.0;
            vel_w[li](i, j) =
                cfg.momentum * vel_w[li](i, j) - cfg.learning_rate * gate * gw(i, j);
            st.weights[li](i, j) =
                std::clamp(st.weights[li](i, j) + vel_w[li](i, j), -1.0, 1.0);
          }
        for (std::size_t j = 0; j < out_d; ++j) {
          vel_g[li][j] = cfg.momentum * vel_g[li][j] - cfg.learning_rate * dgamma[j];
          st.gamma[li][j] += vel_g[li][j];
          vel_b[li][j] = cfg.momentum * vel_b[li][j] - cfg.learning_rate * dbeta[j];
          st.beta[li][j] += vel_b[li][j];
        }
      }
    }
    epoch_losses.push_back(loss_batches ? loss_sum / static_cast<double>(loss_batches)
                                        : 0.0);
    last_loss = epoch_losses.back();
  }

  // ---- freeze: weights, then layer-by-layer population batch-norm stats ----
  rebinarize();
  for (std::size_t l = 0; l < n_layers; ++l) {
    net.layers[l].weights = wbin[l];
    net.layers[l].bn_gamma = st.gamma[l];
    net.layers[l].bn_beta = st.beta[l];
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto out_d = static_cast<std::size_t>(specs[l].out_dim);
    RealVec sum(out_d, 0.0), sumsq(out_d, 0.0);
    std::size_t step = 0;
    std::size_t counted = 0;
    for (std::size_t start = 0; start < n_train;
         start += static_cast<std::size_t>(cfg.batch_size), ++step) {
      const std::size_t stop =
          std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
      const MaskSet masks = sample_masks(
          bank, net,
          root.derive(train_labels::kFreeze).derive(l).derive(step));
      for (std::size_t b = start; b < stop; ++b) {
        // propagate through already-frozen layers < l with these masks
        BitVec cur = data.train_inputs[b];
        for (std::size_t k = 0; k < l; ++k) {
          const auto r = layer_forward(net.layers[k], cur, masks.layer_masks[k],
                                       net.method, net.scale_gamma);
          cur = r.activation;
        }
        const RealVec y = crossbar_mac(net.layers[l].weights, cur, masks.layer_masks[l],
                                       net.method, net.scale_gamma);
        for (std::size_t j = 0; j < out_d; ++j) {
          sum[j] += y[j];
          sumsq[j] += y[j] * y[j];
        }
        ++counted;
      }
    }
    for (std::size_t j = 0; j < out_d; ++j) {
      const double mean = sum[j] / static_cast<double>(counted);
      const double var = sumsq[j] / static_cast<double>(counted) - mean * mean;
      net.layers[l].bn_mean[j] = mean;
      net.layers[l].bn_var[j] = std::max(var, kBnEpsilon);
    }
  }
  net.validate();

  if (report != nullptr) {
    report->epoch_losses = std::move(epoch_losses);
    report->final_loss = last_loss;
    DropoutBank healthy(net);
    report->bayes_eval_accuracy =
        evaluate_accuracy(net, data.eval_inputs, data.eval_labels, 20, healthy,
                          FaultContext{}, root.derive(train_labels::kReport));
  }
  return net;
}

}  // namespace spintest
