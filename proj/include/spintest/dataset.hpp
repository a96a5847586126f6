#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "spintest/error.hpp"
#include "spintest/rng.hpp"
#include "spintest/tensor.hpp"

namespace spintest {

/// Binarized classification dataset with a stratified train/eval split.
struct Dataset {
  std::vector<BitVec> train_inputs;
  std::vector<int> train_labels;
  std::vector<BitVec> eval_inputs;
  std::vector<int> eval_labels;
  int dim = 0;
  int n_classes = 0;

  void validate() const {
    if (train_inputs.size() != train_labels.size() ||
        eval_inputs.size() != eval_labels.size())
      throw contract_error("Dataset: inputs/labels length mismatch");
    std::vector<char> in_train(static_cast<std::size_t>(n_classes), 0);
    std::vector<char> in_eval(static_cast<std::size_t>(n_classes), 0);
    auto check = [&](const std::vector<BitVec>& xs, const std::vector<int>& ys,
                     std::vector<char>& seen) {
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (static_cast<int>(xs[i].size()) != dim)
          throw contract_error("Dataset: inconsistent input dimension");
        if (ys[i] < 0 || ys[i] >= n_classes)
          throw contract_error("Dataset: label out of range");
        seen[static_cast<std::size_t>(ys[i])] = 1;
      }
    };
    check(train_inputs, train_labels, in_train);
    check(eval_inputs, eval_labels, in_eval);
    for (int c = 0; c < n_classes; ++c)
      if (!in_train[static_cast<std::size_t>(c)] || !in_eval[static_cast<std::size_t>(c)])
        throw contract_error("Dataset: class missing from a split");
  }
};

/// Synthetic draw including the pre-binarization reals (kept for
/// separability checks).
struct SynthDraw {
  Dataset dataset;
  std::vector<RealVec> train_raw;
  std::vector<RealVec> eval_raw;
  std::vector<RealVec> centers;
};

namespace detail {

// Class centers live on a radius-2.5 sphere; redraw until all pairwise
// distances clear 2.0. (Unit-norm centers cannot be farther than 2.0 apart,
// so the spread is realized by the radius, not the direction draw.)
inline constexpr double kCenterRadius = 2.5;
inline constexpr double kMinCenterDistance = 2.0;
inline constexpr double kWithinClassStd = 0.6;

inline RealVec draw_center(int dim, RngStream& s) {
  RealVec c(static_cast<std::size_t>(dim));
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (double& v : c) {
      v = s.gaussian(0.0, 1.0);
      norm2 += v * v;
    }
  } while (norm2 == 0.0);
  const double scale = kCenterRadius / std::sqrt(norm2);
  for (double& v : c) v *= scale;
  return c;
}

inline double distance(const RealVec& a, const RealVec& b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d2);
}

template <typename T>
inline void apply_permutation(std::vector<T>& v, const std::vector<std::size_t>& perm) {
  std::vector<T> out;
  out.reserve(v.size());
  for (std::size_t i : perm) out.push_back(std::move(v[i]));
  v = std::move(out);
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream s) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i)
    std::swap(idx[i - 1], idx[s.uniform_index(i)]);
  return idx;
}

}  // namespace detail

/// Gaussian class clusters thresholded to the binary alphabet, stratified
/// 80/20 into train/eval, both splits seeded-shuffled so prefixes stay
/// class-balanced.
inline SynthDraw synth_dataset_raw(int n_per_class, int n_classes, int dim,
                                   std::uint64_t seed) {
  if (n_per_class < 1) throw spec_error("synth_dataset: n_per_class must be >= 1");
  if (n_classes < 2) throw spec_error("synth_dataset: need >= 2 classes");
  if (dim < n_classes) throw spec_error("synth_dataset: dim must be >= n_classes");
  if (n_per_class < 5) throw spec_error("synth_dataset: need >= 5 per class for the split");

  RngStream root(seed);
  SynthDraw draw;
  draw.dataset.dim = dim;
  draw.dataset.n_classes = n_classes;

  RngStream center_stream = root.derive(0);
  for (int k = 0; k < n_classes; ++k) {
    RealVec c;
    bool ok = false;
    while (!ok) {
      c = detail::draw_center(dim, center_stream);
      ok = true;
      for (const RealVec& prev : draw.centers)
        if (detail::distance(c, prev) < detail::kMinCenterDistance) ok = false;
    }
    draw.centers.push_back(std::move(c));
  }

  const int n_eval = std::max(1, n_per_class / 5);
  const int n_train = n_per_class - n_eval;
  for (int k = 0; k < n_classes; ++k) {
    RngStream cs = root.derive(1).derive(static_cast<std::uint64_t>(k));
    for (int i = 0; i < n_per_class; ++i) {
      RealVec raw(static_cast<std::size_t>(dim));
      BitVec bits(static_cast<std::size_t>(dim));
      for (int d = 0; d < dim; ++d) {
        raw[static_cast<std::size_t>(d)] =
            draw.centers[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] +
            cs.gaussian(0.0, detail::kWithinClassStd);
        bits[static_cast<std::size_t>(d)] = sign_bit(raw[static_cast<std::size_t>(d)]);
      }
      if (i < n_train) {
        draw.dataset.train_inputs.push_back(std::move(bits));
        draw.dataset.train_labels.push_back(k);
        draw.train_raw.push_back(std::move(raw));
      } else {
        draw.dataset.eval_inputs.push_back(std::move(bits));
        draw.dataset.eval_labels.push_back(k);
        draw.eval_raw.push_back(std::move(raw));
      }
    }
  }

  const auto train_perm =
      detail::shuffled_indices(draw.dataset.train_inputs.size(), root.derive(2));
  const auto eval_perm =
      detail::shuffled_indices(draw.dataset.eval_inputs.size(), root.derive(3));
  detail::apply_permutation(draw.dataset.train_inputs, train_perm);
  detail::apply_permutation(draw.dataset.train_labels, train_perm);
  detail::apply_permutation(draw.train_raw, train_perm);
  detail::apply_permutation(draw.dataset.eval_inputs, eval_perm);
  detail::apply_permutation(draw.dataset.eval_labels, eval_perm);
  detail::apply_permutation(draw.eval_raw, eval_perm);

  draw.dataset.validate();
  return draw;
}

inline Dataset synth_dataset(int n_per_class, int n_classes, int dim, std::uint64_t seed) {
  return synth_dataset_raw(n_per_class, n_classes, dim, seed).dataset;
}

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw io_error("IDX: truncated header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

/// IDX ingestion (big-endian, magic 0x00000803 images / 0x00000801 labels).
/// Pixels binarize as sign(pixel/255 - threshold) with sign(0) = +1.
/// The split is stratified 80/20 by file order.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        double binarize_threshold) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw io_error("IDX: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw io_error("IDX: cannot open " + labels_path);

  if (detail::read_be32(img, images_path) != 0x00000803u)
    throw io_error("IDX: bad image magic in " + images_path);
  const std::uint32_t n_img = detail::read_be32(img, images_path);
  const std::uint32_t rows = detail::read_be32(img, images_path);
  const std::uint32_t cols = detail::read_be32(img, images_path);

  if (detail::read_be32(lab, labels_path) != 0x00000801u)
    throw io_error("IDX: bad label magic in " + labels_path);
  const std::uint32_t n_lab = detail::read_be32(lab, labels_path);
  if (n_img != n_lab) throw io_error("IDX: image/label count mismatch");
  if (n_img == 0) throw io_error("IDX: empty dataset");

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  std::vector<BitVec> inputs(n_img);
  std::vector<int> labels(n_img);
  std::vector<unsigned char> px(dim);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_img; ++i) {
    img.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(dim));
    if (!img) throw io_error("IDX: truncated image data in " + images_path);
    BitVec bits(dim);
    for (std::size_t d = 0; d < dim; ++d)
      bits[d] = sign_bit(static_cast<double>(px[d]) / 255.0 - binarize_threshold);
    inputs[i] = std::move(bits);
    unsigned char y;
    lab.read(reinterpret_cast<char*>(&y), 1);
    if (!lab) throw io_error("IDX: truncated label data in " + labels_path);
    labels[i] = static_cast<int>(y);
    max_label = std::max(max_label, labels[i]);
  }

  Dataset ds;
  ds.dim = static_cast<int>(dim);
  ds.n_classes = max_label + 1;
  // stratified 80/20 by file order
  std::vector<int> seen(static_cast<std::size_t>(ds.n_classes), 0);
  std::vector<int> per_class(static_cast<std::size_t>(ds.n_classes), 0);
  for (int y : labels) ++per_class[static_cast<std::size_t>(y)];
  for (std::uint32_t i = 0; i < n_img; ++i) {
    const int y = labels[i];
    const int total = per_class[static_cast<std::size_t>(y)];
    const int n_eval = std::max(1, total / 5);
    const bool to_train = seen[static_cast<std::size_t>(y)] < total - n_eval;
    ++seen[static_cast<std::size_t>(y)];
    if (to_train) {
      ds.train_inputs.push_back(std::move(inputs[i]));
      ds.train_labels.push_back(y);
    } else {
      ds.eval_inputs.push_back(std::move(inputs[i]));
      ds.eval_labels.push_back(y);
    }
  }
  ds.validate();
  return ds;
}

}  // namespace spintest
