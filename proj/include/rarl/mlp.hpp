// Copyright 2026 The rarl-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "rarl/types.hpp"

#include <vector>

namespace rarl {

/// Fixed-topology feed-forward network with tanh hidden layers and a linear
/// output layer. Weights live in an external flat vector so callers can
/// evaluate the same network at several parameter points.
///
/// Flat layout, layer by layer: W_k (out_k x in_k, column-major) followed by
/// b_k (out_k). The gradient engine below is hand-written reverse mode for
/// exactly this topology, plus the matching forward-mode product used by
/// Fisher-vector products.
template <typename Scalar>
class Mlp {
 public:
  using Vec = VectorX<Scalar>;
  using Mat = MatrixX<Scalar>;

  struct Layer {
    Index in = 0;
    Index out = 0;
    Index w_offset = 0;
    Index b_offset = 0;
  };

  /// Post-activation values of each layer for a batch; [0] is the input.
  struct Cache {
    std::vector<Mat> activations;
  };

  Mlp() = default;
  Mlp(Index input, const std::vector<Index>& hidden, Index output) {
    Index in = input;
    Index offset = 0;
    auto add = [&](Index out) {
      Layer l{in, out, offset, offset + in * out};
      offset = l.b_offset + out;
      layers_.push_back(l);
      in = out;
    };
    for (auto h : hidden) add(h);
    add(output);
    num_params_ = offset;
  }

  Index num_params() const { return num_params_; }
  Index input_dim() const { return layers_.front().in; }
  Index output_dim() const { return layers_.back().out; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Scaled-uniform init with unit fan-in variance; the output layer is
  /// additionally scaled by `output_scale`. Biases start at zero.
  void init(Eigen::Ref<Vec> params, Rng& rng, Scalar output_scale) const {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      Scalar bound = std::sqrt(Scalar(3) / static_cast<Scalar>(l.in));
      if (k + 1 == layers_.size()) bound *= output_scale;
      for (Index i = 0; i < l.in * l.out; ++i) params[l.w_offset + i] = static_cast<Scalar>(rng.uniform(-bound, bound));
      params.segment(l.b_offset, l.out).setZero();
    }
  }

  /// Single-input forward pass.
  Vec forward(const Eigen::Ref<const Vec>& params, const Vec& x) const {
    Vec a = x;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      Vec z = weight(params, layers_[k]) * a + bias(params, layers_[k]);
      if (k + 1 < layers_.size()) z = z.array().tanh();
      a = std::move(z);
    }
    return a;
  }

  /// Batched forward pass over the columns of X.
  Mat forward_batch(const Eigen::Ref<const Vec>& params, const Mat& x, Cache* cache = nullptr) const {
    if (cache) {
      cache->activations.clear();
      cache->activations.push_back(x);
    }
    Mat a = x;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      Mat z = weight(params, layers_[k]) * a;
      z.colwise() += bias(params, layers_[k]);
      if (k + 1 < layers_.size()) z = z.array().tanh();
      a = std::move(z);
      if (cache) cache->activations.push_back(a);
    }
    return a;
  }

  /// Reverse mode: accumulates sum_i d_out(:, i)^T dOut_i/dparams into grad.
  void backward(const Eigen::Ref<const Vec>& params, const Cache& cache, const Mat& d_out,
                Eigen::Ref<Vec> grad) const {
    Mat delta = d_out;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& l = layers_[k];
      const Mat& a_prev = cache.activations[k];
      Eigen::Map<Mat>(grad.data() + l.w_offset, l.out, l.in).noalias() += delta * a_prev.transpose();
      grad.segment(l.b_offset, l.out) += delta.rowwise().sum();
      if (k > 0) {
        Mat back = weight(params, l).transpose() * delta;
        delta = back.array() * (Scalar(1) - a_prev.array().square());
      }
    }
  }

  /// Forward mode: directional derivative of the batch output along a
  /// parameter tangent.
  Mat jvp(const Eigen::Ref<const Vec>& params, const Cache& cache, const Eigen::Ref<const Vec>& tangent) const {
    const Index n = cache.activations.front().cols();
    Mat t = Mat::Zero(input_dim(), n);
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      Mat dz = weight(tangent, l) * cache.activations[k];
      if (k > 0) dz.noalias() += weight(params, l) * t;
      dz.colwise() += bias(tangent, l);
      if (k + 1 < layers_.size())
        t = dz.array() * (Scalar(1) - cache.activations[k + 1].array().square());
      else
        t = std::move(dz);
    }
    return t;
  }

  static Eigen::Map<const Mat> weight(const Eigen::Ref<const Vec>& params, const Layer& l) {
    return Eigen::Map<const Mat>(params.data() + l.w_offset, l.out, l.in);
  }
  static Eigen::Map<const Vec> bias(const Eigen::Ref<const Vec>& params, const Layer& l) {
    return Eigen::Map<const Vec>(params.data() + l.b_offset, l.out);
  }

 private:
  std::vector<Layer> layers_;
  Index num_params_ = 0;
};

}  // namespace rarl
