// Copyright 2026 the cosmic authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cosmic/kernels.hpp"
#include "cosmic/tensor.hpp"

namespace cosmic {

class Graph;

// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  int id = -1;
  bool valid() const { return graph != nullptr && id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so node ids form
// a topological order by construction; backward() walks them once in reverse.
// Recording is single-writer; backward is single-threaded per graph.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // --- elementwise ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var softplus(Var a);
  Var silu(Var a);
  Var abs(Var a);
  Var square(Var a);

  // --- shape ---
  Var reshape(Var a, std::vector<int> shape);
  Var concat_channels(const std::vector<Var>& parts);
  Var slice_channels(Var a, int from, int count);
  // Rank-2 row ops (token axes in attention).
  Var slice_row(Var a, int row);
  Var concat_rows(const std::vector<Var>& rows);
  Var transpose2d(Var a);
  // x [C,H,W] plus per-channel vector v [C], broadcast over H,W.
  Var broadcast_add_channel(Var x, Var v);
  // Top-left h x w window of a [C,H,W] tensor.
  Var crop_spatial(Var a, int h, int w);

  // --- reductions (float64 accumulation) ---
  Var sum(Var a);
  Var mean(Var a);
  Var mse(Var a, Var b);

  // --- linear algebra ---
  Var matmul(Var a, Var b);
  // Column-wise softmax of a [T,N] tensor over the T axis.
  Var softmax_axis0(Var a);

  // --- network primitives ---
  Var conv2d(Var x, Var w, Var b, int stride, int pad, int groups = 1);
  Var conv2d_geom(Var x, Var w, Var b, ConvGeom geom);
  Var tconv2d(Var x, Var w, Var b, int stride, int pad, int out_pad, int groups = 1);
  Var gdn(Var x, Var beta, Var gamma, bool inverse = false);

  // --- quantization proxies (straight-through gradients) ---
  // Training proxy: y + u with caller-supplied noise in [-0.5, 0.5).
  Var quantize_noise_ste(Var y, Tensor noise);
  // Evaluation proxy: round to nearest, ties away from zero.
  Var quantize_round_ste(Var y);

  // --- rate terms ---
  // Total bits of `sym` under per-element Gaussians N(mu, sigma^2), integer
  // bins [s-0.5, s+0.5), probability floored at p_floor. Returns scalar.
  Var gaussian_rate_bits(Var sym, Var mu, Var sigmaT);
  // Same with a per-element logistic CDF (factorized prior path).
  Var logistic_rate_bits(Var sym, Var loc, Var scaleT);

  // Seeds d(loss)=1 and accumulates gradients into every node that can reach
  // a grad-requiring leaf. Unreached leaves keep zero gradients.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  // Gradient of a node; zeros if backward never reached it.
  const Tensor& grad(Var v);

  // Scalar value at float64 precision. Reductions and rate terms carry their
  // double accumulator alongside the float32 node value, and scalar
  // arithmetic propagates it; gradient checks difference this channel.
  double scalar64(Var v) const;

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched
    std::vector<int> parents;
    std::function<void(Graph&, int)> backward;
    bool requires_grad = false;
    double scalar64 = 0.0;
    bool has_scalar64 = false;
  };

  Var make_node(Tensor value, std::vector<int> parents,
                std::function<void(Graph&, int)> backward);
  Var make_node_scalar64(Tensor value, bool has_s64, double s64, std::vector<int> parents,
                         std::function<void(Graph&, int)> backward);
  Node& node(int id) { return *nodes_[static_cast<size_t>(id)]; }
  const Node& node(int id) const { return *nodes_[static_cast<size_t>(id)]; }
  Tensor& grad_buf(int id);
  void accumulate(int id, const Tensor& g);
  void accumulate_scaled(int id, const Tensor& g, float s);

  std::vector<std::unique_ptr<Node>> nodes_;
  bool backward_done_ = false;
};

// Probability floor shared by rate estimation and the entropy coder.
inline constexpr double kProbabilityFloor = 1.0 / 65536.0;  // 2^-16

}  // namespace cosmic
