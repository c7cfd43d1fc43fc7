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
#include <string>
#include <unordered_map>

#include "cosmic/autodiff.hpp"
#include "cosmic/rng.hpp"

namespace cosmic {

// Places each distinct parameter tensor on a graph exactly once per step.
// `trainable=false` freezes everything bound through this binder: the leaves
// it creates never require gradients, so frozen parameters provably receive
// zero gradient.
class Binder {
 public:
  Binder(Graph& g, bool trainable) : graph_(g), trainable_(trainable) {}

  Var operator()(const Tensor& t) {
    auto it = cache_.find(&t);
    if (it != cache_.end()) return it->second;
    Var v = graph_.leaf(t, trainable_);
    cache_.emplace(&t, v);
    return v;
  }

  // Gradient of a bound parameter after backward; empty tensor (treated as
  // all-zero by the optimizer) when the parameter never joined this graph.
  const Tensor& lookup_grad(const Tensor& t) {
    static const Tensor kEmpty;
    auto it = cache_.find(&t);
    if (it == cache_.end()) return kEmpty;
    return graph_.grad(it->second);
  }

  bool bound(const Tensor& t) const { return cache_.count(&t) > 0; }

  Graph& graph() { return graph_; }
  bool trainable() const { return trainable_; }

 private:
  Graph& graph_;
  bool trainable_;
  std::unordered_map<const Tensor*, Var> cache_;
};

// Walks every parameter tensor of a module tree with a stable name.
using ParamVisitor = std::function<void(const std::string& name, Tensor& t)>;

struct Conv2dLayer {
  Tensor w;  // [cout, cin/groups, kh, kw]
  Tensor b;  // [cout]
  ConvGeom geom;

  static Conv2dLayer make(int cin, int cout, int kh, int kw, int stride, int pad, Rng& rng,
                          int groups = 1);
  static Conv2dLayer make_asym(int cin, int cout, int kh, int kw, ConvGeom geom, Rng& rng);
  Var forward(Binder& bind, Var x) const;
  Tensor forward_plain(const Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct TConv2dLayer {
  Tensor w;  // [cin, cout/groups, kh, kw]
  Tensor b;  // [cout]
  int stride = 1;
  int pad = 0;
  int out_pad = 0;
  int groups = 1;

  static TConv2dLayer make(int cin, int cout, int kh, int kw, int stride, int pad, int out_pad,
                           Rng& rng, int groups = 1);
  Var forward(Binder& bind, Var x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// GDN/IGDN with reparameterized constraints: beta = beta_min + softplus(raw),
// gamma = softplus(raw). Raw values are unconstrained trainables.
struct GdnLayer {
  Tensor beta_raw;   // [C]
  Tensor gamma_raw;  // [C,C]
  bool inverse = false;

  static GdnLayer make(int channels, bool inverse, Rng& rng);
  Var forward(Binder& bind, Var x) const;
  // Current constrained parameter values.
  Tensor beta() const;
  Tensor gamma() const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct LinearLayer {
  Tensor w;  // [out, in]
  Tensor b;  // [out]

  static LinearLayer make(int in, int out, Rng& rng);
  // x is rank-1 [in]; returns rank-1 [out].
  Var forward(Binder& bind, Var x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// softplus inverse, used to seed reparameterized values.
float softplus_inv(float y);

}  // namespace cosmic
