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

#include "cosmic/autodiff.hpp"

#include <cmath>

#include "cosmic/errors.hpp"

namespace cosmic {

namespace {

double stable_softplus(double x) {
  if (x > 20.0) return x;
  if (x < -20.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) * 0.3989422804014327; }

const double kLn2 = 0.6931471805599453;

}  // namespace

Var Graph::make_node(Tensor value, std::vector<int> parents,
                     std::function<void(Graph&, int)> backward) {
  check_finite(value, "graph node");
  const int id = static_cast<int>(nodes_.size());
  bool rg = false;
  for (int p : parents) {
    if (p < 0 || p >= id) throw MismatchError("graph: parent id out of order (cycle rejected)");
    rg = rg || node(p).requires_grad;
  }
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->backward = std::move(backward);
  n->requires_grad = rg;
  nodes_.push_back(std::move(n));
  return Var{this, id};
}

Var Graph::make_node_scalar64(Tensor value, bool has_s64, double s64, std::vector<int> parents,
                              std::function<void(Graph&, int)> backward) {
  Var v = make_node(std::move(value), std::move(parents), std::move(backward));
  node(v.id).has_scalar64 = has_s64;
  node(v.id).scalar64 = s64;
  return v;
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  Var v = make_node(std::move(value), {}, nullptr);
  node(v.id).requires_grad = requires_grad;
  return v;
}

const Tensor& Graph::value(Var v) const { return node(v.id).value; }

double Graph::scalar64(Var v) const {
  const Node& n = node(v.id);
  if (n.has_scalar64) return n.scalar64;
  if (n.value.numel() != 1) throw MismatchError("scalar64: node is not scalar");
  return static_cast<double>(n.value.data[0]);
}

Tensor& Graph::grad_buf(int id) {
  Node& n = node(id);
  if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
  return n.grad;
}

const Tensor& Graph::grad(Var v) { return grad_buf(v.id); }

void Graph::accumulate(int id, const Tensor& g) {
  Tensor& buf = grad_buf(id);
  for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += g.data[i];
}

void Graph::accumulate_scaled(int id, const Tensor& g, float s) {
  Tensor& buf = grad_buf(id);
  for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += s * g.data[i];
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw MismatchError("backward: node from another graph");
  if (node(loss.id).value.numel() != 1) {
    throw MismatchError("backward: loss must be scalar, got " + shape_str(node(loss.id).value.shape));
  }
  grad_buf(loss.id).data[0] = 1.0f;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = node(id);
    if (!n.requires_grad || n.grad.data.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
  backward_done_ = true;
}

// ---------------------------------------------------------------------------
// elementwise

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw MismatchError(std::string(what) + ": shapes " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
}
}  // namespace

Var Graph::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = value(a).data[i] + value(b).data[i];
  const bool s64 = out.numel() == 1 && node(a.id).has_scalar64 && node(b.id).has_scalar64;
  const double s64v = s64 ? node(a.id).scalar64 + node(b.id).scalar64 : 0.0;
  Var res = make_node_scalar64(std::move(out), s64, s64v, {a.id, b.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    if (g.node(n.parents[0]).requires_grad) g.accumulate(n.parents[0], n.grad);
    if (g.node(n.parents[1]).requires_grad) g.accumulate(n.parents[1], n.grad);
  });
  return res;
}

Var Graph::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = value(a).data[i] - value(b).data[i];
  return make_node(std::move(out), {a.id, b.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    if (g.node(n.parents[0]).requires_grad) g.accumulate(n.parents[0], n.grad);
    if (g.node(n.parents[1]).requires_grad) g.accumulate_scaled(n.parents[1], n.grad, -1.0f);
  });
}

Var Graph::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = value(a).data[i] * value(b).data[i];
  return make_node(std::move(out), {a.id, b.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& av = g.node(n.parents[0]).value;
    const Tensor& bv = g.node(n.parents[1]).value;
    if (g.node(n.parents[0]).requires_grad) {
      Tensor& buf = g.grad_buf(n.parents[0]);
      for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += n.grad.data[i] * bv.data[i];
    }
    if (g.node(n.parents[1]).requires_grad) {
      Tensor& buf = g.grad_buf(n.parents[1]);
      for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += n.grad.data[i] * av.data[i];
    }
  });
}

Var Graph::scale(Var a, double c) {
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<float>(value(a).data[i] * c);
  const float cf = static_cast<float>(c);
  const bool s64 = out.numel() == 1 && node(a.id).has_scalar64;
  const double s64v = s64 ? node(a.id).scalar64 * c : 0.0;
  return make_node_scalar64(std::move(out), s64, s64v, {a.id}, [cf](Graph& g, int id) {
    const auto& n = g.node(id);
    g.accumulate_scaled(n.parents[0], n.grad, cf);
  });
}

Var Graph::add_scalar(Var a, double c) {
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<float>(value(a).data[i] + c);
  return make_node(std::move(out), {a.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    g.accumulate(n.parents[0], n.grad);
  });
}

Var Graph::sigmoid(Var a) {
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<float>(logistic(value(a).data[i]));
  return make_node(std::move(out), {a.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < buf.data.size(); ++i) {
      const float s = n.value.data[i];
      buf.data[i] += n.grad.data[i] * s * (1.0f - s);
    }
  });
}

Var Graph::exp(Var a) {
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::exp(value(a).data[i]);
  return make_node(std::move(out), {a.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += n.grad.data[i] * n.value.data[i];
  });
}

Var Graph::softplus(Var a) {
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<float>(stable_softplus(value(a).data[i]));
  }
  return make_node(std::move(out), {a.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& xv = g.node(n.parents[0]).value;
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < buf.data.size(); ++i) {
      buf.data[i] += n.grad.data[i] * static_cast<float>(logistic(xv.data[i]));
    }
  });
}

Var Graph::silu(Var a) {
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const double x = value(a).data[i];
    out.data[i] = static_cast<float>(x * logistic(x));
  }
  return make_node(std::move(out), {a.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& xv = g.node(n.parents[0]).value;
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < buf.data.size(); ++i) {
      const double x = xv.data[i];
      const double s = logistic(x);
      buf.data[i] += n.grad.data[i] * static_cast<float>(s * (1.0 + x * (1.0 - s)));
    }
  });
}

Var Graph::abs(Var a) {
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::fabs(value(a).data[i]);
  return make_node(std::move(out), {a.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& xv = g.node(n.parents[0]).value;
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < buf.data.size(); ++i) {
      const float x = xv.data[i];
      const float sign = x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f);
      buf.data[i] += n.grad.data[i] * sign;
    }
  });
}

Var Graph::square(Var a) {
  Tensor out(value(a).shape);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const float x = value(a).data[i];
    out.data[i] = x * x;
  }
  return make_node(std::move(out), {a.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& xv = g.node(n.parents[0]).value;
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += 2.0f * n.grad.data[i] * xv.data[i];
  });
}

// ---------------------------------------------------------------------------
// shape

Var Graph::reshape(Var a, std::vector<int> shape) {
  if (shape_numel(shape) != value(a).numel()) {
    throw MismatchError("reshape: " + shape_str(value(a).shape) + " -> " + shape_str(shape));
  }
  Tensor out;
  out.shape = std::move(shape);
  out.data = value(a).data;
  return make_node(std::move(out), {a.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += n.grad.data[i];
  });
}

Var Graph::concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw MismatchError("concat_channels: no inputs");
  const int h = value(parts[0]).dim(1), w = value(parts[0]).dim(2);
  int c_total = 0;
  std::vector<int> parents;
  for (Var p : parts) {
    const Tensor& t = value(p);
    if (t.rank() != 3 || t.dim(1) != h || t.dim(2) != w) {
      throw MismatchError("concat_channels: spatial mismatch " + shape_str(t.shape));
    }
    c_total += t.dim(0);
    parents.push_back(p.id);
  }
  Tensor out({c_total, h, w});
  size_t off = 0;
  for (Var p : parts) {
    const Tensor& t = value(p);
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<ptrdiff_t>(off));
    off += t.data.size();
  }
  return make_node(std::move(out), std::move(parents), [](Graph& g, int id) {
    const auto& n = g.node(id);
    size_t off2 = 0;
    for (int pid : n.parents) {
      const size_t len = g.node(pid).value.data.size();
      if (g.node(pid).requires_grad) {
        Tensor& buf = g.grad_buf(pid);
        for (size_t i = 0; i < len; ++i) buf.data[i] += n.grad.data[off2 + i];
      }
      off2 += len;
    }
  });
}

Var Graph::slice_channels(Var a, int from, int count) {
  const Tensor& t = value(a);
  if (t.rank() != 3 || from < 0 || count < 1 || from + count > t.dim(0)) {
    throw MismatchError("slice_channels: [" + std::to_string(from) + "," + std::to_string(from + count) +
                        ") of " + shape_str(t.shape));
  }
  const int h = t.dim(1), w = t.dim(2);
  const size_t plane = static_cast<size_t>(h) * w;
  Tensor out({count, h, w});
  std::copy(t.data.begin() + static_cast<ptrdiff_t>(from * plane),
            t.data.begin() + static_cast<ptrdiff_t>((from + count) * plane), out.data.begin());
  return make_node(std::move(out), {a.id}, [from, plane](Graph& g, int id) {
    const auto& n = g.node(id);
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < n.grad.data.size(); ++i) buf.data[from * plane + i] += n.grad.data[i];
  });
}

Var Graph::slice_row(Var a, int row) {
  const Tensor& t = value(a);
  if (t.rank() != 2 || row < 0 || row >= t.dim(0)) {
    throw MismatchError("slice_row: row " + std::to_string(row) + " of " + shape_str(t.shape));
  }
  const int cols = t.dim(1);
  Tensor out({1, cols});
  std::copy(t.data.begin() + static_cast<ptrdiff_t>(row) * cols,
            t.data.begin() + static_cast<ptrdiff_t>(row + 1) * cols, out.data.begin());
  return make_node(std::move(out), {a.id}, [row, cols](Graph& g, int id) {
    const auto& n = g.node(id);
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (int j = 0; j < cols; ++j) buf.data[static_cast<size_t>(row) * cols + j] += n.grad.data[static_cast<size_t>(j)];
  });
}

Var Graph::concat_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw MismatchError("concat_rows: no inputs");
  const int cols = value(rows[0]).dim(1);
  int total = 0;
  std::vector<int> parents;
  for (Var r : rows) {
    const Tensor& t = value(r);
    if (t.rank() != 2 || t.dim(1) != cols) throw MismatchError("concat_rows: " + shape_str(t.shape));
    total += t.dim(0);
    parents.push_back(r.id);
  }
  Tensor out({total, cols});
  size_t off = 0;
  for (Var r : rows) {
    const Tensor& t = value(r);
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + static_cast<ptrdiff_t>(off));
    off += t.data.size();
  }
  return make_node(std::move(out), std::move(parents), [](Graph& g, int id) {
    const auto& n = g.node(id);
    size_t off2 = 0;
    for (int pid : n.parents) {
      const size_t len = g.node(pid).value.data.size();
      if (g.node(pid).requires_grad) {
        Tensor& buf = g.grad_buf(pid);
        for (size_t i = 0; i < len; ++i) buf.data[i] += n.grad.data[off2 + i];
      }
      off2 += len;
    }
  });
}

Var Graph::transpose2d(Var a) {
  const Tensor& t = value(a);
  if (t.rank() != 2) throw MismatchError("transpose2d: rank " + shape_str(t.shape));
  const int n = t.dim(0), m = t.dim(1);
  Tensor out({m, n});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) out.data[static_cast<size_t>(j) * n + i] = t.data[static_cast<size_t>(i) * m + j];
  }
  return make_node(std::move(out), {a.id}, [n, m](Graph& g, int id) {
    const auto& nd = g.node(id);
    Tensor& buf = g.grad_buf(nd.parents[0]);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        buf.data[static_cast<size_t>(i) * m + j] += nd.grad.data[static_cast<size_t>(j) * n + i];
      }
    }
  });
}

Var Graph::broadcast_add_channel(Var x, Var v) {
  const Tensor& xt = value(x);
  const Tensor& vt = value(v);
  if (xt.rank() != 3 || vt.numel() != xt.dim(0)) {
    throw MismatchError("broadcast_add_channel: " + shape_str(xt.shape) + " + " + shape_str(vt.shape));
  }
  const int c = xt.dim(0);
  const size_t plane = static_cast<size_t>(xt.dim(1)) * xt.dim(2);
  Tensor out(xt.shape);
  for (int ch = 0; ch < c; ++ch) {
    const float b = vt.data[static_cast<size_t>(ch)];
    for (size_t i = 0; i < plane; ++i) out.data[ch * plane + i] = xt.data[ch * plane + i] + b;
  }
  return make_node(std::move(out), {x.id, v.id}, [c, plane](Graph& g, int id) {
    const auto& n = g.node(id);
    if (g.node(n.parents[0]).requires_grad) g.accumulate(n.parents[0], n.grad);
    if (g.node(n.parents[1]).requires_grad) {
      Tensor& buf = g.grad_buf(n.parents[1]);
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (size_t i = 0; i < plane; ++i) acc += n.grad.data[ch * plane + i];
        buf.data[static_cast<size_t>(ch)] += static_cast<float>(acc);
      }
    }
  });
}

Var Graph::crop_spatial(Var a, int h, int w) {
  const Tensor& t = value(a);
  if (t.rank() != 3 || h < 1 || w < 1 || h > t.dim(1) || w > t.dim(2)) {
    throw MismatchError("crop_spatial: " + std::to_string(h) + "x" + std::to_string(w) + " of " +
                        shape_str(t.shape));
  }
  if (h == t.dim(1) && w == t.dim(2)) return a;
  const int c = t.dim(0), ih = t.dim(1), iw = t.dim(2);
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.data[(static_cast<size_t>(ch) * h + y) * w + x] =
            t.data[(static_cast<size_t>(ch) * ih + y) * iw + x];
      }
    }
  }
  return make_node(std::move(out), {a.id}, [c, h, w, ih, iw](Graph& g, int id) {
    const auto& n = g.node(id);
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          buf.data[(static_cast<size_t>(ch) * ih + y) * iw + x] +=
              n.grad.data[(static_cast<size_t>(ch) * h + y) * w + x];
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// reductions

Var Graph::sum(Var a) {
  const double acc = sum64(value(a));
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  return make_node_scalar64(std::move(out), true, acc, {a.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    const float s = n.grad.data[0];
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += s;
  });
}

Var Graph::mean(Var a) {
  const double n_elem = static_cast<double>(value(a).numel());
  const double acc = sum64(value(a)) / n_elem;
  Tensor out = Tensor::scalar(static_cast<float>(acc));
  return make_node_scalar64(std::move(out), true, acc, {a.id}, [n_elem](Graph& g, int id) {
    const auto& n = g.node(id);
    const float s = static_cast<float>(n.grad.data[0] / n_elem);
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += s;
  });
}

Var Graph::mse(Var a, Var b) {
  require_same_shape(value(a), value(b), "mse");
  const double n_elem = static_cast<double>(value(a).numel());
  double acc = 0.0;
  for (size_t i = 0; i < value(a).data.size(); ++i) {
    const double d = static_cast<double>(value(a).data[i]) - value(b).data[i];
    acc += d * d;
  }
  Tensor out = Tensor::scalar(static_cast<float>(acc / n_elem));
  return make_node_scalar64(std::move(out), true, acc / n_elem, {a.id, b.id}, [n_elem](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& av = g.node(n.parents[0]).value;
    const Tensor& bv = g.node(n.parents[1]).value;
    const float s = static_cast<float>(2.0 * n.grad.data[0] / n_elem);
    if (g.node(n.parents[0]).requires_grad) {
      Tensor& buf = g.grad_buf(n.parents[0]);
      for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += s * (av.data[i] - bv.data[i]);
    }
    if (g.node(n.parents[1]).requires_grad) {
      Tensor& buf = g.grad_buf(n.parents[1]);
      for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] -= s * (av.data[i] - bv.data[i]);
    }
  });
}

// ---------------------------------------------------------------------------
// linear algebra

Var Graph::matmul(Var a, Var b) {
  Tensor out = matmul_fwd(value(a), value(b));
  return make_node(std::move(out), {a.id, b.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& av = g.node(n.parents[0]).value;
    const Tensor& bv = g.node(n.parents[1]).value;
    const int rows = av.dim(0), inner = av.dim(1), cols = bv.dim(1);
    if (g.node(n.parents[0]).requires_grad) {
      Tensor& buf = g.grad_buf(n.parents[0]);
      for (int i = 0; i < rows; ++i) {
        for (int l = 0; l < inner; ++l) {
          double acc = 0.0;
          for (int j = 0; j < cols; ++j) {
            acc += static_cast<double>(n.grad.data[static_cast<size_t>(i) * cols + j]) *
                   bv.data[static_cast<size_t>(l) * cols + j];
          }
          buf.data[static_cast<size_t>(i) * inner + l] += static_cast<float>(acc);
        }
      }
    }
    if (g.node(n.parents[1]).requires_grad) {
      Tensor& buf = g.grad_buf(n.parents[1]);
      for (int l = 0; l < inner; ++l) {
        for (int j = 0; j < cols; ++j) {
          double acc = 0.0;
          for (int i = 0; i < rows; ++i) {
            acc += static_cast<double>(av.data[static_cast<size_t>(i) * inner + l]) *
                   n.grad.data[static_cast<size_t>(i) * cols + j];
          }
          buf.data[static_cast<size_t>(l) * cols + j] += static_cast<float>(acc);
        }
      }
    }
  });
}

Var Graph::softmax_axis0(Var a) {
  const Tensor& t = value(a);
  if (t.rank() != 2) throw MismatchError("softmax_axis0: rank " + shape_str(t.shape));
  const int rows = t.dim(0), cols = t.dim(1);
  Tensor out(t.shape);
  for (int j = 0; j < cols; ++j) {
    double mx = -1e300;
    for (int i = 0; i < rows; ++i) mx = std::max(mx, static_cast<double>(t.data[static_cast<size_t>(i) * cols + j]));
    double z = 0.0;
    for (int i = 0; i < rows; ++i) z += std::exp(static_cast<double>(t.data[static_cast<size_t>(i) * cols + j]) - mx);
    for (int i = 0; i < rows; ++i) {
      out.data[static_cast<size_t>(i) * cols + j] =
          static_cast<float>(std::exp(static_cast<double>(t.data[static_cast<size_t>(i) * cols + j]) - mx) / z);
    }
  }
  return make_node(std::move(out), {a.id}, [rows, cols](Graph& g, int id) {
    const auto& n = g.node(id);
    Tensor& buf = g.grad_buf(n.parents[0]);
    for (int j = 0; j < cols; ++j) {
      double dot_sg = 0.0;
      for (int i = 0; i < rows; ++i) {
        dot_sg += static_cast<double>(n.value.data[static_cast<size_t>(i) * cols + j]) *
                  n.grad.data[static_cast<size_t>(i) * cols + j];
      }
      for (int i = 0; i < rows; ++i) {
        const size_t idx = static_cast<size_t>(i) * cols + j;
        buf.data[idx] += static_cast<float>(n.value.data[idx] * (n.grad.data[idx] - dot_sg));
      }
    }
  });
}

// ---------------------------------------------------------------------------
// network primitives

Var Graph::conv2d(Var x, Var w, Var b, int stride, int pad, int groups) {
  return conv2d_geom(x, w, b, ConvGeom::same(stride, pad, groups));
}

Var Graph::conv2d_geom(Var x, Var w, Var b, ConvGeom geom) {
  static const Tensor kNoBias;
  const Tensor& bias = b.valid() ? value(b) : kNoBias;
  Tensor out = conv2d_fwd(value(x), value(w), bias, geom);
  std::vector<int> parents{x.id, w.id};
  if (b.valid()) parents.push_back(b.id);
  return make_node(std::move(out), std::move(parents), [geom](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& xv = g.node(n.parents[0]).value;
    const Tensor& wv = g.node(n.parents[1]).value;
    if (g.node(n.parents[0]).requires_grad) {
      g.accumulate(n.parents[0], conv2d_grad_input(n.grad, wv, xv.shape, geom));
    }
    if (g.node(n.parents[1]).requires_grad) {
      g.accumulate(n.parents[1], conv2d_grad_weight(n.grad, xv, wv.shape, geom));
    }
    if (n.parents.size() == 3 && g.node(n.parents[2]).requires_grad) {
      const int cout = n.value.dim(0);
      const size_t plane = static_cast<size_t>(n.value.dim(1)) * n.value.dim(2);
      Tensor& buf = g.grad_buf(n.parents[2]);
      for (int oc = 0; oc < cout; ++oc) {
        double acc = 0.0;
        for (size_t i = 0; i < plane; ++i) acc += n.grad.data[oc * plane + i];
        buf.data[static_cast<size_t>(oc)] += static_cast<float>(acc);
      }
    }
  });
}

Var Graph::tconv2d(Var x, Var w, Var b, int stride, int pad, int out_pad, int groups) {
  TConvGeom geom{stride, pad, out_pad, groups};
  static const Tensor kNoBias;
  const Tensor& bias = b.valid() ? value(b) : kNoBias;
  Tensor out = tconv2d_fwd(value(x), value(w), bias, geom);
  std::vector<int> parents{x.id, w.id};
  if (b.valid()) parents.push_back(b.id);
  return make_node(std::move(out), std::move(parents), [geom](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& xv = g.node(n.parents[0]).value;
    const Tensor& wv = g.node(n.parents[1]).value;
    if (g.node(n.parents[0]).requires_grad) {
      g.accumulate(n.parents[0], tconv2d_grad_input(n.grad, wv, xv.shape, geom));
    }
    if (g.node(n.parents[1]).requires_grad) {
      g.accumulate(n.parents[1], tconv2d_grad_weight(n.grad, xv, wv.shape, geom));
    }
    if (n.parents.size() == 3 && g.node(n.parents[2]).requires_grad) {
      const int cout = n.value.dim(0);
      const size_t plane = static_cast<size_t>(n.value.dim(1)) * n.value.dim(2);
      Tensor& buf = g.grad_buf(n.parents[2]);
      for (int oc = 0; oc < cout; ++oc) {
        double acc = 0.0;
        for (size_t i = 0; i < plane; ++i) acc += n.grad.data[oc * plane + i];
        buf.data[static_cast<size_t>(oc)] += static_cast<float>(acc);
      }
    }
  });
}

Var Graph::gdn(Var x, Var beta, Var gamma, bool inverse) {
  Tensor out = gdn_fwd(value(x), value(beta), value(gamma), inverse);
  return make_node(std::move(out), {x.id, beta.id, gamma.id}, [inverse](Graph& g, int id) {
    const auto& n = g.node(id);
    GdnGrads grads = gdn_bwd(n.grad, g.node(n.parents[0]).value, g.node(n.parents[1]).value,
                             g.node(n.parents[2]).value, inverse);
    if (g.node(n.parents[0]).requires_grad) g.accumulate(n.parents[0], grads.x);
    if (g.node(n.parents[1]).requires_grad) g.accumulate(n.parents[1], grads.beta);
    if (g.node(n.parents[2]).requires_grad) g.accumulate(n.parents[2], grads.gamma);
  });
}

// ---------------------------------------------------------------------------
// quantization proxies

Var Graph::quantize_noise_ste(Var y, Tensor noise) {
  require_same_shape(value(y), noise, "quantize_noise_ste");
  Tensor out(value(y).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = value(y).data[i] + noise.data[i];
  return make_node(std::move(out), {y.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    g.accumulate(n.parents[0], n.grad);
  });
}

Var Graph::quantize_round_ste(Var y) {
  Tensor out(value(y).shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::round(value(y).data[i]);
  return make_node(std::move(out), {y.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    g.accumulate(n.parents[0], n.grad);
  });
}

// ---------------------------------------------------------------------------
// rate terms

Var Graph::gaussian_rate_bits(Var sym, Var mu, Var sigmaT) {
  require_same_shape(value(sym), value(mu), "gaussian_rate_bits");
  require_same_shape(value(sym), value(sigmaT), "gaussian_rate_bits");
  const Tensor& s = value(sym);
  const Tensor& m = value(mu);
  const Tensor& sg = value(sigmaT);
  double bits = 0.0;
  for (size_t i = 0; i < s.data.size(); ++i) {
    const double sd = sg.data[i];
    const double a = (s.data[i] + 0.5 - m.data[i]) / sd;
    const double b = (s.data[i] - 0.5 - m.data[i]) / sd;
    const double p = std::max(normal_cdf(a) - normal_cdf(b), kProbabilityFloor);
    bits += -std::log2(p);
  }
  return make_node_scalar64(Tensor::scalar(static_cast<float>(bits)), true, bits,
                            {sym.id, mu.id, sigmaT.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& sv = g.node(n.parents[0]).value;
    const Tensor& mv = g.node(n.parents[1]).value;
    const Tensor& gv = g.node(n.parents[2]).value;
    const float go = n.grad.data[0];
    const bool need_s = g.node(n.parents[0]).requires_grad;
    const bool need_m = g.node(n.parents[1]).requires_grad;
    const bool need_g = g.node(n.parents[2]).requires_grad;
    Tensor* gs = need_s ? &g.grad_buf(n.parents[0]) : nullptr;
    Tensor* gm = need_m ? &g.grad_buf(n.parents[1]) : nullptr;
    Tensor* gg = need_g ? &g.grad_buf(n.parents[2]) : nullptr;
    for (size_t i = 0; i < sv.data.size(); ++i) {
      const double sd = gv.data[i];
      const double a = (sv.data[i] + 0.5 - mv.data[i]) / sd;
      const double b = (sv.data[i] - 0.5 - mv.data[i]) / sd;
      const double p = normal_cdf(a) - normal_cdf(b);
      if (p <= kProbabilityFloor) continue;  // floored: flat, no gradient
      const double dbits_dp = -1.0 / (p * kLn2);
      const double pa = normal_pdf(a), pb = normal_pdf(b);
      if (gs) gs->data[i] += static_cast<float>(go * dbits_dp * (pa - pb) / sd);
      if (gm) gm->data[i] += static_cast<float>(go * dbits_dp * -(pa - pb) / sd);
      if (gg) gg->data[i] += static_cast<float>(go * dbits_dp * (-a * pa + b * pb) / sd);
    }
  });
}

Var Graph::logistic_rate_bits(Var sym, Var loc, Var scaleT) {
  require_same_shape(value(sym), value(loc), "logistic_rate_bits");
  require_same_shape(value(sym), value(scaleT), "logistic_rate_bits");
  const Tensor& s = value(sym);
  const Tensor& m = value(loc);
  const Tensor& sc = value(scaleT);
  double bits = 0.0;
  for (size_t i = 0; i < s.data.size(); ++i) {
    const double k = sc.data[i];
    const double a = (s.data[i] + 0.5 - m.data[i]) / k;
    const double b = (s.data[i] - 0.5 - m.data[i]) / k;
    const double p = std::max(logistic(a) - logistic(b), kProbabilityFloor);
    bits += -std::log2(p);
  }
  return make_node_scalar64(Tensor::scalar(static_cast<float>(bits)), true, bits,
                            {sym.id, loc.id, scaleT.id}, [](Graph& g, int id) {
    const auto& n = g.node(id);
    const Tensor& sv = g.node(n.parents[0]).value;
    const Tensor& mv = g.node(n.parents[1]).value;
    const Tensor& kv = g.node(n.parents[2]).value;
    const float go = n.grad.data[0];
    const bool need_s = g.node(n.parents[0]).requires_grad;
    const bool need_m = g.node(n.parents[1]).requires_grad;
    const bool need_k = g.node(n.parents[2]).requires_grad;
    Tensor* gs = need_s ? &g.grad_buf(n.parents[0]) : nullptr;
    Tensor* gm = need_m ? &g.grad_buf(n.parents[1]) : nullptr;
    Tensor* gk = need_k ? &g.grad_buf(n.parents[2]) : nullptr;
    for (size_t i = 0; i < sv.data.size(); ++i) {
      const double k = kv.data[i];
      const double a = (sv.data[i] + 0.5 - mv.data[i]) / k;
      const double b = (sv.data[i] - 0.5 - mv.data[i]) / k;
      const double sa = logistic(a), sb = logistic(b);
      const double p = sa - sb;
      if (p <= kProbabilityFloor) continue;
      const double dbits_dp = -1.0 / (p * kLn2);
      const double da = sa * (1.0 - sa), db = sb * (1.0 - sb);
      if (gs) gs->data[i] += static_cast<float>(go * dbits_dp * (da - db) / k);
      if (gm) gm->data[i] += static_cast<float>(go * dbits_dp * -(da - db) / k);
      if (gk) gk->data[i] += static_cast<float>(go * dbits_dp * (-a * da + b * db) / k);
    }
  });
}

}  // namespace cosmic
