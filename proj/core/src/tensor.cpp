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

#include "cosmic/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "cosmic/errors.hpp"

namespace cosmic {

namespace {
std::atomic<bool> g_finite_checks{true};
}

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw MismatchError("tensor extent must be positive, got " + shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
}

Tensor Tensor::full(std::vector<int> s, float v) {
  Tensor t(std::move(s));
  t.fill(v);
  return t;
}

Tensor Tensor::from(std::vector<int> s, std::vector<float> values) {
  Tensor t;
  t.shape = std::move(s);
  if (shape_numel(t.shape) != static_cast<int64_t>(values.size())) {
    throw MismatchError("tensor init: " + shape_str(t.shape) + " does not hold " +
                        std::to_string(values.size()) + " values");
  }
  t.data = std::move(values);
  return t;
}

bool Tensor::all_finite() const {
  for (float v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill_uniform(Rng& rng, float lo, float hi) {
  for (float& v : data) v = static_cast<float>(rng.uniform(lo, hi));
}

void Tensor::fill_normal(Rng& rng, float mean, float stddev) {
  for (float& v : data) v = static_cast<float>(mean + stddev * rng.normal());
}

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

void check_finite(const Tensor& t, const char* label) {
  if (!g_finite_checks.load()) return;
  for (float v : t.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value in ") + label + " " + shape_str(t.shape));
    }
  }
}

double dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw MismatchError("dot: shape " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) acc += static_cast<double>(a.data[i]) * b.data[i];
  return acc;
}

double sum64(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data) acc += v;
  return acc;
}

}  // namespace cosmic
