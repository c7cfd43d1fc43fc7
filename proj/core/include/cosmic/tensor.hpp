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

#include <cstdint>
#include <string>
#include <vector>

#include "cosmic/rng.hpp"

namespace cosmic {

// Dense N-dimensional float32 array, row-major. The carrier for activations,
// weights and gradients throughout the codec.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, float v);
  static Tensor from(std::vector<int> s, std::vector<float> values);
  static Tensor scalar(float v) { return from({1}, {v}); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  float& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // [C,H,W] accessors for the common image layout.
  float& at3(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  float at3(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  void fill(float v) { std::fill(data.begin(), data.end(), v); }
  void fill_uniform(Rng& rng, float lo, float hi);
  void fill_normal(Rng& rng, float mean, float stddev);
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Throws NumericError when `t` contains NaN/Inf and finite checks are on.
// The invariant is that no operation lets a non-finite value through silently.
void check_finite(const Tensor& t, const char* label);
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// Inner product with a float64 accumulator; reductions are accumulated in
// 64-bit so sums are reproducible at test tolerances.
double dot(const Tensor& a, const Tensor& b);
double sum64(const Tensor& a);

}  // namespace cosmic
