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

#include <cmath>

namespace cosmic {

// Transcendentals used when building entropy-coder frequency tables. libm
// implementations differ across platforms at the ulp level, which would break
// the bit-exact payload contract, so the table path uses these fixed
// compositions of IEEE-754 basic operations instead. Accuracy ~1e-7 absolute,
// far below the 2^-16 frequency quantization step.

// exp(x) via base-2 argument reduction and a degree-9 Taylor polynomial.
inline double det_exp(double x) {
  if (x < -745.0) return 0.0;
  if (x > 709.0) return 1e308;  // never hit by table building; avoid inf
  const double kInvLn2 = 1.4426950408889634;
  const double kLn2Hi = 6.93147180369123816490e-01;
  const double kLn2Lo = 1.90821492927058770002e-10;
  const double nf = std::floor(x * kInvLn2 + 0.5);
  const int n = static_cast<int>(nf);
  const double r = (x - nf * kLn2Hi) - nf * kLn2Lo;
  // Taylor around 0, |r| <= ln2/2
  double p = 1.0 / 362880.0;  // 1/9!
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  return std::ldexp(p, n);
}

// erfc(x) for any x, Abramowitz-Stegun 7.1.26 form (absolute error < 1.5e-7).
inline double det_erfc(double x) {
  const double ax = x < 0.0 ? -x : x;
  const double t = 1.0 / (1.0 + 0.3275911 * ax);
  double poly = 1.061405429;
  poly = poly * t - 1.453152027;
  poly = poly * t + 1.421413741;
  poly = poly * t - 0.284496736;
  poly = poly * t + 0.254829592;
  const double e = poly * t * det_exp(-ax * ax);
  return x < 0.0 ? 2.0 - e : e;
}

// Standard normal CDF built on det_erfc.
inline double det_normal_cdf(double x) {
  const double kInvSqrt2 = 0.7071067811865476;
  return 0.5 * det_erfc(-x * kInvSqrt2);
}

// Logistic sigmoid built on det_exp.
inline double det_logistic(double x) {
  if (x >= 0.0) {
    const double e = det_exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = det_exp(x);
  return e / (1.0 + e);
}

}  // namespace cosmic
