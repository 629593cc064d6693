/*
 * Copyright 2026 The predgap Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PREDGAP_COMMON_LOGISTIC_HPP_
#define PREDGAP_COMMON_LOGISTIC_HPP_

#include <cmath>

namespace predgap {

inline double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double Logit(double p) { return std::log(p / (1.0 - p)); }

// log(1 + exp(z)) without overflow.
inline double Softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Binary cross-entropy of a logit against a 0/1 label.
inline double LogLossFromLogit(double z, int y) { return Softplus(z) - (y ? z : 0.0); }

}  // namespace predgap

#endif  // PREDGAP_COMMON_LOGISTIC_HPP_
