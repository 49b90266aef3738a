// Copyright 2026 The qreservoir Authors
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

#include "qreservoir/core.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <map>
#include <mutex>
#include <vector>

namespace qreservoir {

/// Nodes and weights of a fixed quadrature rule: integral ~ sum w_i f(x_i).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  size_t size() const { return nodes.size(); }

  template <typename F>
  double integrate(F&& f) const {
    double sum = 0.0;
    for (size_t i = 0; i < nodes.size(); ++i) sum += weights[i] * f(nodes[i]);
    return sum;
  }
};

namespace detail {

inline QuadratureRule compute_gauss_legendre(int n) {
  QuadratureRule rule;
  // Boost returns the non-negative zeros in ascending order.
  const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(n);
  auto weight = [n](double x) {
    const double dp = boost::math::legendre_p_prime(n, x);
    return 2.0 / ((1.0 - x * x) * dp * dp);
  };
  for (auto it = zeros.rbegin(); it != zeros.rend(); ++it) {
    if (*it == 0.0) continue;
    rule.nodes.push_back(-*it);
    rule.weights.push_back(weight(*it));
  }
  for (double x : zeros) {
    rule.nodes.push_back(x);
    rule.weights.push_back(weight(x));
  }
  return rule;
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1]; cached per n.
inline const QuadratureRule& gauss_legendre(int n) {
  require(n >= 1, "gauss_legendre: need at least one node");
  static std::mutex mutex;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

/// Composite Gauss-Legendre rule on [a, b] with equal panels.
inline QuadratureRule composite_gauss_legendre(double a, double b, int panels, int nodes_per_panel) {
  require(b > a, "composite_gauss_legendre: empty interval");
  require(panels >= 1, "composite_gauss_legendre: need at least one panel");
  const QuadratureRule& base = gauss_legendre(nodes_per_panel);
  QuadratureRule rule;
  rule.nodes.reserve(base.size() * panels);
  rule.weights.reserve(base.size() * panels);
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (size_t i = 0; i < base.size(); ++i) {
      rule.nodes.push_back(mid + 0.5 * h * base.nodes[i]);
      rule.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return rule;
}

}  // namespace qreservoir
