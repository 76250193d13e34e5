#pragma once

// Reference computations used as independent oracles by the tests. Kept
// deliberately naive: plain nested loops over labelings, no shared code with
// the library beyond the graph accessors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "crftrack/factor_graph.hpp"

namespace oracle {

struct Enumeration {
  std::vector<std::array<double, 2>> node;
  std::vector<std::array<double, 4>> pair;
  std::vector<int> map;
  double log_z = 0.0;
};

inline double energy_of(const crftrack::FactorGraph& g, const std::vector<int>& y) {
  double e = 0.0;
  for (std::size_t v = 0; v < g.num_vars(); ++v) e += g.unary(v)[y[v]];
  for (const auto& p : g.pairs()) e += p.energy[2 * y[p.first] + y[p.second]];
  return e;
}

// Walks labelings in odometer order (variable 0 fastest). MAP ties prefer
// more ones at lower indices, compared lexicographically from variable 0.
inline Enumeration enumerate(const crftrack::FactorGraph& g) {
  const std::size_t n = g.num_vars();
  std::vector<int> y(n, 0);
  std::vector<double> energies;
  std::vector<std::vector<int>> labelings;
  while (true) {
    energies.push_back(energy_of(g, y));
    labelings.push_back(y);
    std::size_t k = 0;
    while (k < n && y[k] == 1) y[k++] = 0;
    if (k == n) break;
    y[k] = 1;
  }
  const double lo = *std::min_element(energies.begin(), energies.end());
  double z = 0.0;
  for (double e : energies) z += std::exp(-(e - lo));

  Enumeration out;
  out.node.assign(n, {0.0, 0.0});
  out.pair.assign(g.num_pairs(), {0.0, 0.0, 0.0, 0.0});
  std::size_t best = 0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const double p = std::exp(-(energies[i] - lo)) / z;
    for (std::size_t v = 0; v < n; ++v) out.node[v][labelings[i][v]] += p;
    for (std::size_t k = 0; k < g.num_pairs(); ++k) {
      const auto& f = g.pairs()[k];
      out.pair[k][2 * labelings[i][f.first] + labelings[i][f.second]] += p;
    }
    if (energies[i] < energies[best]) {
      best = i;
    } else if (energies[i] == energies[best]) {
      // Prefer the labeling with label 1 at the first differing variable.
      for (std::size_t v = 0; v < n; ++v) {
        if (labelings[i][v] != labelings[best][v]) {
          if (labelings[i][v] == 1) best = i;
          break;
        }
      }
    }
  }
  out.map = labelings[best];
  out.log_z = std::log(z) - lo;
  return out;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random tree (or forest when `forest` is set) with n variables.
inline crftrack::FactorGraph random_tree(std::mt19937_64& rng, std::size_t n, double scale,
                                         bool forest = false) {
  crftrack::FactorGraph g(n);
  for (std::size_t v = 0; v < n; ++v) {
    g.set_unary(v, {uniform(rng, -scale, scale), uniform(rng, -scale, scale)});
  }
  for (std::size_t v = 1; v < n; ++v) {
    if (forest && uniform(rng, 0.0, 1.0) < 0.2) continue;
    const std::size_t parent = std::uniform_int_distribution<std::size_t>(0, v - 1)(rng);
    crftrack::PairTable t{};
    for (double& e : t) e = uniform(rng, -scale, scale);
    g.add_pair(parent, v, t);
  }
  return g;
}

inline crftrack::FactorGraph random_complete(std::mt19937_64& rng, std::size_t n, double scale) {
  crftrack::FactorGraph g(n);
  for (std::size_t v = 0; v < n; ++v) {
    g.set_unary(v, {uniform(rng, -scale, scale), uniform(rng, -scale, scale)});
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      crftrack::PairTable t{};
      for (double& e : t) e = uniform(rng, -scale, scale);
      g.add_pair(i, j, t);
    }
  }
  return g;
}

inline double max_abs_diff(const std::vector<std::array<double, 2>>& a,
                           const std::vector<std::array<double, 2>>& b) {
  double d = 0.0;
  for (std::size_t v = 0; v < a.size(); ++v) {
    for (std::size_t k = 0; k < 2; ++k) d = std::max(d, std::abs(a[v][k] - b[v][k]));
  }
  return d;
}

}  // namespace oracle
