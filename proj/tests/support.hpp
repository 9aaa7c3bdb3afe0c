#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "wsdiff/wsnn.hpp"

namespace wsdiff::testing {

inline Permutation random_permutation(int n, Rng& rng) {
  std::vector<int> map(static_cast<std::size_t>(n));
  std::iota(map.begin(), map.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(map[static_cast<std::size_t>(i)], map[static_cast<std::size_t>(j)]);
  }
  return Permutation(map);
}

// Small architecture with random replicas, permutations and sparsity masks.
inline WsnnArchitecture random_architecture(Rng& rng, int max_depth = 3, int max_width = 6, int max_replicas = 3) {
  WsnnArchitecture arch;
  arch.depth = 2 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_depth - 1)));
  for (int i = 0; i <= arch.depth; ++i) {
    arch.widths.push_back(1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_width))));
  }
  for (int i = 0; i + 1 < arch.depth; ++i) {
    LayerPerms lp;
    const int m = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(max_replicas)));
    for (int j = 0; j < m; ++j) {
      lp.q.push_back(random_permutation(arch.widths[static_cast<std::size_t>(i)], rng));
      lp.r.push_back(random_permutation(arch.widths[static_cast<std::size_t>(i) + 1], rng));
    }
    arch.perms.push_back(lp);
  }
  for (int i = 0; i < arch.depth; ++i) {
    const auto rows = static_cast<std::size_t>(arch.widths[static_cast<std::size_t>(i) + 1]);
    const auto cols = static_cast<std::size_t>(arch.widths[static_cast<std::size_t>(i)]);
    std::vector<std::uint8_t> wm;
    std::vector<std::uint8_t> bm;
    if (rng.uniform() < 0.5) {
      wm.resize(rows * cols);
      for (auto& v : wm) v = rng.uniform() < 0.7 ? 1 : 0;
      bm.resize(rows);
      for (auto& v : bm) v = rng.uniform() < 0.7 ? 1 : 0;
    }
    arch.weight_masks.push_back(wm);
    arch.bias_masks.push_back(bm);
  }
  arch.sparsity = arch.structural_parameter_count();
  arch.magnitude = 10.0;
  arch.validate();
  return arch;
}

// Normal entries on the allowed pattern, including biases.
inline WsnnParams random_params(const WsnnArchitecture& arch, Rng& rng, double scale = 1.0) {
  WsnnParams p = zero_params(arch);
  for (int i = 0; i < arch.depth; ++i) {
    auto& w = p.weights[static_cast<std::size_t>(i)];
    auto& b = p.biases[static_cast<std::size_t>(i)];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        if (arch.weight_allowed(i, static_cast<int>(r), static_cast<int>(c))) w(r, c) = scale * rng.normal();
      }
      if (arch.bias_allowed(i, static_cast<int>(r))) b[r] = scale * rng.normal();
    }
  }
  return p;
}

// Flattened view of every parameter entry, for finite-difference loops.
inline std::vector<double*> entries(WsnnParams& p) {
  std::vector<double*> out;
  for (std::size_t i = 0; i < p.layers(); ++i) {
    for (Eigen::Index k = 0; k < p.weights[i].size(); ++k) out.push_back(p.weights[i].data() + k);
    for (Eigen::Index k = 0; k < p.biases[i].size(); ++k) out.push_back(p.biases[i].data() + k);
  }
  return out;
}

// Whether each entry of entries() may be nonzero under the architecture's masks.
inline std::vector<bool> entry_allowed(const WsnnArchitecture& arch, const WsnnParams& p) {
  std::vector<bool> out;
  for (std::size_t i = 0; i < p.layers(); ++i) {
    const auto& w = p.weights[i];
    // Eigen is column-major: entry k is (k % rows, k / rows).
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      out.push_back(arch.weight_allowed(static_cast<int>(i), static_cast<int>(k % w.rows()), static_cast<int>(k / w.rows())));
    }
    for (Eigen::Index k = 0; k < p.biases[i].size(); ++k) out.push_back(arch.bias_allowed(static_cast<int>(i), static_cast<int>(k)));
  }
  return out;
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-8) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b)}) + abs_floor;
}

}  // namespace wsdiff::testing
