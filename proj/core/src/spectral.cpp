#include "hmae/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hmae/eigen.hpp"
#include "hmae/error.hpp"
#include "hmae/kmeans.hpp"

namespace hmae {

namespace {
constexpr int kRestarts = 10;
}

std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = remap.emplace(l, static_cast<int>(remap.size()));
    out.push_back(it->second);
  }
  return out;
}

int count_clusters(const std::vector<int>& labels) {
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

std::vector<int> spectral_cluster(const SymMatrix& a, int k, std::uint64_t seed) {
  const std::size_t n = a.size();
  if (k <= 0) throw ValidationError("spectral_cluster: k must be positive");
  if (static_cast<std::size_t>(k) > n)
    throw ValidationError("spectral_cluster: k = " + std::to_string(k) + " exceeds " +
                          std::to_string(n) + " nodes");
  if (!a.all_finite()) throw ValidationError("spectral_cluster: non-finite affinity");

  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) < 0.0) throw ValidationError("spectral_cluster: negative affinity");
      degree[i] += a(i, j);
    }

  std::vector<int> labels(n, -1);
  std::vector<std::size_t> active;
  int next_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (degree[i] > 0.0)
      active.push_back(i);
    else
      labels[i] = next_label++;
  }
  if (active.empty()) return canonical_labels(labels);

  const int isolated = next_label;
  const int k_rest = std::clamp(k - isolated, 1, static_cast<int>(active.size()));
  const std::size_t m = active.size();

  SymMatrix lap(m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = r; c < m; ++c) {
      const std::size_t i = active[r], j = active[c];
      const double norm = a(i, j) / std::sqrt(degree[i] * degree[j]);
      lap.set(r, c, (r == c ? 1.0 : 0.0) - norm);
    }
  }
  const auto eig = sym_eig(lap);

  // Eigenvalues come back descending; the k_rest smallest are the last columns.
  Matrix embed(m, static_cast<std::size_t>(k_rest));
  for (std::size_t r = 0; r < m; ++r) {
    double norm2 = 0.0;
    for (int c = 0; c < k_rest; ++c) {
      const double v = eig.vectors(r, m - 1 - static_cast<std::size_t>(c));
      embed(r, static_cast<std::size_t>(c)) = v;
      norm2 += v * v;
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& v : embed.row(r)) v *= inv;
    }
  }

  const auto km = kmeans(embed, k_rest, kRestarts, seed);
  for (std::size_t r = 0; r < m; ++r) labels[active[r]] = isolated + km.assignment[r];
  return canonical_labels(labels);
}

}  // namespace hmae
