#include "hmae/kmeans.hpp"

#include <limits>
#include <random>

#include "hmae/error.hpp"

namespace hmae {

namespace {

struct Run {
  std::vector<int> assignment;
  double wcss = 0.0;
  std::vector<double> trace;
};

Matrix plus_plus_centers(const Matrix& x, int k, std::mt19937_64& rng) {
  const std::size_t n = x.rows();
  Matrix centers(static_cast<std::size_t>(k), x.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  for (int c = 0; c < k; ++c) {
    auto dst = centers.row(static_cast<std::size_t>(c));
    auto src = x.row(pick);
    std::copy(src.begin(), src.end(), dst.begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), dst));
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        r -= d2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] <= 0.0 && pick > 0) --pick;
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
  }
  return centers;
}

Run lloyd(const Matrix& x, Matrix centers, int max_iterations) {
  const std::size_t n = x.rows();
  const std::size_t k = centers.rows();
  const std::size_t dim = x.cols();
  Run run;
  run.assignment.assign(n, -1);
  std::vector<double> dist(n, 0.0);
  std::vector<std::size_t> counts(k, 0);

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(x.row(i), centers.row(c));
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(c);
        }
      }
      if (run.assignment[i] != best) changed = true;
      run.assignment[i] = best;
      dist[i] = best_d;
      ++counts[static_cast<std::size_t>(best)];
    }
    // Re-seed empty clusters from the farthest point of a cluster that can spare it.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(run.assignment[i])] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      if (far == n) break;
      --counts[static_cast<std::size_t>(run.assignment[far])];
      run.assignment[far] = static_cast<int>(c);
      dist[far] = 0.0;
      counts[c] = 1;
      changed = true;
    }

    Matrix next(k, dim);
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = next.row(static_cast<std::size_t>(run.assignment[i]));
      auto src = x.row(i);
      for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (auto& v : next.row(c)) v /= static_cast<double>(counts[c]);
    }
    centers = std::move(next);

    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      wcss += squared_distance(x.row(i), centers.row(static_cast<std::size_t>(run.assignment[i])));
    run.trace.push_back(wcss);
    run.wcss = wcss;
    if (!changed && iter > 0) break;
  }
  return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, int k, int restarts, std::uint64_t seed, int max_iterations) {
  const auto n = points.rows();
  if (k <= 0) throw ValidationError("kmeans: k must be positive");
  if (static_cast<std::size_t>(k) > n)
    throw ValidationError("kmeans: k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " points");
  if (restarts <= 0) throw ValidationError("kmeans: restarts must be positive");

  KMeansResult best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(r + 1));
    Run run = lloyd(points, plus_plus_centers(points, k, rng), max_iterations);
    if (!have || run.wcss < best.wcss) {
      best.assignment = std::move(run.assignment);
      best.wcss = run.wcss;
      best.wcss_trace = std::move(run.trace);
      have = true;
    }
  }
  return best;
}

}  // namespace hmae
