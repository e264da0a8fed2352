#include <doctest.h>

#include <cmath>
#include <limits>

#include "generators.hpp"
#include "hmae/eigen.hpp"
#include "hmae/error.hpp"
#include "hmae/kmeans.hpp"
#include "hmae/spectral.hpp"
#include "hmae/svm.hpp"

using namespace hmae;

namespace {

Matrix reconstruct(const EigenDecomposition& e) {
  const std::size_t n = e.values.size();
  Matrix lambda(n, n);
  for (std::size_t i = 0; i < n; ++i) lambda(i, i) = e.values[i];
  return e.vectors * lambda * e.vectors.transpose();
}

Matrix rows(const std::vector<std::vector<double>>& pts) {
  Matrix m(pts.size(), pts.front().size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts[i].size(); ++j) m(i, j) = pts[i][j];
  return m;
}

double wcss_of(const std::vector<std::vector<double>>& pts, const std::vector<int>& assign, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    std::vector<double> mean(pts[0].size(), 0.0);
    int n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (assign[i] == c) {
        ++n;
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += pts[i][d];
      }
    if (n == 0) continue;
    for (auto& m : mean) m /= n;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (assign[i] == c) total += squared_distance(pts[i], mean);
  }
  return total;
}

}  // namespace

TEST_CASE("sym_eig on identity and diagonal matrices") {
  SymMatrix id(3);
  for (std::size_t i = 0; i < 3; ++i) id.set(i, i, 1.0);
  const auto e = sym_eig(id);
  CHECK(e.values == std::vector<double>{1.0, 1.0, 1.0});

  SymMatrix d(3);
  d.set(0, 0, 3.0);
  d.set(1, 1, 1.0);
  d.set(2, 2, 2.0);
  const auto f = sym_eig(d);
  CHECK(f.values == std::vector<double>{3.0, 2.0, 1.0});
  CHECK(std::abs(f.vectors(0, 0)) == 1.0);
  CHECK(std::abs(f.vectors(2, 1)) == 1.0);
  CHECK(std::abs(f.vectors(1, 2)) == 1.0);
}

TEST_CASE("sym_eig reconstruction, trace and orthonormality on random matrices") {
  testing::Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = static_cast<std::size_t>(testing::uniform_int(rng, 2, 20));
    const auto a = testing::random_symmetric(rng, n);
    const auto e = sym_eig(a);
    CHECK((a.to_matrix() - reconstruct(e)).frobenius_norm() <= 1e-8);
    const auto gram = e.vectors.transpose() * e.vectors;
    CHECK((gram - Matrix::identity(n)).max_abs() <= 1e-8);
    double trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      trace += a(i, i);
      sum += e.values[i];
    }
    CHECK(std::abs(trace - sum) <= 1e-8 * std::max(1.0, a.frobenius_norm()));
    CHECK(std::is_sorted(e.values.rbegin(), e.values.rend()));
  }
}

TEST_CASE("sym_eig rejects non-finite entries") {
  SymMatrix a(2);
  a.set(0, 1, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(sym_eig(a), ValidationError);
}

TEST_CASE("kmeans with k equal to the point count isolates every point") {
  const std::vector<std::vector<double>> pts{{0, 0}, {1, 0}, {0, 1}, {5, 5}};
  const auto r = kmeans(rows(pts), 4, 3, 1);
  CHECK(r.wcss == 0.0);
  CHECK(count_clusters(r.assignment) == 4);
}

TEST_CASE("kmeans on two separated blobs matches the optimal 2-partition") {
  testing::Rng rng(4);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({testing::uniform(rng, 0, 1), testing::uniform(rng, 0, 1)});
  for (int i = 0; i < 5; ++i) pts.push_back({testing::uniform(rng, 10, 11), testing::uniform(rng, 10, 11)});
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_assign;
  for (int mask = 1; mask < (1 << 10) - 1; ++mask) {
    std::vector<int> assign(10);
    for (int i = 0; i < 10; ++i) assign[static_cast<std::size_t>(i)] = (mask >> i) & 1;
    const double w = wcss_of(pts, assign, 2);
    if (w < best) {
      best = w;
      best_assign = assign;
    }
  }
  const auto r = kmeans(rows(pts), 2, 5, 9);
  CHECK(canonical_labels(r.assignment) == canonical_labels(best_assign));
  CHECK(r.wcss == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("kmeans on identical points has zero WCSS") {
  const std::vector<std::vector<double>> pts(6, {2.0, 3.0});
  const auto r = kmeans(rows(pts), 2, 3, 0);
  CHECK(r.wcss == 0.0);
}

TEST_CASE("kmeans rejects k beyond the point count") {
  CHECK_THROWS_AS(kmeans(rows({{0.0}, {1.0}}), 3, 1, 0), ValidationError);
}

TEST_CASE("kmeans WCSS never increases across Lloyd iterations") {
  testing::Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({testing::uniform(rng, 0, 5), testing::uniform(rng, 0, 5)});
    const auto r = kmeans(rows(pts), testing::uniform_int(rng, 2, 6), 3, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 1; i < r.wcss_trace.size(); ++i) CHECK(r.wcss_trace[i] <= r.wcss_trace[i - 1] + 1e-12);
    CHECK(kmeans(rows(pts), 3, 3, 5).assignment == kmeans(rows(pts), 3, 3, 5).assignment);
  }
}

TEST_CASE("spectral clustering recovers exact blocks") {
  testing::Rng rng(0);
  const auto truth = testing::blocks(3, 6);
  const auto a = testing::block_affinity(rng, truth, 0.0);
  CHECK(testing::adjusted_rand_index(spectral_cluster(a, 3, 1), truth) == 1.0);
}

TEST_CASE("spectral clustering with one cluster") {
  SymMatrix ones(5, 1.0);
  CHECK(spectral_cluster(ones, 1, 0) == std::vector<int>(5, 0));
}

TEST_CASE("spectral clustering under off-block noise") {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    testing::Rng rng(seed);
    const auto truth = testing::blocks(3, 10);
    const auto a = testing::block_affinity(rng, truth, 0.05);
    good += testing::adjusted_rand_index(spectral_cluster(a, 3, seed), truth) >= 0.95 ? 1 : 0;
  }
  CHECK(good == 20);
}

TEST_CASE("spectral clustering isolates zero-degree nodes") {
  SymMatrix a(5, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) a.set(i, j, (i < 2) == (j < 2) ? 1.0 : 0.0);
  const auto labels = spectral_cluster(a, 3, 2);
  CHECK(count_clusters(labels) == 3);
  CHECK(labels[0] == labels[1]);
  CHECK(labels[2] == labels[3]);
  CHECK(labels[4] != labels[0]);
  CHECK(labels[4] != labels[2]);
}

TEST_CASE("spectral clustering is invariant to positive scaling") {
  testing::Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto truth = testing::blocks(3, 5);
    const auto a = testing::block_affinity(rng, truth, 0.3);
    const double factor = testing::uniform(rng, 0.1, 10.0);
    CHECK(spectral_cluster(a, 3, 7) == spectral_cluster(a.scaled(factor), 3, 7));
  }
}

TEST_CASE("spectral clustering rejects negative affinities") {
  SymMatrix a(3, 1.0);
  a.set(0, 1, -0.5);
  CHECK_THROWS_AS(spectral_cluster(a, 2, 0), ValidationError);
  CHECK_THROWS_AS(spectral_cluster(SymMatrix(2, 1.0), 3, 0), ValidationError);
}

TEST_CASE("svm separates a single pair with unit margin") {
  const std::vector<std::vector<double>> pos{{1.0, 0.0}}, neg{{-1.0, 0.0}};
  const auto m = train_linear_svm(pos, neg, 100.0, 2000, 3);
  CHECK(svm_score(m, pos[0]) >= 1.0 - 1e-3);
  CHECK(svm_score(m, neg[0]) <= -(1.0 - 1e-3));
}

TEST_CASE("svm on a coincident pair puts the origin on the boundary") {
  const double c = 0.7;
  const std::vector<std::vector<double>> pos{{0.0, 0.0}}, neg{{0.0, 0.0}};
  const auto m = train_linear_svm(pos, neg, c, 500, 1);
  const std::vector<double> origin{0.0, 0.0};
  CHECK(svm_score(m, origin) == doctest::Approx(0.0).epsilon(1e-6));
  // One unit hinge on each side: the objective is 2c.
  CHECK(svm_objective(m, pos, neg) == doctest::Approx(2.0 * c).epsilon(1e-6));
}

TEST_CASE("svm fits 50 separable random points and self-converges") {
  testing::Rng rng(31);
  const std::vector<double> normal{0.6, -0.8, 0.3};
  std::vector<std::vector<double>> pos, neg;
  while (pos.size() + neg.size() < 50) {
    std::vector<double> x{testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1)};
    const double side = dot(normal, x);
    if (std::abs(side) < 0.2) continue;
    (side > 0 ? pos : neg).push_back(x);
  }
  const auto m = train_linear_svm(pos, neg, 10.0, 400, 2);
  for (const auto& x : pos) CHECK(svm_score(m, x) > 0.0);
  for (const auto& x : neg) CHECK(svm_score(m, x) < 0.0);
  const auto longer = train_linear_svm(pos, neg, 10.0, 800, 2);
  const double f1 = svm_objective(m, pos, neg), f2 = svm_objective(longer, pos, neg);
  CHECK(std::abs(f1 - f2) <= 0.02 * f2);
  LinearSvmModel zero{std::vector<double>(3, 0.0), 0.0, 10.0};
  CHECK(f1 <= svm_objective(zero, pos, neg));
  CHECK(train_linear_svm(pos, neg, 10.0, 400, 2) == m);
}

TEST_CASE("svm objective never exceeds the zero model on random data") {
  testing::Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> pos, neg;
    for (int i = testing::uniform_int(rng, 1, 8); i > 0; --i)
      pos.push_back({testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1)});
    for (int i = testing::uniform_int(rng, 1, 8); i > 0; --i)
      neg.push_back({testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1)});
    const double c = testing::uniform(rng, 0.1, 5.0);
    const auto m = train_linear_svm(pos, neg, c, 300, static_cast<std::uint64_t>(trial));
    LinearSvmModel zero{{0.0, 0.0}, 0.0, c};
    CHECK(svm_objective(m, pos, neg) <= svm_objective(zero, pos, neg) + 1e-9);
  }
}

TEST_CASE("svm_score arithmetic and guards") {
  LinearSvmModel m{{0.0, 0.0}, 0.7, 1.0};
  const std::vector<double> x{2.0, 3.0};
  CHECK(svm_score(m, x) == 0.7);
  m = {{1.0, 1.0}, 0.0, 1.0};
  CHECK(svm_score(m, x) == 5.0);
  const std::vector<double> short_x{1.0};
  CHECK_THROWS_AS(svm_score(m, short_x), ValidationError);
  const std::vector<std::vector<double>> none;
  const std::vector<std::vector<double>> some{{1.0}};
  CHECK_THROWS_AS(train_linear_svm(none, some, 1.0, 10, 0), ValidationError);
  CHECK_THROWS_AS(train_linear_svm(some, some, 0.0, 10, 0), ValidationError);
}
