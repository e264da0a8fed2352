#include "hmae/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hmae/error.hpp"
#include "hmae/linalg.hpp"

namespace hmae {

namespace {

std::size_t common_dim(FeatureSet pos, FeatureSet neg) {
  const std::size_t dim = pos.front().size();
  for (auto set : {pos, neg})
    for (const auto& x : set)
      if (x.size() != dim)
        throw ValidationError("train_linear_svm: mixed feature dimensions " + std::to_string(dim) +
                              " and " + std::to_string(x.size()));
  return dim;
}

double max_norm(FeatureSet pos, FeatureSet neg) {
  double r = 0.0;
  for (auto set : {pos, neg})
    for (const auto& x : set) r = std::max(r, std::sqrt(dot(x, x)));
  return r;
}

// Cycles through a set in a fresh shuffled order every pass.
class Shuffler {
 public:
  Shuffler(std::size_t n, std::mt19937_64& rng) : order_(n), rng_(rng) {
    std::iota(order_.begin(), order_.end(), 0);
    reshuffle();
  }
  std::size_t next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }
  std::vector<std::size_t> order_;
  std::mt19937_64& rng_;
  std::size_t pos_ = 0;
};

}  // namespace

LinearSvmModel train_linear_svm(FeatureSet pos, FeatureSet neg, double c, int epochs,
                                std::uint64_t seed) {
  if (pos.empty() || neg.empty()) throw ValidationError("train_linear_svm: need positives and negatives");
  if (!(c > 0.0)) throw ValidationError("train_linear_svm: c must be > 0");
  if (epochs <= 0) throw ValidationError("train_linear_svm: epochs must be positive");
  const std::size_t dim = common_dim(pos, neg);

  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  // 0.5*||w*||^2 <= F(0, 0) = c * (np + nn), and the optimal bias cannot leave
  // [-1 - R*|w|, 1 + R*|w|] without strictly increasing the objective.
  const double w_radius = std::sqrt(2.0 * c * (np + nn));
  const double b_radius = 1.0 + max_norm(pos, neg) * w_radius;

  std::mt19937_64 rng(seed);
  Shuffler pick_pos(pos.size(), rng);
  Shuffler pick_neg(neg.size(), rng);

  const std::size_t steps_per_epoch = std::max(pos.size(), neg.size());
  const std::size_t total = steps_per_epoch * static_cast<std::size_t>(epochs);
  const std::size_t average_from = total / 2 + 1;

  std::vector<double> w(dim, 0.0), w_sum(dim, 0.0);
  double b = 0.0, b_sum = 0.0;
  std::size_t averaged = 0;

  for (std::size_t t = 1; t <= total; ++t) {
    const auto& xp = pos[pick_pos.next()];
    const auto& xn = neg[pick_neg.next()];
    const bool viol_p = dot(w, xp) + b < 1.0;
    const bool viol_n = -(dot(w, xn) + b) < 1.0;
    const double eta = 1.0 / static_cast<double>(t);
    const double shrink = 1.0 - eta;
    const double gp = viol_p ? eta * c * np : 0.0;
    const double gn = viol_n ? eta * c * nn : 0.0;

    double norm2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      w[d] = shrink * w[d] + gp * xp[d] - gn * xn[d];
      norm2 += w[d] * w[d];
    }
    b += gp - gn;
    if (norm2 > w_radius * w_radius) {
      const double s = w_radius / std::sqrt(norm2);
      for (auto& v : w) v *= s;
    }
    b = std::clamp(b, -b_radius, b_radius);

    if (t >= average_from) {
      for (std::size_t d = 0; d < dim; ++d) w_sum[d] += w[d];
      b_sum += b;
      ++averaged;
    }
  }

  LinearSvmModel model;
  model.c = c;
  model.weights.resize(dim);
  const double inv = 1.0 / static_cast<double>(averaged);
  for (std::size_t d = 0; d < dim; ++d) model.weights[d] = w_sum[d] * inv;
  model.bias = b_sum * inv;
  return model;
}

double svm_score(const LinearSvmModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size())
    throw ValidationError("svm_score: feature dimension " + std::to_string(x.size()) +
                          " does not match model dimension " + std::to_string(model.weights.size()));
  return dot(model.weights, x) + model.bias;
}

double svm_objective(const LinearSvmModel& model, FeatureSet pos, FeatureSet neg) {
  double hinge = 0.0;
  for (const auto& x : pos) hinge += std::max(0.0, 1.0 - svm_score(model, x));
  for (const auto& x : neg) hinge += std::max(0.0, 1.0 + svm_score(model, x));
  return 0.5 * dot(model.weights, model.weights) + model.c * hinge;
}

}  // namespace hmae
