#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hmae {

struct LinearSvmModel {
  std::vector<double> weights;
  double bias = 0.0;
  double c = 1.0;

  bool operator==(const LinearSvmModel&) const = default;
};

using FeatureSet = std::span<const std::vector<double>>;

/// Binary linear SVM, minimizing 0.5*||w||^2 + c * sum_i hinge_i with the bias
/// unregularized.
///
/// Solver: projected stochastic subgradient over (positive, negative) pairs.
/// Each step draws one positive and one negative from per-epoch shuffles and
/// weights their hinge subgradients by the class sizes, so the step is an
/// unbiased estimate of the full subgradient. Step size 1/t, w projected onto
/// the ball that must contain the optimum, iterates averaged over the second
/// half of training. An epoch is max(|pos|, |neg|) steps.
///
/// Throws ValidationError for empty inputs, c <= 0 or mixed dimensions.
LinearSvmModel train_linear_svm(FeatureSet pos, FeatureSet neg, double c, int epochs,
                                std::uint64_t seed);

/// w.x + b. Throws ValidationError on dimension mismatch.
double svm_score(const LinearSvmModel& model, std::span<const double> x);

/// Primal objective 0.5*||w||^2 + c * sum hinge over both sets.
double svm_objective(const LinearSvmModel& model, FeatureSet pos, FeatureSet neg);

}  // namespace hmae
