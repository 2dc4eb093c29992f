#ifndef RRDPS_ENTROPY_HPP_
#define RRDPS_ENTROPY_HPP_

#include <span>
#include <vector>

#include "rrdps/alphabet.hpp"
#include "rrdps/distribution.hpp"

namespace rrdps {

// All entropic quantities are in bits. Terms with zero probability follow
// the 0 log 0 = 0 convention; masses below 1e-300 count as exact zero.

// h(x) = -x log2 x - (1-x) log2 (1-x).
double binary_entropy(double x);

// H(X|Y) of the (X, Y) joint induced through the tag map. Tags with zero
// mass contribute nothing.
double conditional_entropy(const Alphabet& alphabet, std::span<const double> mass);
double conditional_entropy(const JointDistribution& p);

// Gradient of H(X|Y) with respect to the mass vector:
// d H / d P(w) = -log2 P(x_w | y_w). Conditionals below `floor` are lifted
// to `floor` for the evaluation only, and empty tags use the uniform limit;
// the gradient diverges at zero conditional mass but the optima of this
// problem family are interior in x|y wherever a tag carries mass.
void conditional_entropy_gradient(const Alphabet& alphabet,
                                  std::span<const double> mass,
                                  std::span<double> grad,
                                  double floor = 1e-12);

// KL divergence sum q log2(q / b); +infinity when the support of q is not
// contained in the support of b.
double kl_divergence(std::span<const double> q, std::span<const double> b);

}  // namespace rrdps

#endif  // RRDPS_ENTROPY_HPP_
