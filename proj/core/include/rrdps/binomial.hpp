#ifndef RRDPS_BINOMIAL_HPP_
#define RRDPS_BINOMIAL_HPP_

#include <vector>

namespace rrdps {

// Natural-log pmf of Binomial(L, p) at M; -inf where the mass is zero.
// Evaluated through lgamma so it stays finite for L up to a few hundred.
double log_binomial_pmf(int trials, double p, int successes);

// C(L, M) p^M (1-p)^(L-M), computed in log space.
double binomial_pmf(int trials, double p, int successes);

// The full distribution b_{L,p} as a vector of length L + 1.
std::vector<double> binomial_distribution(int trials, double p);

// Natural-log version of the vector above.
std::vector<double> log_binomial_distribution(int trials, double p);

}  // namespace rrdps

#endif  // RRDPS_BINOMIAL_HPP_
