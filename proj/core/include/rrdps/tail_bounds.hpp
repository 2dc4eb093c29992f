#ifndef RRDPS_TAIL_BOUNDS_HPP_
#define RRDPS_TAIL_BOUNDS_HPP_

#include <span>
#include <stdexcept>
#include <vector>

namespace rrdps {

/// Failure-probability budget behind a target secrecy parameter.
///
/// The secrecy parameter satisfies eps_sec = sqrt(2 (eta1 + eta2 + 2^-s)).
/// delta1 is the tail slack of the source-statistics bound and has to be
/// calibrated against a multiplier vector (see sanov_delta1); delta2(N) is
/// the per-N slack of the sampling bound.
struct SecurityBudget {
    double eps_sec = 0.0;
    double eta1 = 0.0;
    double eta2 = 0.0;
    double s = 0.0;       // smoothing exponent, 2^-s hashing failure
    double delta1 = 0.0;  // set by the caller after calibration

    // delta2(N) = ln(1/eta2) / N, the equality case of exp(-N d) <= eta2.
    double delta2(double n) const;
};

// Even three-way split eta1 = eta2 = 2^-s = eps_sec^2 / 6.
SecurityBudget split_budget(double eps_sec);

// Smallest slack with exp(-N delta2) <= eta2; requires 0 < eta2 < 1, N >= 1.
double bernstein_delta2(double eta2, double n);

struct SanovResult {
    double delta1 = 0.0;
    bool saturated = false;     // target divergence beyond the tilted family
    double lambda = 0.0;        // tilt parameter at the solution
    double divergence = 0.0;    // KL at the solution, bits
};

// Thrown when the multiplier vector is identically zero on the support: the
// deviation set is empty for every positive slack and no calibration exists.
class DegenerateMultiplierError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Calibrates the source-statistics slack delta1.
///
/// Finds the smallest delta1 >= 0 such that the minimum KL divergence to
/// b_{L,p_src}, over distributions Q on {0..L} with E_Q[nu] >= E_b[nu] +
/// delta1, equals log2(1/eta1) / n_em. The minimizer over such a half-space
/// is the exponentially tilted family Q_t(M) ~ b(M) e^{t nu_M}, so a 1-D
/// root find on the tilt parameter suffices; delta1 is then
/// E_{Q_t}[nu] - E_b[nu]. When the target divergence exceeds what the tilted
/// family can reach, the point-mass endpoint is returned with `saturated`
/// set; downstream consumers may still use the (conservative) slack.
///
/// Preconditions: nu has length L + 1, nu >= 0, and nu_M = 0 for all
/// M < L * p_src (the boundary M = L p_src itself is unrestricted).
SanovResult sanov_delta1(std::span<const double> nu, double eta1, double n_em,
                         int block_length, double p_src);

}  // namespace rrdps

#endif  // RRDPS_TAIL_BOUNDS_HPP_
