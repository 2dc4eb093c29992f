#include "rrdps/binomial.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace rrdps {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log_binomial_pmf(int trials, double p, int successes) {
    if (trials < 0) throw std::invalid_argument("trials must be non-negative");
    if (successes < 0 || successes > trials) {
        throw std::invalid_argument("successes out of range [0, " +
                                    std::to_string(trials) + "]: " +
                                    std::to_string(successes));
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("p must lie in [0, 1]");
    }
    if (p == 0.0) return successes == 0 ? 0.0 : kNegInf;
    if (p == 1.0) return successes == trials ? 0.0 : kNegInf;
    const double n = trials, k = successes;
    const double log_choose =
        std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    return log_choose + k * std::log(p) + (n - k) * std::log1p(-p);
}

double binomial_pmf(int trials, double p, int successes) {
    return std::exp(log_binomial_pmf(trials, p, successes));
}

std::vector<double> binomial_distribution(int trials, double p) {
    std::vector<double> out(trials + 1);
    for (int m = 0; m <= trials; ++m) out[m] = binomial_pmf(trials, p, m);
    return out;
}

std::vector<double> log_binomial_distribution(int trials, double p) {
    std::vector<double> out(trials + 1);
    for (int m = 0; m <= trials; ++m) out[m] = log_binomial_pmf(trials, p, m);
    return out;
}

}  // namespace rrdps
