#include "rrdps/tail_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rrdps/binomial.hpp"

namespace rrdps {

namespace {

const double kLn2 = std::log(2.0);

// Log-partition A(t) = ln sum_M b(M) e^{t nu_M} and its first two
// derivatives (mean and variance of nu under the tilted distribution),
// evaluated with a shifted log-sum-exp.
struct TiltStats {
    double log_partition;
    double mean;
    double variance;
};

TiltStats tilt_stats(std::span<const double> log_b, std::span<const double> nu,
                     double t) {
    const size_t n = log_b.size();
    double shift = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
        if (log_b[i] == -std::numeric_limits<double>::infinity()) continue;
        shift = std::max(shift, log_b[i] + t * nu[i]);
    }
    double z = 0.0, mean_acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (log_b[i] == -std::numeric_limits<double>::infinity()) continue;
        const double w = std::exp(log_b[i] + t * nu[i] - shift);
        z += w;
        mean_acc += w * nu[i];
    }
    const double mean = mean_acc / z;
    double var_acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (log_b[i] == -std::numeric_limits<double>::infinity()) continue;
        const double w = std::exp(log_b[i] + t * nu[i] - shift);
        const double d = nu[i] - mean;
        var_acc += w * d * d;
    }
    return TiltStats{shift + std::log(z), mean, var_acc / z};
}

// KL(Q_t || b) in bits: (t A'(t) - A(t)) / ln 2.
double tilted_divergence_bits(std::span<const double> log_b,
                              std::span<const double> nu, double t) {
    const TiltStats st = tilt_stats(log_b, nu, t);
    return (t * st.mean - st.log_partition) / kLn2;
}

}  // namespace

double SecurityBudget::delta2(double n) const { return bernstein_delta2(eta2, n); }

SecurityBudget split_budget(double eps_sec) {
    if (!(eps_sec > 0.0 && eps_sec < 1.0)) {
        throw std::invalid_argument("eps_sec must lie in (0, 1), got " +
                                    std::to_string(eps_sec));
    }
    SecurityBudget b;
    b.eps_sec = eps_sec;
    b.eta1 = eps_sec * eps_sec / 6.0;
    b.eta2 = b.eta1;
    b.s = std::log2(6.0 / (eps_sec * eps_sec));
    return b;
}

double bernstein_delta2(double eta2, double n) {
    if (!(eta2 > 0.0 && eta2 < 1.0)) {
        throw std::invalid_argument("eta2 must lie in (0, 1)");
    }
    if (!(n >= 1.0)) throw std::invalid_argument("N must be at least 1");
    // One rounding only: extended-precision log and divide, then narrow.
    const long double ln_inv = -logl(static_cast<long double>(eta2));
    return static_cast<double>(ln_inv / static_cast<long double>(n));
}

SanovResult sanov_delta1(std::span<const double> nu, double eta1, double n_em,
                         int block_length, double p_src) {
    const int L = block_length;
    if (static_cast<int>(nu.size()) != L + 1) {
        throw std::invalid_argument("nu must have length L + 1");
    }
    if (!(eta1 > 0.0 && eta1 <= 1.0)) {
        throw std::invalid_argument("eta1 must lie in (0, 1]");
    }
    if (!(n_em >= 1.0)) throw std::invalid_argument("N_em must be at least 1");
    if (!(p_src >= 0.0 && p_src <= 1.0)) {
        throw std::invalid_argument("p_src must lie in [0, 1]");
    }
    for (int m = 0; m <= L; ++m) {
        if (!(nu[m] >= 0.0)) {
            throw std::invalid_argument("nu must be non-negative");
        }
        if (m < L * p_src && nu[m] != 0.0) {
            throw std::invalid_argument("nu must vanish below L * p_src");
        }
    }

    const std::vector<double> log_b = log_binomial_distribution(L, p_src);

    bool all_zero = true;
    double nu_max = 0.0;
    for (int m = 0; m <= L; ++m) {
        if (log_b[m] == -std::numeric_limits<double>::infinity()) continue;
        if (nu[m] != 0.0) all_zero = false;
        nu_max = std::max(nu_max, nu[m]);
    }
    if (all_zero) {
        throw DegenerateMultiplierError(
            "nu is identically zero on the support of b; the deviation set is "
            "empty for every positive slack");
    }

    const double target = std::log2(1.0 / eta1) / n_em;  // bits
    const double base_mean = tilt_stats(log_b, nu, 0.0).mean;

    SanovResult res;
    if (target <= 0.0) {
        res.delta1 = 0.0;
        res.lambda = 0.0;
        res.divergence = 0.0;
        return res;
    }

    // Supremum of the divergence along the family: b conditioned on the
    // argmax set of nu.
    double log_mass_argmax = -std::numeric_limits<double>::infinity();
    for (int m = 0; m <= L; ++m) {
        if (log_b[m] == -std::numeric_limits<double>::infinity()) continue;
        if (nu[m] >= nu_max * (1.0 - 1e-15)) {
            if (log_mass_argmax == -std::numeric_limits<double>::infinity()) {
                log_mass_argmax = log_b[m];
            } else {
                const double hi = std::max(log_mass_argmax, log_b[m]);
                const double lo = std::min(log_mass_argmax, log_b[m]);
                log_mass_argmax = hi + std::log1p(std::exp(lo - hi));
            }
        }
    }
    const double sup_divergence = -log_mass_argmax / kLn2;

    if (target >= sup_divergence * (1.0 - 1e-12)) {
        res.delta1 = nu_max - base_mean;
        res.saturated = true;
        res.lambda = std::numeric_limits<double>::infinity();
        res.divergence = sup_divergence;
        return res;
    }

    // Bracket the tilt parameter, then bisect on the divergence.
    double t_hi = 1.0;
    for (int i = 0; i < 400 && tilted_divergence_bits(log_b, nu, t_hi) < target; ++i) {
        t_hi *= 2.0;
    }
    double t_lo = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double t_mid = 0.5 * (t_lo + t_hi);
        const double d = tilted_divergence_bits(log_b, nu, t_mid);
        if (std::abs(d - target) <= 1e-10 * std::max(1.0, target)) {
            t_lo = t_hi = t_mid;
            break;
        }
        (d < target ? t_lo : t_hi) = t_mid;
    }
    const double t = 0.5 * (t_lo + t_hi);
    const TiltStats st = tilt_stats(log_b, nu, t);
    res.delta1 = std::max(0.0, st.mean - base_mean);
    res.lambda = t / kLn2;  // exponent base 2 convention
    res.divergence = (t * st.mean - st.log_partition) / kLn2;
    return res;
}

}  // namespace rrdps
