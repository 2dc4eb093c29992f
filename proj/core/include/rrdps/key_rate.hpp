#ifndef RRDPS_KEY_RATE_HPP_
#define RRDPS_KEY_RATE_HPP_

#include <functional>
#include <vector>

#include "rrdps/solver.hpp"
#include "rrdps/tail_bounds.hpp"

namespace rrdps {

enum class SourceModel { poissonian, explicit_p_src };

/// Everything defining one protocol scenario.
struct ProtocolParams {
    int L = 3;                  // pulses per block
    double n_em = 0.0;          // emitted blocks (finite mode)
    double transmission = 1.0;  // overall channel transmission eta
    double mu = 0.0;            // mean photon number per pulse
    double e_bit = 0.0;         // bit error rate
    double f_ec = 1.0;          // error-correction efficiency
    double p_src_explicit = 0.0;
    SourceModel source_model = SourceModel::poissonian;

    // Odd-photon-number probability bound: e^-mu sinh(mu) for the
    // Poissonian source, the explicit value otherwise.
    double p_src() const;
    void validate() const;
};

/// Multiplier vectors parameterizing the deviation sets: nu over {0..L}
/// (non-negative, zero below L p_src) and xi over the valid (M, U) pairs
/// in alphabet order, with |xi| <= 1 after the heuristic normalization.
struct MultiplierSet {
    std::vector<double> nu;
    std::vector<double> xi;
    bool xi_degenerate = false;  // xi identically zero
};

struct KeyRateResult {
    double h_pa = 1.0;        // privacy-amplification fraction, bits
    double n_rounds = 0.0;    // N used for the finite bookkeeping
    double n_fin = 0.0;       // final key length, bits
    double net_rate = 0.0;    // key bits per emitted pulse
    SolveReport report;
    double baseline_h_pa = 0.0;   // original-analysis fraction (asymptotic)
    double baseline_rate = 0.0;   // rate with the baseline fraction
    double delta1 = 0.0;          // calibrated slacks (finite mode)
    double delta2 = 0.0;
    bool no_key = false;
};

// R = 1/2 eta mu L exp(-eta mu L); dark counts neglected.
double block_detection_rate(const ProtocolParams& params);

struct AsymptoticSolution {
    double h_pa = 0.0;
    MultiplierSet multipliers;
    SolveReport report;
};

// Maximize H(X|Y) subject to P_M(M) <= b(M)/R for M >= L p_src and the
// pairwise sampling equalities P(M,U,1) = c(M,U) P(M,U,*); returns the
// optimum together with the KKT multipliers.
AsymptoticSolution asymptotic_hpa(int L, double p_src, double R,
                                  const SolverOptions& options = {});

struct FiniteSolution {
    double h_pa = 1.0;  // after the ceiling rule: ceil(N maxH) / N
    double max_h = 1.0; // raw optimum
    SolveReport report;
};

// Finite-size program with the aggregated nu-constraint and the deviation
// bound on the sampling statistic; applies the ceiling rule.
FiniteSolution finite_hpa(const ProtocolParams& params, double n_rounds,
                          const SecurityBudget& budget, const MultiplierSet& m,
                          const SolverOptions& options = {});

// nu unchanged; xi scaled by 1/max|xi| so the constraint family is admissible.
MultiplierSet heuristic_multipliers(const MultiplierSet& asymptotic);

// Original-analysis fraction: the average phase-error rate of the top-R
// probability mass of b_{L,p_src}, taken from the largest M downward with
// fractional inclusion at the boundary, clamped to [0, 1/2].
double original_hpa_baseline(int L, double p_src, double R);

// N_fin = max{N (1 - H_PA(N) - s/N), 0} rounded down.
double finite_key_length(double n_rounds, double h_pa_n, double smoothing_s);

// Rate bookkeeping; negative rates are reported as zero.
KeyRateResult net_rate_asymptotic(const ProtocolParams& params, double h_pa);
KeyRateResult net_rate_finite(const ProtocolParams& params, double h_pa_n,
                              double n_rounds, const SecurityBudget& budget);

// Full chains at a fixed mu. When `reuse_multipliers` is supplied the
// finite chain skips the per-mu asymptotic solve and calibrates against the
// given vectors instead (any admissible choice yields a valid bound; the
// heuristic ones are merely the best known). Entries of nu below the
// current L p_src are zeroed to keep the vector admissible.
KeyRateResult asymptotic_key_rate(const ProtocolParams& params,
                                  const SolverOptions& options = {});
KeyRateResult finite_key_rate(const ProtocolParams& params,
                              const SecurityBudget& budget,
                              const SolverOptions& options = {},
                              const MultiplierSet* reuse_multipliers = nullptr);

enum class RateMode { asymptotic, finite };

struct MuOptResult {
    double mu = 0.0;
    KeyRateResult result;
    bool no_key = false;
    bool unimodal = true;
};

// Golden-section maximization on log mu over [1e-4, 10/(eta L)], seeded and
// sanity-checked by a 32-point coarse scan.
MuOptResult optimize_mu(const ProtocolParams& params, RateMode mode,
                        const SecurityBudget* budget = nullptr,
                        const SolverOptions& options = {});

struct ScalarMaxResult {
    double x = 0.0;
    double value = 0.0;
    bool unimodal = true;
};

// The 1-D searcher behind optimize_mu: coarse scan plus golden section on
// log x. Exposed for direct testing against closed forms.
ScalarMaxResult golden_section_max_log(const std::function<double(double)>& f,
                                       double lo, double hi, int coarse_points,
                                       double rel_tol);

}  // namespace rrdps

#endif  // RRDPS_KEY_RATE_HPP_
