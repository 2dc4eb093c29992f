#ifndef RRDPS_TOOLS_RUN_COMMANDS_HPP_
#define RRDPS_TOOLS_RUN_COMMANDS_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace rrdps::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitParameterError = 2;
inline constexpr int kExitSolverFailure = 3;
inline constexpr int kExitVerificationFailure = 4;

struct RunConfig {
    std::vector<int> block_lengths{15, 31, 63, 127};
    std::vector<double> etas{1e-1, 1e-2, 1e-3};
    std::vector<double> total_pulses{1e12, 1e13, 1e14, 1e15};
    double e_bit = 0.03;
    double f_ec = 1.0;
    double eps_sec = 1e-15;
    double mu = 0.0;  // 0 means optimize
    bool optimize_mu = true;
    double tol = 1e-7;
    std::uint64_t seed = 1;

    // simulate
    double p_odd = 0.05;
    double n_em = 10000;
    std::string policy = "honest";
    double policy_rate = 0.3;
    int band_lo = 1;
    int band_hi = 1 << 20;

    // verify
    int trials = 2000;
    int lemma_seeds = 10;
    double eta12 = 1e-3;
};

int run_asymptotic(const RunConfig& config, std::ostream& out);
int run_finite(const RunConfig& config, std::ostream& out);
int run_simulate(const RunConfig& config, std::ostream& out);
int run_verify(const RunConfig& config, std::ostream& out);

}  // namespace rrdps::cli

#endif  // RRDPS_TOOLS_RUN_COMMANDS_HPP_
