#include <CLI11.hpp>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "run_commands.hpp"

namespace {

using rrdps::cli::RunConfig;

std::vector<double> parse_list(const std::string& raw, const char* what) {
    std::vector<double> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        size_t pos = 0;
        const double v = std::stod(item, &pos);
        if (pos != item.size()) {
            throw CLI::ValidationError(std::string(what) +
                                       ": not a number: " + item);
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw CLI::ValidationError(std::string(what) + ": empty list");
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Key-rate engine and verification harness for the round-robin "
        "differential phase shift protocol"};
    app.require_subcommand(1);
    app.set_config("--config")->configurable(false);

    RunConfig config;
    std::string l_list = "15,31,63,127";
    std::string eta_list = "1e-1,1e-2,1e-3";
    std::string pulses_list = "1e12,1e13,1e14,1e15";
    std::string out_path;
    double mu_flag = -1.0;
    bool optimize_flag = false;

    app.add_option("--L", l_list, "Block length(s), comma separated")
        ->capture_default_str();
    app.add_option("--eta", eta_list, "Channel transmission(s), comma separated")
        ->capture_default_str();
    app.add_option("--ebit", config.e_bit, "Bit error rate")
        ->capture_default_str();
    app.add_option("--fec", config.f_ec, "Error-correction efficiency")
        ->capture_default_str();
    app.add_option("--eps-sec", config.eps_sec, "Target secrecy parameter")
        ->capture_default_str();
    app.add_option("--mu", mu_flag, "Fixed mean photon number");
    app.add_flag("--optimize-mu", optimize_flag,
                 "Optimize the mean photon number (default unless --mu)");
    app.add_option("--total-pulses", pulses_list,
                   "Total emitted pulses, comma separated (finite mode)")
        ->capture_default_str();
    app.add_option("--seed", config.seed, "Random seed")->capture_default_str();
    app.add_option("--out", out_path, "Output path (default: stdout)");
    app.add_option("--tol", config.tol, "Solver tolerance")
        ->capture_default_str();

    CLI::App* cmd_asym = app.add_subcommand(
        "asymptotic", "Asymptotic key rates over an (L, eta) grid");
    CLI::App* cmd_finite = app.add_subcommand(
        "finite", "Finite-size key rates over total emitted pulses");
    CLI::App* cmd_sim =
        app.add_subcommand("simulate", "Monte-Carlo run of the estimation protocol");
    CLI::App* cmd_verify = app.add_subcommand(
        "verify", "Concentration and pattern-count verification suite");

    cmd_sim->add_option("--podd", config.p_odd, "Odd-photon probability")
        ->capture_default_str();
    cmd_sim->add_option("--nem", config.n_em, "Number of emitted blocks")
        ->capture_default_str();
    cmd_sim
        ->add_option("--policy", config.policy,
                     "Adversary policy: honest or parity")
        ->capture_default_str();
    cmd_sim
        ->add_option("--policy-rate", config.policy_rate,
                     "Success probability of the honest policy")
        ->capture_default_str();
    cmd_sim->add_option("--band-lo", config.band_lo, "Parity band lower edge")
        ->capture_default_str();
    cmd_sim->add_option("--band-hi", config.band_hi, "Parity band upper edge")
        ->capture_default_str();

    cmd_verify
        ->add_option("--trials", config.trials,
                     "Monte-Carlo trials for the concentration checks")
        ->capture_default_str();
    cmd_verify
        ->add_option("--lemma-seeds", config.lemma_seeds,
                     "Random tag sequences per pattern-count check")
        ->capture_default_str();
    cmd_verify
        ->add_option("--eta12", config.eta12,
                     "Failure budget per concentration bound")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        std::vector<double> ls = parse_list(l_list, "--L");
        config.block_lengths.clear();
        for (double v : ls) config.block_lengths.push_back(static_cast<int>(v));
        config.etas = parse_list(eta_list, "--eta");
        config.total_pulses = parse_list(pulses_list, "--total-pulses");
        config.optimize_mu = optimize_flag || mu_flag <= 0.0;
        config.mu = mu_flag > 0.0 ? mu_flag : 0.0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : rrdps::cli::kExitParameterError;
    }

    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) {
            std::cerr << "cannot open output file: " << out_path << "\n";
            return rrdps::cli::kExitParameterError;
        }
    }
    std::ostream& out = out_path.empty() ? std::cout : file;

    try {
        if (cmd_asym->parsed()) return rrdps::cli::run_asymptotic(config, out);
        if (cmd_finite->parsed()) return rrdps::cli::run_finite(config, out);
        if (cmd_sim->parsed()) return rrdps::cli::run_simulate(config, out);
        if (cmd_verify->parsed()) return rrdps::cli::run_verify(config, out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return rrdps::cli::kExitParameterError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rrdps::cli::kExitSolverFailure;
    }
    return rrdps::cli::kExitParameterError;
}
