#ifndef RRDPS_SOLVER_HPP_
#define RRDPS_SOLVER_HPP_

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrdps/alphabet.hpp"
#include "rrdps/constraints.hpp"

namespace rrdps {

struct SolverOptions {
    double tol = 1e-7;          // bits on the value, and KKT residual target
    int max_iterations = 100000;
    // Optional feasible starting point; callers that know the constraint
    // structure can seed the solver and skip most of the first-order phase.
    std::optional<std::vector<double>> warm_start;
};

struct SolveReport {
    std::vector<double> optimum;  // mass over the alphabet
    double value = 0.0;           // H(X|Y) at the optimum, bits
    double kkt_residual = 0.0;
    Multipliers multipliers;
    int iterations = 0;
    bool converged = false;
    // Certified distance to the true maximum (bits), from a linear bound.
    double optimality_gap = 0.0;
};

class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(const std::string& what, std::string constraint,
                    double violation)
        : std::runtime_error(what),
          constraint_description(std::move(constraint)),
          violation(violation) {}
    std::string constraint_description;
    double violation;
};

/// Maximizes H(X|Y) over the probability simplex on the alphabet subject
/// to the given constraints.
///
/// Frank-Wolfe with away steps over the polytope (linear subproblems via a
/// dense simplex LP) supplies globalization and active-set discovery; a
/// scaled Newton polish on the active set drives the KKT residual down.
/// The concave-gap constraint is handled by an outer loop that maximizes
/// over chord (inner, always feasible) approximations and certifies against
/// tangent (outer) relaxations, so the reported point is feasible for the
/// true constraint and the reported value is never optimistic.
SolveReport maximize_conditional_entropy(const Alphabet& alphabet,
                                         const ConstraintSet& constraints,
                                         const SolverOptions& options = {});

// Max over stationarity (infinity norm), complementary slackness, primal
// and dual feasibility violations. The gradient of H uses conditionals
// floored at 1e-12, which resolves empty tags; see conditional_entropy_gradient.
double kkt_residual(const Alphabet& alphabet, std::span<const double> p,
                    const ConstraintSet& constraints, const Multipliers& m);

struct FeasibilityReport {
    double total_violation = 0.0;
    std::vector<double> point;
    std::vector<double> inequality_violation;
    std::vector<double> equality_violation;
    double gap_violation = 0.0;
    std::string worst_description;
    double worst_violation = 0.0;
};

// Phase-1 solve: minimizes the total constraint violation over the simplex.
// The gap constraint enters through tangent relaxations, so a reported
// near-zero minimum may be marginally optimistic; points near the boundary
// count as feasible, never the other way around.
FeasibilityReport feasibility(const Alphabet& alphabet,
                              const ConstraintSet& constraints);

}  // namespace rrdps

#endif  // RRDPS_SOLVER_HPP_
