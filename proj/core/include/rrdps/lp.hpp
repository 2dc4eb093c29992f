#ifndef RRDPS_LP_HPP_
#define RRDPS_LP_HPP_

#include <span>
#include <vector>

namespace rrdps {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpResult {
    LpStatus status = LpStatus::optimal;
    std::vector<double> x;
    double value = 0.0;
};

/// Dense two-phase tableau simplex over a fixed feasible region
///   { x >= 0 : A_ub x <= b_ub, A_eq x = b_eq }.
///
/// Phase 1 runs once on construction of the first solve; subsequent
/// maximize() calls with a new objective warm-start from the previous
/// basis, which makes repeated linear subproblems over the same polytope
/// cheap. Pivot selection is deterministic (largest reduced cost, lowest
/// index ties) with a Bland fallback against cycling.
class LpInstance {
public:
    LpInstance(int num_vars,
               std::vector<std::vector<double>> a_ub, std::vector<double> b_ub,
               std::vector<std::vector<double>> a_eq, std::vector<double> b_eq);

    int num_vars() const { return n_; }

    // Runs phase 1 if needed; true when the region is non-empty.
    bool feasible();

    LpResult maximize(std::span<const double> objective);

private:
    enum class PivotOutcome { moved, optimal, unbounded, limit };

    void build_tableau();
    void set_cost_row(std::span<const double> minimize_cost);
    PivotOutcome iterate(int max_iters);
    bool run_phase1();

    int n_ = 0;
    std::vector<std::vector<double>> a_ub_, a_eq_;
    std::vector<double> b_ub_, b_eq_;

    int rows_ = 0, cols_ = 0, art_begin_ = 0;
    std::vector<std::vector<double>> tab_;  // rows_ x cols_ (last col = rhs)
    std::vector<double> cost_;              // reduced-cost row, cols_ wide
    std::vector<double> cost_coef_;         // objective per column
    std::vector<int> basis_;
    bool phase1_done_ = false;
    bool is_feasible_ = false;
};

}  // namespace rrdps

#endif  // RRDPS_LP_HPP_
