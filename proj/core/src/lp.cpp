#include "rrdps/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rrdps {

namespace {
constexpr double kPivotEps = 1e-9;
constexpr double kCostEps = 1e-9;
constexpr int kMaxPivots = 200000;
}  // namespace

LpInstance::LpInstance(int num_vars, std::vector<std::vector<double>> a_ub,
                       std::vector<double> b_ub,
                       std::vector<std::vector<double>> a_eq,
                       std::vector<double> b_eq)
    : n_(num_vars),
      a_ub_(std::move(a_ub)),
      a_eq_(std::move(a_eq)),
      b_ub_(std::move(b_ub)),
      b_eq_(std::move(b_eq)) {
    if (a_ub_.size() != b_ub_.size() || a_eq_.size() != b_eq_.size()) {
        throw std::invalid_argument("LP: constraint row/rhs count mismatch");
    }
    for (const auto& r : a_ub_)
        if (static_cast<int>(r.size()) != n_)
            throw std::invalid_argument("LP: row width mismatch");
    for (const auto& r : a_eq_)
        if (static_cast<int>(r.size()) != n_)
            throw std::invalid_argument("LP: row width mismatch");
}

void LpInstance::build_tableau() {
    const int m_ub = static_cast<int>(a_ub_.size());
    const int m_eq = static_cast<int>(a_eq_.size());
    rows_ = m_ub + m_eq;
    // Columns: structural, slacks, one artificial per row, rhs.
    art_begin_ = n_ + m_ub;
    cols_ = art_begin_ + rows_ + 1;
    tab_.assign(rows_, std::vector<double>(cols_, 0.0));
    basis_.assign(rows_, -1);

    for (int i = 0; i < m_ub; ++i) {
        double sign = b_ub_[i] < 0.0 ? -1.0 : 1.0;
        for (int j = 0; j < n_; ++j) tab_[i][j] = sign * a_ub_[i][j];
        tab_[i][n_ + i] = sign;  // slack
        tab_[i][cols_ - 1] = sign * b_ub_[i];
    }
    for (int i = 0; i < m_eq; ++i) {
        const int r = m_ub + i;
        double sign = b_eq_[i] < 0.0 ? -1.0 : 1.0;
        for (int j = 0; j < n_; ++j) tab_[r][j] = sign * a_eq_[i][j];
        tab_[r][cols_ - 1] = sign * b_eq_[i];
    }
    // Start from the all-artificial basis; slack columns with +1 could be
    // used directly but a uniform start keeps the code simple.
    for (int i = 0; i < rows_; ++i) {
        tab_[i][art_begin_ + i] = 1.0;
        basis_[i] = art_begin_ + i;
    }
}

void LpInstance::set_cost_row(std::span<const double> minimize_cost) {
    cost_coef_.assign(cols_ - 1, 0.0);
    for (size_t j = 0; j < minimize_cost.size(); ++j) cost_coef_[j] = minimize_cost[j];
    cost_.assign(cols_, 0.0);
    for (int j = 0; j < cols_ - 1; ++j) cost_[j] = cost_coef_[j];
    for (int i = 0; i < rows_; ++i) {
        const double cb = cost_coef_[basis_[i]];
        if (cb == 0.0) continue;
        for (int j = 0; j < cols_; ++j) cost_[j] -= cb * tab_[i][j];
    }
}

LpInstance::PivotOutcome LpInstance::iterate(int max_iters) {
    int stall = 0;
    bool bland = false;
    for (int it = 0; it < max_iters; ++it) {
        // Entering column.
        int jin = -1;
        if (!bland) {
            double best = -kCostEps;
            for (int j = 0; j < cols_ - 1; ++j) {
                if (cost_[j] < best) {
                    best = cost_[j];
                    jin = j;
                }
            }
        } else {
            for (int j = 0; j < cols_ - 1; ++j) {
                if (cost_[j] < -kCostEps) {
                    jin = j;
                    break;
                }
            }
        }
        if (jin < 0) return PivotOutcome::optimal;

        // Ratio test.
        int iout = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (int i = 0; i < rows_; ++i) {
            const double a = tab_[i][jin];
            if (a <= kPivotEps) continue;
            const double ratio = tab_[i][cols_ - 1] / a;
            if (ratio < best_ratio - 1e-12 ||
                (ratio < best_ratio + 1e-12 &&
                 (iout < 0 || basis_[i] < basis_[iout]))) {
                best_ratio = ratio;
                iout = i;
            }
        }
        if (iout < 0) return PivotOutcome::unbounded;
        if (best_ratio < 1e-12) {
            if (++stall > 2 * rows_ + 50) bland = true;
        } else {
            stall = 0;
        }

        // Pivot.
        auto& prow = tab_[iout];
        const double piv = prow[jin];
        for (int j = 0; j < cols_; ++j) prow[j] /= piv;
        for (int i = 0; i < rows_; ++i) {
            if (i == iout) continue;
            const double f = tab_[i][jin];
            if (f == 0.0) continue;
            auto& row = tab_[i];
            for (int j = 0; j < cols_; ++j) row[j] -= f * prow[j];
            row[jin] = 0.0;
        }
        const double fc = cost_[jin];
        if (fc != 0.0) {
            for (int j = 0; j < cols_; ++j) cost_[j] -= fc * prow[j];
            cost_[jin] = 0.0;
        }
        basis_[iout] = jin;
    }
    return PivotOutcome::limit;
}

bool LpInstance::run_phase1() {
    build_tableau();
    std::vector<double> phase1_cost(cols_ - 1, 0.0);
    for (int i = 0; i < rows_; ++i) phase1_cost[art_begin_ + i] = 1.0;
    set_cost_row(phase1_cost);
    const PivotOutcome out = iterate(kMaxPivots);
    if (out != PivotOutcome::optimal) return false;
    double infeas = 0.0;
    for (int i = 0; i < rows_; ++i) {
        if (basis_[i] >= art_begin_) infeas += tab_[i][cols_ - 1];
    }
    if (infeas > 1e-8) return false;

    // Drive remaining zero-level artificials out of the basis where possible.
    for (int i = 0; i < rows_; ++i) {
        if (basis_[i] < art_begin_) continue;
        int jin = -1;
        for (int j = 0; j < art_begin_; ++j) {
            if (std::abs(tab_[i][j]) > kPivotEps) {
                jin = j;
                break;
            }
        }
        if (jin < 0) continue;  // redundant row
        auto& prow = tab_[i];
        const double piv = prow[jin];
        for (int j = 0; j < cols_; ++j) prow[j] /= piv;
        for (int k = 0; k < rows_; ++k) {
            if (k == i) continue;
            const double f = tab_[k][jin];
            if (f == 0.0) continue;
            for (int j = 0; j < cols_; ++j) tab_[k][j] -= f * prow[j];
            tab_[k][jin] = 0.0;
        }
        basis_[i] = jin;
    }
    return true;
}

bool LpInstance::feasible() {
    if (!phase1_done_) {
        is_feasible_ = run_phase1();
        phase1_done_ = true;
    }
    return is_feasible_;
}

LpResult LpInstance::maximize(std::span<const double> objective) {
    if (static_cast<int>(objective.size()) != n_) {
        throw std::invalid_argument("LP: objective size mismatch");
    }
    LpResult res;
    if (!feasible()) {
        res.status = LpStatus::infeasible;
        return res;
    }
    // Minimize the negated objective; artificial columns are blocked by a
    // prohibitive cost so they never re-enter.
    std::vector<double> cost(cols_ - 1, 0.0);
    for (int j = 0; j < n_; ++j) cost[j] = -objective[j];
    double big = 1.0;
    for (int j = 0; j < n_; ++j) big = std::max(big, std::abs(objective[j]));
    for (int i = 0; i < rows_; ++i) cost[art_begin_ + i] = 1e6 * big;
    set_cost_row(cost);

    const PivotOutcome out = iterate(kMaxPivots);
    if (out == PivotOutcome::unbounded) {
        res.status = LpStatus::unbounded;
        return res;
    }
    if (out == PivotOutcome::limit) {
        res.status = LpStatus::iteration_limit;
        return res;
    }
    res.status = LpStatus::optimal;
    res.x.assign(n_, 0.0);
    for (int i = 0; i < rows_; ++i) {
        if (basis_[i] < n_) res.x[basis_[i]] = tab_[i][cols_ - 1];
    }
    res.value = 0.0;
    for (int j = 0; j < n_; ++j) res.value += objective[j] * res.x[j];
    return res;
}

}  // namespace rrdps
