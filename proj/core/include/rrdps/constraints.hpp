#ifndef RRDPS_CONSTRAINTS_HPP_
#define RRDPS_CONSTRAINTS_HPP_

#include <optional>
#include <span>
#include <vector>

namespace rrdps {

// <coef, P> <= bound (inequality) or <coef, P> = bound (equality).
struct LinearConstraint {
    std::vector<double> coef;
    double bound = 0.0;

    double lhs(std::span<const double> p) const {
        double v = 0.0;
        for (size_t i = 0; i < coef.size(); ++i) v += coef[i] * p[i];
        return v;
    }
};

/// <g, P> <= delta/3 + sqrt((delta/3)^2 + 2 delta <q, P>), with q >= 0 so
/// the right-hand side is concave in P and the feasible set convex.
struct ConcaveGapConstraint {
    std::vector<double> g;
    std::vector<double> q;
    double delta = 0.0;

    double lhs(std::span<const double> p) const {
        double v = 0.0;
        for (size_t i = 0; i < g.size(); ++i) v += g[i] * p[i];
        return v;
    }
    double s_of(std::span<const double> p) const {
        double v = 0.0;
        for (size_t i = 0; i < q.size(); ++i) v += q[i] * p[i];
        return v;
    }
    double rhs_at_s(double s) const;
    // d rhs / d s; the gradient of the right-hand side is slope * q.
    double slope_at_s(double s) const;
    double rhs(std::span<const double> p) const { return rhs_at_s(s_of(p)); }
    // max(0, lhs - rhs).
    double violation(std::span<const double> p) const;
};

struct ConstraintSet {
    std::vector<LinearConstraint> inequalities;
    std::vector<LinearConstraint> equalities;
    std::optional<ConcaveGapConstraint> gap;
};

// Lagrange multipliers in the order of the owning ConstraintSet, plus the
// multiplier of the normalization constraint sum P = 1.
struct Multipliers {
    std::vector<double> inequality;
    std::vector<double> equality;
    double gap = 0.0;
    double normalization = 0.0;
};

}  // namespace rrdps

#endif  // RRDPS_CONSTRAINTS_HPP_
