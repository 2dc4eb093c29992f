#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "oracles.hpp"
#include "rrdps/binomial.hpp"
#include "rrdps/entropy.hpp"
#include "rrdps/rng.hpp"
#include "rrdps/solver.hpp"

using namespace rrdps;

namespace {

// The Eq.-49-shaped instance used across these tests, built directly.
ConstraintSet asymptotic_instance(const Alphabet& a, double p_src, double r) {
    const int L = a.block_length();
    const auto b = binomial_distribution(L, p_src);
    const int m0 = static_cast<int>(std::ceil(L * p_src - 1e-9));
    ConstraintSet cs;
    for (int m = std::max(0, m0); m <= L; ++m) {
        LinearConstraint c;
        c.coef.assign(a.size(), 0.0);
        for (int i = 0; i < a.size(); ++i)
            if (a.element(i).m == m) c.coef[i] = 1.0;
        c.bound = b[m] / r;
        cs.inequalities.push_back(std::move(c));
    }
    for (int pi = 0; pi < a.pair_count(); ++pi) {
        const auto [m, u] = a.pair(pi);
        const double c = a.pair_ratio(m, u);
        LinearConstraint eq;
        eq.coef.assign(a.size(), 0.0);
        const int i0 = a.index_of(m, u, 0);
        const int i1 = a.index_of(m, u, 1);
        if (i0 >= 0) eq.coef[i0] = -c;
        if (i1 >= 0) eq.coef[i1] = 1.0 - c;
        cs.equalities.push_back(std::move(eq));
    }
    return cs;
}

// Grid oracle for the instance above: parameterize by the (M, U) marginal
// (the equalities pin the X split), filter by the caps, maximize H.
double grid_oracle_asymptotic(const Alphabet& a, double p_src, double r,
                              int resolution, int levels) {
    const int L = a.block_length();
    const auto b = binomial_distribution(L, p_src);
    const int m0 = static_cast<int>(std::ceil(L * p_src - 1e-9));
    const int dim = a.pair_count();

    auto to_mass = [&](std::span<const double> theta) {
        std::vector<double> mass(a.size(), 0.0);
        for (int i = 0; i < a.size(); ++i) {
            const Element& e = a.element(i);
            const double c = a.pair_ratio(e.m, e.u);
            mass[i] = theta[a.pair_index(e.m, e.u)] * (e.x ? c : 1.0 - c);
        }
        return mass;
    };

    const auto res = oracle::grid_maximize_simplex(
        dim, resolution, levels,
        [&](std::span<const double> theta) {
            const auto mass = to_mass(theta);
            return oracle::conditional_entropy_direct(a, mass);
        },
        [&](std::span<const double> theta) {
            std::vector<double> pm(L + 1, 0.0);
            for (int pi = 0; pi < dim; ++pi) pm[a.pair(pi).first] += theta[pi];
            for (int m = std::max(0, m0); m <= L; ++m)
                if (pm[m] > b[m] / r + 1e-12) return false;
            return true;
        });
    return res.value;
}

}  // namespace

TEST_CASE("unconstrained maximum is one bit with tiny residual") {
    const Alphabet a(3);
    ConstraintSet cs;
    const SolveReport r = maximize_conditional_entropy(a, cs);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.kkt_residual <= 1e-9);
    // X is uniform on every tag.
    for (int t = 0; t < a.tag_count(); ++t) {
        const auto& mem = a.tag_members(t);
        const double s = r.optimum[mem[0]] + r.optimum[mem[1]];
        if (s > 1e-9) {
            CHECK(r.optimum[mem[1]] / s == doctest::Approx(0.5).epsilon(1e-6));
        }
    }
}

TEST_CASE("forcing P(X=1|y) = 0 drives the value to zero") {
    const Alphabet a(3);
    ConstraintSet cs;
    for (int t = 0; t < a.tag_count(); ++t) {
        LinearConstraint eq;
        eq.coef.assign(a.size(), 0.0);
        eq.coef[a.tag_members(t)[1]] = 1.0;
        eq.bound = 0.0;
        cs.equalities.push_back(std::move(eq));
    }
    const SolveReport r = maximize_conditional_entropy(a, cs);
    CHECK(r.value == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r.converged);
}

TEST_CASE("Eq.-49 instance at L = 3 matches the contracting-grid oracle") {
    const Alphabet a(3);
    const ConstraintSet cs = asymptotic_instance(a, 0.05, 0.1);
    const SolveReport r = maximize_conditional_entropy(a, cs);
    CHECK(r.converged);
    const double want = grid_oracle_asymptotic(a, 0.05, 0.1, 14, 12);
    CHECK(std::abs(r.value - want) <= 2e-3);
    CHECK(r.kkt_residual <= 1e-6);
}

TEST_CASE("kkt_residual: exact at optimum, sensitive to perturbation") {
    const Alphabet a(3);
    ConstraintSet cs;
    const SolveReport r = maximize_conditional_entropy(a, cs);
    CHECK(kkt_residual(a, r.optimum, cs, r.multipliers) <= 1e-9);

    // Unconstrained optimum with all multipliers zero except lambda = 1.
    Multipliers plain;
    plain.normalization = 1.0;
    CHECK(kkt_residual(a, r.optimum, cs, plain) <= 1e-9);

    // Random 1e-3 perturbation moves the residual above 1e-4.
    Xoshiro256StarStar rng(5);
    const ConstraintSet ics = asymptotic_instance(a, 0.05, 0.1);
    const SolveReport ir = maximize_conditional_entropy(a, ics);
    CHECK(ir.kkt_residual <= 1e-6);
    std::vector<double> perturbed = ir.optimum;
    double sum = 0.0;
    for (double& v : perturbed) {
        v = std::max(0.0, v + 1e-3 * (rng.uniform01() - 0.5));
        sum += v;
    }
    for (double& v : perturbed) v /= sum;
    CHECK(kkt_residual(a, perturbed, ics, ir.multipliers) >= 1e-4);
}

TEST_CASE("solver output is bit-for-bit deterministic") {
    const Alphabet a(3);
    const ConstraintSet cs = asymptotic_instance(a, 0.2, 0.5);
    const SolveReport r1 = maximize_conditional_entropy(a, cs);
    const SolveReport r2 = maximize_conditional_entropy(a, cs);
    REQUIRE(r1.optimum.size() == r2.optimum.size());
    CHECK(std::memcmp(r1.optimum.data(), r2.optimum.data(),
                      r1.optimum.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(&r1.value, &r2.value, sizeof(double)) == 0);
}

TEST_CASE("relaxing a bound never decreases the optimum") {
    const Alphabet a(3);
    Xoshiro256StarStar rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const double p_src = 0.05 + 0.3 * rng.uniform01();
        const double r = 0.05 + 0.5 * rng.uniform01();
        ConstraintSet tight = asymptotic_instance(a, p_src, r);
        ConstraintSet loose = tight;
        for (auto& c : loose.inequalities) c.bound *= 1.5;
        const double vt = maximize_conditional_entropy(a, tight).value;
        const double vl = maximize_conditional_entropy(a, loose).value;
        CHECK(vl >= vt - 1e-7);
        CHECK(vt >= 0.0);
        CHECK(vl <= 1.0 + 1e-9);
    }
}

TEST_CASE("concave-gap right-hand side is concave and the solve is sound") {
    const Alphabet a(3);
    Xoshiro256StarStar rng(23);

    ConcaveGapConstraint gap;
    gap.g.assign(a.size(), 0.0);
    gap.q.assign(a.size(), 0.0);
    for (int i = 0; i < a.size(); ++i) {
        const Element& e = a.element(i);
        const double c = a.pair_ratio(e.m, e.u);
        gap.g[i] = (e.x - c) * (0.3 + 0.7 * ((e.m * 2 + e.u) % 3) / 2.0);
        gap.q[i] = c * (1.0 - c) * 0.5;
    }
    gap.delta = 0.05;

    // Concavity probes of the right-hand side.
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p1(a.size()), p2(a.size());
        double s1 = 0.0, s2 = 0.0;
        for (int i = 0; i < a.size(); ++i) {
            p1[i] = rng.uniform01();
            p2[i] = rng.uniform01();
            s1 += p1[i];
            s2 += p2[i];
        }
        for (int i = 0; i < a.size(); ++i) {
            p1[i] /= s1;
            p2[i] /= s2;
        }
        const double t = rng.uniform01();
        std::vector<double> mix(a.size());
        for (int i = 0; i < a.size(); ++i) mix[i] = t * p1[i] + (1 - t) * p2[i];
        CHECK(gap.rhs(mix) >= t * gap.rhs(p1) + (1 - t) * gap.rhs(p2) - 1e-12);
    }

    // With the gap present the optimum is feasible and certified.
    ConstraintSet cs;
    cs.gap = gap;
    SolverOptions opt;
    opt.tol = 1e-6;
    const SolveReport r = maximize_conditional_entropy(a, cs, opt);
    CHECK(gap.violation(r.optimum) <= 1e-9);
    CHECK(r.optimality_gap <= 1e-5);
    CHECK(r.value <= 1.0 + 1e-9);

    // Relaxing delta enlarges the feasible set.
    ConstraintSet cs2;
    ConcaveGapConstraint gap2 = gap;
    gap2.delta = 0.5;
    cs2.gap = gap2;
    const SolveReport r2 = maximize_conditional_entropy(a, cs2, opt);
    CHECK(r2.value >= r.value - 1e-5);
}

TEST_CASE("infeasible constraint sets are reported with the worst violation") {
    const Alphabet a(3);
    ConstraintSet cs;
    LinearConstraint c;
    c.coef.assign(a.size(), 1.0);
    c.bound = 0.5;  // total mass must be 1
    cs.inequalities.push_back(std::move(c));
    CHECK_THROWS_AS(maximize_conditional_entropy(a, cs), InfeasibleError);

    const FeasibilityReport fr = feasibility(a, cs);
    CHECK(fr.total_violation >= 0.49);
    CHECK(fr.worst_violation >= 0.49);
}

TEST_CASE("feasibility pre-solve finds interior points when they exist") {
    const Alphabet a(3);
    const ConstraintSet cs = asymptotic_instance(a, 0.1, 0.3);
    const FeasibilityReport fr = feasibility(a, cs);
    CHECK(fr.total_violation <= 1e-9);
    double sum = 0.0;
    for (double v : fr.point) {
        CHECK(v >= -1e-12);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}
