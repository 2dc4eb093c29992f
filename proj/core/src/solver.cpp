#include "rrdps/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <memory>

#include "rrdps/entropy.hpp"
#include "rrdps/lp.hpp"

namespace rrdps {

double ConcaveGapConstraint::rhs_at_s(double s) const {
    if (delta <= 0.0) return 0.0;
    const double d3 = delta / 3.0;
    return d3 + std::sqrt(d3 * d3 + 2.0 * delta * std::max(0.0, s));
}

double ConcaveGapConstraint::slope_at_s(double s) const {
    if (delta <= 0.0) return 0.0;
    const double d3 = delta / 3.0;
    return delta / std::sqrt(d3 * d3 + 2.0 * delta * std::max(0.0, s));
}

double ConcaveGapConstraint::violation(std::span<const double> p) const {
    return std::max(0.0, lhs(p) - rhs(p));
}

namespace {

constexpr double kFeasTol = 1e-10;
constexpr double kInternalCondFloor = 1e-18;  // bounded gradients inside the solver
constexpr double kSpecCondFloor = 1e-12;      // reported-residual convention
const double kLn2 = std::log(2.0);

double dot(std::span<const double> a, std::span<const double> b) {
    double v = 0.0;
    for (size_t i = 0; i < a.size(); ++i) v += a[i] * b[i];
    return v;
}

bool trace_enabled() {
    static const bool on = std::getenv("RRDPS_SOLVER_TRACE") != nullptr;
    return on;
}

// The linearized working set: original linear constraints plus whatever
// chord / trust / tangent rows the gap handling has added.
struct RowSet {
    std::vector<std::vector<double>> in_coef;
    std::vector<double> in_b;
    std::vector<std::vector<double>> eq_coef;
    std::vector<double> eq_b;
};

std::unique_ptr<LpInstance> make_lp(const RowSet& rs, int n) {
    auto a_eq = rs.eq_coef;
    auto b_eq = rs.eq_b;
    a_eq.emplace_back(n, 1.0);  // normalization row
    b_eq.push_back(1.0);
    return std::make_unique<LpInstance>(n, rs.in_coef, rs.in_b, std::move(a_eq),
                                        std::move(b_eq));
}

double row_violation(const RowSet& rs, std::span<const double> p, int* worst) {
    double total = 0.0, worst_v = -1.0;
    int wi = -1, k = 0;
    for (size_t i = 0; i < rs.in_coef.size(); ++i, ++k) {
        const double v = std::max(0.0, dot(rs.in_coef[i], p) - rs.in_b[i]);
        total += v;
        if (v > worst_v) worst_v = v, wi = k;
    }
    for (size_t i = 0; i < rs.eq_coef.size(); ++i, ++k) {
        const double v = std::abs(dot(rs.eq_coef[i], p) - rs.eq_b[i]);
        total += v;
        if (v > worst_v) worst_v = v, wi = k;
    }
    double sum = 0.0, neg = 0.0;
    for (double x : p) {
        sum += x;
        neg += std::max(0.0, -x);
    }
    total += std::abs(sum - 1.0) + neg;
    if (worst) *worst = wi;
    return total;
}

struct PolishResult {
    bool ok = false;
    std::vector<double> p;
    std::vector<double> in_mult;  // per RowSet inequality row
    std::vector<double> eq_mult;  // per RowSet equality row
    double lambda = 0.0;
    double stationarity = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

// Least-squares multiplier fit at p over the given active rows, against the
// reporting-convention gradient. Returns the fitted stationarity residual.
double fit_multipliers(const Alphabet& A, const RowSet& rs,
                       std::span<const double> p,
                       const std::vector<int>& active_in,
                       std::vector<double>* in_mult,
                       std::vector<double>* eq_mult, double* lambda) {
    const int n = A.size();
    const int ne = static_cast<int>(rs.eq_coef.size());
    const int na = static_cast<int>(active_in.size());
    const int cols = ne + na + 1;

    std::vector<double> grad(n);
    conditional_entropy_gradient(A, p, grad, kSpecCondFloor);

    Eigen::MatrixXd m(n, cols);
    for (int j = 0; j < ne; ++j)
        for (int w = 0; w < n; ++w) m(w, j) = rs.eq_coef[j][w];
    for (int j = 0; j < na; ++j)
        for (int w = 0; w < n; ++w) m(w, ne + j) = rs.in_coef[active_in[j]][w];
    for (int w = 0; w < n; ++w) m(w, cols - 1) = 1.0;

    Eigen::VectorXd rhs(n);
    for (int w = 0; w < n; ++w) rhs(w) = grad[w];
    Eigen::VectorXd sol = m.colPivHouseholderQr().solve(rhs);

    eq_mult->assign(ne, 0.0);
    for (int j = 0; j < ne; ++j) (*eq_mult)[j] = sol(j);
    in_mult->assign(rs.in_coef.size(), 0.0);
    for (int j = 0; j < na; ++j) (*in_mult)[active_in[j]] = sol(ne + j);
    *lambda = sol(cols - 1);

    Eigen::VectorXd res = rhs - m * sol;
    return res.lpNorm<Eigen::Infinity>();
}

// Primal-dual Newton in log-mass coordinates over a fixed active set.
// In (log p, multipliers) the stationarity equations have O(1) entries no
// matter how many orders of magnitude the mass spans, so the absolute
// residual that the reporting convention measures converges uniformly: the
// tail coordinates pinned at tiny bounds are refined as accurately as the
// bulk. Coordinates with (essentially) zero mass stay frozen; their
// stationarity closes through the multipliers of the rows pinning them.
struct LogNewtonResult {
    bool ok = false;
    double stationarity = std::numeric_limits<double>::infinity();
    double feasibility = std::numeric_limits<double>::infinity();
};

LogNewtonResult log_newton(const Alphabet& A, const RowSet& rs,
                           const std::vector<int>& act,
                           const std::vector<char>& active,
                           std::vector<double>& p, std::vector<double> m0,
                           double target, int max_iters, int* iters) {
    const int n = A.size();
    const int ne = static_cast<int>(rs.eq_coef.size());
    const int na = static_cast<int>(act.size());
    const int mrows = ne + 1 + na;
    const int ni = static_cast<int>(rs.in_coef.size());
    LogNewtonResult out;

    auto row_coef = [&](int r) -> const std::vector<double>* {
        if (r < ne) return &rs.eq_coef[r];
        if (r == ne) return nullptr;  // all-ones normalization row
        return &rs.in_coef[act[r - ne - 1]];
    };
    auto row_bound = [&](int r) {
        if (r < ne) return rs.eq_b[r];
        if (r == ne) return 1.0;
        return rs.in_b[act[r - ne - 1]];
    };

    std::vector<int> free_idx;
    for (int w = 0; w < n; ++w)
        if (p[w] > 1e-250) free_idx.push_back(w);
    const int nf = static_cast<int>(free_idx.size());
    std::vector<int> col_of(n, -1);
    for (int k = 0; k < nf; ++k) col_of[free_idx[k]] = k;

    std::vector<double> grad(n), tagsum(A.tag_count());
    Eigen::VectorXd mv(mrows);
    for (int r = 0; r < mrows; ++r) mv(r) = m0[r];

    // Row scales frozen across iterations; the roots are unchanged.
    std::vector<double> rscale(mrows);
    for (int r = 0; r < mrows; ++r) {
        const std::vector<double>* coef = row_coef(r);
        double s2 = 0.0;
        for (int w = 0; w < n; ++w) {
            const double c = coef ? (*coef)[w] : 1.0;
            s2 += c * c * p[w] * p[w];
        }
        rscale[r] = std::max(std::sqrt(s2), 1e-30);
    }

    auto residuals = [&](const std::vector<double>& pp,
                         const Eigen::VectorXd& mm, Eigen::VectorXd& fres,
                         Eigen::VectorXd& gres) {
        conditional_entropy_gradient(A, pp, grad, 1e-300);
        fres.resize(nf);
        for (int k = 0; k < nf; ++k) {
            const int w = free_idx[k];
            double v = grad[w];
            for (int r = 0; r < mrows; ++r) {
                const std::vector<double>* coef = row_coef(r);
                v -= (coef ? (*coef)[w] : 1.0) * mm(r);
            }
            fres(k) = v;
        }
        gres.resize(mrows);
        for (int r = 0; r < mrows; ++r) {
            const std::vector<double>* coef = row_coef(r);
            double lhs = 0.0;
            for (int w = 0; w < n; ++w)
                lhs += (coef ? (*coef)[w] : 1.0) * pp[w];
            gres(r) = (lhs - row_bound(r)) / rscale[r];
        }
    };

    Eigen::VectorXd fres, gres;
    residuals(p, mv, fres, gres);
    double merit = fres.lpNorm<Eigen::Infinity>() + gres.lpNorm<Eigen::Infinity>();
    double merit_window = merit;

    for (int it = 0; it < max_iters; ++it) {
        // Instances with a boundary-supported optimum plateau here; stop
        // grinding once progress per sweep is negligible.
        if (it % 5 == 4) {
            if (merit > 0.7 * merit_window) break;
            merit_window = merit;
        }
        if (iters) ++*iters;
        out.stationarity = fres.lpNorm<Eigen::Infinity>();
        out.feasibility = gres.lpNorm<Eigen::Infinity>();
        if (out.stationarity <= target && out.feasibility <= 1e-11) {
            out.ok = true;
            return out;
        }

        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(nf + mrows, nf + mrows);
        for (int t = 0; t < A.tag_count(); ++t) {
            const auto& mem = A.tag_members(t);
            const double s = p[mem[0]] + p[mem[1]];
            if (s <= 0.0) continue;
            for (int xi = 0; xi < 2; ++xi) {
                const int w = mem[xi];
                if (col_of[w] < 0) continue;
                for (int vi = 0; vi < 2; ++vi) {
                    const int v = mem[vi];
                    if (col_of[v] < 0) continue;
                    const double d = (xi == vi ? 1.0 : 0.0) - p[v] / s;
                    jac(col_of[w], col_of[v]) = -d / kLn2;
                }
            }
        }
        for (int r = 0; r < mrows; ++r) {
            const std::vector<double>* coef = row_coef(r);
            for (int k = 0; k < nf; ++k) {
                const int w = free_idx[k];
                const double c = coef ? (*coef)[w] : 1.0;
                jac(k, nf + r) = -c;
                jac(nf + r, k) = c * p[w] / rscale[r];
            }
        }
        Eigen::VectorXd rhs(nf + mrows);
        rhs.head(nf) = -fres;
        rhs.tail(mrows) = -gres;

        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jac);
        Eigen::VectorXd step = cod.solve(rhs);

        double zmax = 0.0;
        for (int k = 0; k < nf; ++k) zmax = std::max(zmax, std::abs(step(k)));
        if (zmax > 3.0) step *= 3.0 / zmax;

        bool accepted = false;
        double alpha = 1.0;
        for (int bt = 0; bt < 30 && !accepted; ++bt, alpha *= 0.5) {
            std::vector<double> pn = p;
            for (int k = 0; k < nf; ++k)
                pn[free_idx[k]] = p[free_idx[k]] * std::exp(alpha * step(k));
            Eigen::VectorXd mn = mv + alpha * step.tail(mrows);
            bool okstep = true;
            for (int i = 0; i < ni && okstep; ++i) {
                if (active[i]) continue;
                if (dot(rs.in_coef[i], pn) - rs.in_b[i] >
                    kFeasTol * (1.0 + std::abs(rs.in_b[i]))) {
                    okstep = false;
                }
            }
            if (!okstep) continue;
            Eigen::VectorXd fn, gn;
            residuals(pn, mn, fn, gn);
            const double merit_new =
                fn.lpNorm<Eigen::Infinity>() + gn.lpNorm<Eigen::Infinity>();
            if (merit_new < merit * (1.0 - 1e-4 * alpha) || merit_new < target) {
                p = std::move(pn);
                mv = mn;
                fres = fn;
                gres = gn;
                merit = merit_new;
                accepted = true;
            }
        }
        if (trace_enabled()) {
            std::fprintf(stderr, "[logN it%d] stat=%.3e feas=%.3e acc=%d\n", it,
                         fres.lpNorm<Eigen::Infinity>(),
                         gres.lpNorm<Eigen::Infinity>(), accepted);
        }
        if (!accepted) break;
    }
    out.stationarity = fres.lpNorm<Eigen::Infinity>();
    out.feasibility = gres.lpNorm<Eigen::Infinity>();
    out.ok = out.stationarity <= target && out.feasibility <= 1e-11;
    return out;
}

// Scaled Newton refinement over a candidate active set. Keeps every iterate
// feasible: active rows are held by the KKT correction, inactive rows by
// step backtracking, positivity by a fraction-to-boundary rule. Steps are
// relative (d = dP/P), which preserves the many orders of magnitude the
// optimal mass spans when tail bounds are active.
PolishResult polish(const Alphabet& A, const RowSet& rs, std::vector<double> p,
                    double tol, int max_rounds) {
    const int n = A.size();
    const int ni = static_cast<int>(rs.in_coef.size());
    const int ne = static_cast<int>(rs.eq_coef.size());
    PolishResult out;

    std::vector<double> grad(n), h(n);
    std::vector<char> active(ni, 0);
    std::vector<int> drop_count(ni, 0);

    for (int i = 0; i < ni; ++i) {
        const double slack = rs.in_b[i] - dot(rs.in_coef[i], p);
        if (slack <= 1e-9 * (1.0 + std::abs(rs.in_b[i]))) active[i] = 1;
    }

    auto entropy_at = [&](const std::vector<double>& x) {
        return conditional_entropy(A, x);
    };

    for (int round = 0; round < max_rounds; ++round) {
        std::vector<int> act;
        for (int i = 0; i < ni; ++i)
            if (active[i]) act.push_back(i);
        const int na = static_cast<int>(act.size());
        const int m = ne + 1 + na;  // equalities, normalization, active ineqs

        // Row pointers in a fixed order: equalities, normalization, actives.
        auto row_coef = [&](int r) -> const std::vector<double>* {
            if (r < ne) return &rs.eq_coef[r];
            if (r == ne) return nullptr;  // all-ones
            return &rs.in_coef[act[r - ne - 1]];
        };
        auto row_bound = [&](int r) {
            if (r < ne) return rs.eq_b[r];
            if (r == ne) return 1.0;
            return rs.in_b[act[r - ne - 1]];
        };

        // Newton runs in a sequence of metrics. Phase 0 is mass-scaled
        // (relative steps), which preserves the many orders of magnitude an
        // optimum with active tail bounds spans but leaves the stationarity
        // of low-mass coordinates unresolved. It is followed by a ladder of
        // magnitude bands: each pass moves only the coordinates inside
        // [freeze_lo, freeze_hi) with a floor-clamped metric, so every scale
        // in turn reaches the same absolute stationarity as the bulk.
        bool newton_converged = false;
        double phase_best_score = std::numeric_limits<double>::infinity();
        auto newton_phase = [&](int phase, double d_floor, double freeze_lo,
                                double freeze_hi, int max_iters) -> bool {
            std::vector<double> dvec(n);
            auto refresh_metric = [&]() {
                for (int w = 0; w < n; ++w) {
                    const bool movable = p[w] >= freeze_lo && p[w] < freeze_hi;
                    dvec[w] = movable ? std::max(p[w], d_floor) : 0.0;
                }
            };

            double ridge = 1e-6;
            double best_score = std::numeric_limits<double>::infinity();
            std::vector<double> best_p = p;
            int stalled = 0;
            bool converged = false;
            for (int it = 0; it < max_iters; ++it) {
                ++out.iterations;
                refresh_metric();
                conditional_entropy_gradient(A, p, grad, kInternalCondFloor);

                // Scaled rows, their norms, and the restoration residual.
                Eigen::MatrixXd ad = Eigen::MatrixXd::Zero(m, n);
                Eigen::VectorXd rnorm(m), resid(m);
                for (int r = 0; r < m; ++r) {
                    const std::vector<double>* coef = row_coef(r);
                    double b = row_bound(r), lhs = 0.0;
                    for (int w = 0; w < n; ++w) {
                        const double c = coef ? (*coef)[w] : 1.0;
                        ad(r, w) = c * dvec[w];
                        lhs += c * p[w];
                    }
                    double nr = ad.row(r).norm();
                    if (nr < 1e-250) nr = 1.0;  // row touches no movable mass
                    rnorm(r) = nr;
                    ad.row(r) /= nr;
                    resid(r) = (b - lhs) / nr;
                }

                Eigen::VectorXd ghat(n);
                for (int w = 0; w < n; ++w) ghat(w) = grad[w] * dvec[w];

                // Per-tag blocks of D (-hessian) D + ridge, inverted in
                // closed form; the blocks are rank one (tag-mass scalings
                // carry no curvature), hence the Levenberg-Marquardt ridge.
                std::vector<double> inv00(n, 0.0), inv_off(A.tag_count(), 0.0);
                auto build_blocks = [&](double eps) {
                    for (int t = 0; t < A.tag_count(); ++t) {
                        const auto& mem = A.tag_members(t);
                        const double p0 = p[mem[0]], p1 = p[mem[1]];
                        const double d0 = dvec[mem[0]], d1 = dvec[mem[1]];
                        const double s = p0 + p1;
                        double b00 = 0.0, b11 = 0.0, b01 = 0.0;
                        if (s > 0.0) {
                            if (d0 > 0.0 && p0 > 0.0)
                                b00 = d0 * d0 * p1 / (p0 * s * kLn2);
                            if (d1 > 0.0 && p1 > 0.0)
                                b11 = d1 * d1 * p0 / (p1 * s * kLn2);
                            if (d0 > 0.0 && d1 > 0.0) b01 = -d0 * d1 / (s * kLn2);
                        }
                        const double det =
                            (b00 + eps) * (b11 + eps) - b01 * b01;
                        inv00[mem[0]] = (b11 + eps) / det;
                        inv00[mem[1]] = (b00 + eps) / det;
                        inv_off[t] = -b01 / det;
                    }
                };
                auto winv_apply = [&](const Eigen::VectorXd& v) {
                    Eigen::VectorXd r0(n);
                    for (int t = 0; t < A.tag_count(); ++t) {
                        const auto& mem = A.tag_members(t);
                        r0(mem[0]) = inv00[mem[0]] * v(mem[0]) + inv_off[t] * v(mem[1]);
                        r0(mem[1]) = inv_off[t] * v(mem[0]) + inv00[mem[1]] * v(mem[1]);
                    }
                    return r0;
                };

                auto scaled_feas = [&](const std::vector<double>& x) {
                    double worst = 0.0;
                    for (int r = 0; r < m; ++r) {
                        const std::vector<double>* coef = row_coef(r);
                        double lhs = 0.0;
                        for (int w = 0; w < n; ++w)
                            lhs += (coef ? (*coef)[w] : 1.0) * x[w];
                        worst = std::max(worst,
                                         std::abs(row_bound(r) - lhs) / rnorm(r));
                    }
                    return worst;
                };

                const double h_old = entropy_at(p);
                const double feas_scaled = resid.lpNorm<Eigen::Infinity>();
                bool accepted = false;
                double measure = std::numeric_limits<double>::infinity();
                for (int lm = 0; lm < 8 && !accepted; ++lm) {
                    build_blocks(ridge);
                    Eigen::MatrixXd winv_adT(n, m);
                    for (int r = 0; r < m; ++r)
                        winv_adT.col(r) = winv_apply(ad.row(r).transpose());
                    Eigen::MatrixXd schur = ad * winv_adT;
                    Eigen::VectorXd srhs = ad * winv_apply(ghat) - resid;

                    Eigen::VectorXd mu;
                    for (int attempt = 0;; ++attempt) {
                        Eigen::LDLT<Eigen::MatrixXd> ldlt(schur);
                        mu = ldlt.solve(srhs);
                        if ((schur * mu - srhs).lpNorm<Eigen::Infinity>() <
                                1e-9 * (1.0 + srhs.lpNorm<Eigen::Infinity>()) ||
                            attempt >= 3) {
                            break;
                        }
                        schur.diagonal().array() +=
                            1e-12 * (1.0 + schur.trace() / m);
                    }
                    Eigen::VectorXd dhat = winv_apply(ghat - ad.transpose() * mu);

                    const Eigen::VectorXd sres = ghat - ad.transpose() * mu;
                    measure = sres.lpNorm<Eigen::Infinity>() /
                              (1.0 + ghat.lpNorm<Eigen::Infinity>());
                    const double target = 1e-11;
                    const double score = measure + 100.0 * feas_scaled;
                    if (score < best_score) {
                        best_score = score;
                        best_p = p;
                    }
                    if (measure <= target && feas_scaled <= 1e-11) {
                        converged = true;
                        break;
                    }

                    // Cap the step, then fraction to the boundary.
                    const double dmax = dhat.lpNorm<Eigen::Infinity>();
                    if (dmax > 4.0) dhat *= 4.0 / dmax;
                    double alpha = 1.0;
                    for (int w = 0; w < n; ++w) {
                        const double move = dvec[w] * dhat(w);
                        if (move < 0.0)
                            alpha = std::min(alpha, -0.998 * p[w] / move);
                    }
                    for (int bt = 0; bt < 30 && !accepted; ++bt) {
                        std::vector<double> pn(n);
                        for (int w = 0; w < n; ++w)
                            pn[w] = std::max(0.0,
                                             p[w] + alpha * dvec[w] * dhat(w));
                        bool ok = true;
                        for (int i = 0; i < ni && ok; ++i) {
                            if (active[i]) continue;
                            if (dot(rs.in_coef[i], pn) - rs.in_b[i] >
                                kFeasTol * (1.0 + std::abs(rs.in_b[i]))) {
                                ok = false;
                            }
                        }
                        // Never drift off the working manifold.
                        if (ok && scaled_feas(pn) >
                                      std::max(2.0 * feas_scaled, 1e-11)) {
                            ok = false;
                        }
                        if (ok) {
                            const double h_new = entropy_at(pn);
                            // Endgame steps refine stationarity, not value.
                            if (h_new >= h_old - 1e-11 || alpha < 1e-6) {
                                p = std::move(pn);
                                accepted = true;
                            }
                        }
                        if (!accepted) alpha *= 0.5;
                    }
                    if (!accepted) ridge *= 10.0;  // retry more conservatively
                }
                if (trace_enabled()) {
                    std::fprintf(stderr,
                                 "[polish r%d p%d it%d] meas=%.3e feas=%.3e "
                                 "ridge=%.1e acc=%d H=%.12f\n",
                                 round, phase, it, measure, feas_scaled, ridge,
                                 accepted, entropy_at(p));
                }
                if (converged) break;
                if (!accepted) break;
                if (measure + 100.0 * feas_scaled < 0.9 * best_score) {
                    stalled = 0;
                } else if (++stalled > 6) {
                    break;
                }
                ridge = std::max(1e-13, ridge * 0.1);
            }
            p = best_p;
            phase_best_score = std::min(phase_best_score, best_score);
            return converged;
        };
        newton_converged = newton_phase(
            0, 0.0, 0.0, std::numeric_limits<double>::infinity(), 100);

        // Multiplier fit and active-set update.
        std::vector<double> in_mult, eq_mult;
        double lambda = 0.0;
        double stat = fit_multipliers(A, rs, p, act, &in_mult, &eq_mult, &lambda);
        if (trace_enabled()) {
            std::fprintf(stderr, "[polish r%d] fit stat=%.3e newton=%d na=%d\n",
                         round, stat, newton_converged, na);
        }

        bool changed = false;
        for (int i = 0; i < ni; ++i) {
            if (active[i]) continue;
            if (dot(rs.in_coef[i], p) - rs.in_b[i] >
                kFeasTol * (1.0 + std::abs(rs.in_b[i]))) {
                active[i] = 1;
                changed = true;
            }
        }
        if (!changed) {
            for (int j : act) {
                if (in_mult[j] < -1e-8 && drop_count[j] < 3) {
                    active[j] = 0;
                    ++drop_count[j];
                    changed = true;
                }
            }
        }
        if (!changed) {
            const double stat_target = std::max(1e-9, 0.5 * tol);
            // Only worth refining when the caller wants certified KKT
            // accuracy and the scaled phase landed on the optimal face;
            // from far points the log system is as hard as the problem
            // itself, and at survey tolerances the value alone matters.
            if (stat > stat_target && tol <= 2e-6 &&
                (newton_converged || phase_best_score <= 1e-4)) {
                // The scaled phase leaves low-mass stationarity unresolved;
                // finish in log coordinates where it is well conditioned.
                std::vector<double> m0(ne + 1 + na);
                for (int j = 0; j < ne; ++j) m0[j] = eq_mult[j];
                m0[ne] = lambda;
                for (int j = 0; j < na; ++j) m0[ne + 1 + j] = in_mult[act[j]];
                LogNewtonResult ln = log_newton(A, rs, act, active, p, m0,
                                                0.5 * stat_target, 60,
                                                &out.iterations);
                stat = fit_multipliers(A, rs, p, act, &in_mult, &eq_mult,
                                       &lambda);
                newton_converged = newton_converged || ln.ok;
                if (trace_enabled()) {
                    std::fprintf(stderr,
                                 "[polish r%d] log-newton stat=%.3e -> fit "
                                 "stat=%.3e ok=%d\n",
                                 round, ln.stationarity, stat, ln.ok);
                }
            }
            out.ok = stat <= tol;
            out.p = p;
            out.in_mult = std::move(in_mult);
            out.eq_mult = std::move(eq_mult);
            out.lambda = lambda;
            out.stationarity = stat;
            return out;
        }
    }

    // Ran out of active-set rounds; report the best fit anyway.
    std::vector<int> act;
    for (int i = 0; i < ni; ++i)
        if (active[i]) act.push_back(i);
    out.p = p;
    out.stationarity =
        fit_multipliers(A, rs, p, act, &out.in_mult, &out.eq_mult, &out.lambda);
    out.ok = false;
    return out;
}

// Weak-duality certificate: for any multipliers (inequalities clamped to
// be non-negative), max_{P in simplex} of the Lagrangian has a closed form
// because mass concentrates on the best tag and
// max_q h(q) - q c1 - (1-q) c0 = log2(2^-c0 + 2^-c1).
double dual_bound(const Alphabet& A, const RowSet& rs,
                  std::span<const double> in_mult,
                  std::span<const double> eq_mult) {
    const int n = A.size();
    std::vector<double> c(n, 0.0);
    double terms = 0.0;
    for (size_t i = 0; i < rs.in_coef.size(); ++i) {
        const double m = std::max(0.0, i < in_mult.size() ? in_mult[i] : 0.0);
        if (m == 0.0) continue;
        terms += m * rs.in_b[i];
        for (int w = 0; w < n; ++w) c[w] += m * rs.in_coef[i][w];
    }
    for (size_t j = 0; j < rs.eq_coef.size(); ++j) {
        const double m = j < eq_mult.size() ? eq_mult[j] : 0.0;
        if (m == 0.0) continue;
        terms += m * rs.eq_b[j];
        for (int w = 0; w < n; ++w) c[w] += m * rs.eq_coef[j][w];
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < A.tag_count(); ++t) {
        const auto& mem = A.tag_members(t);
        const double c0 = c[mem[0]], c1 = c[mem[1]];
        const double lo = std::min(c0, c1);
        best = std::max(best, -lo + std::log2(1.0 + std::exp2(lo - std::max(c0, c1))));
    }
    return terms + best;
}

// Descends the dual with annealed soft-max smoothing, starting from the
// fitted multipliers. The smoothed objective upper-bounds the hard dual, so
// the returned value (hard max at the final point) is always a valid bound.
// Worth the work only when the row count is small.
double refine_dual_bound(const Alphabet& A, const RowSet& rs,
                         std::vector<double> in_mult,
                         std::vector<double> eq_mult) {
    const int n = A.size();
    const int ni = static_cast<int>(rs.in_coef.size());
    const int ne = static_cast<int>(rs.eq_coef.size());
    for (double& v : in_mult) v = std::max(0.0, v);

    std::vector<double> c(n), score(A.tag_count()), tagw(A.tag_count());
    auto eval = [&](bool soft, double tau, std::vector<double>* grad_in,
                    std::vector<double>* grad_eq) {
        std::fill(c.begin(), c.end(), 0.0);
        double terms = 0.0;
        for (int i = 0; i < ni; ++i) {
            terms += in_mult[i] * rs.in_b[i];
            if (in_mult[i] == 0.0) continue;
            for (int w = 0; w < n; ++w) c[w] += in_mult[i] * rs.in_coef[i][w];
        }
        for (int j = 0; j < ne; ++j) {
            terms += eq_mult[j] * rs.eq_b[j];
            if (eq_mult[j] == 0.0) continue;
            for (int w = 0; w < n; ++w) c[w] += eq_mult[j] * rs.eq_coef[j][w];
        }
        double best = -std::numeric_limits<double>::infinity();
        for (int t = 0; t < A.tag_count(); ++t) {
            const auto& mem = A.tag_members(t);
            const double c0 = c[mem[0]], c1 = c[mem[1]];
            const double lo = std::min(c0, c1);
            score[t] =
                -lo + std::log2(1.0 + std::exp2(lo - std::max(c0, c1)));
            best = std::max(best, score[t]);
        }
        if (!soft) return terms + best;
        // Soft max over tags; also fills the multiplier gradient.
        double z = 0.0;
        for (int t = 0; t < A.tag_count(); ++t) {
            tagw[t] = std::exp((score[t] - best) / tau);
            z += tagw[t];
        }
        const double soft_best = best + tau * std::log(z);
        if (grad_in) {
            // d score_t / d m = b_i - E_{q_t}[a_i] under the per-tag
            // maximizing conditional q_t = softmax(-c).
            grad_in->assign(ni, 0.0);
            grad_eq->assign(ne, 0.0);
            for (int t = 0; t < A.tag_count(); ++t) {
                const double wt = tagw[t] / z;
                if (wt < 1e-14) continue;
                const auto& mem = A.tag_members(t);
                const double c0 = c[mem[0]], c1 = c[mem[1]];
                const double q1 = 1.0 / (1.0 + std::exp2(c1 - c0));
                const double q0 = 1.0 - q1;
                for (int i = 0; i < ni; ++i) {
                    (*grad_in)[i] -= wt * (q0 * rs.in_coef[i][mem[0]] +
                                           q1 * rs.in_coef[i][mem[1]]);
                }
                for (int j = 0; j < ne; ++j) {
                    (*grad_eq)[j] -= wt * (q0 * rs.eq_coef[j][mem[0]] +
                                           q1 * rs.eq_coef[j][mem[1]]);
                }
            }
            for (int i = 0; i < ni; ++i) (*grad_in)[i] += rs.in_b[i];
            for (int j = 0; j < ne; ++j) (*grad_eq)[j] += rs.eq_b[j];
        }
        return terms + soft_best;
    };

    std::vector<double> gin, geq;
    double best_hard = eval(false, 0.0, nullptr, nullptr);
    for (double tau = 1e-3; tau >= 1e-9; tau *= 0.1) {
        double step = 0.25;
        double fcur = eval(true, tau, &gin, &geq);
        for (int itr = 0; itr < 60; ++itr) {
            std::vector<double> bi = in_mult, be = eq_mult;
            for (int i = 0; i < ni; ++i)
                in_mult[i] = std::max(0.0, in_mult[i] - step * gin[i]);
            for (int j = 0; j < ne; ++j) eq_mult[j] -= step * geq[j];
            const double fnew = eval(true, tau, nullptr, nullptr);
            if (fnew < fcur - 1e-15) {
                fcur = fnew;
                eval(true, tau, &gin, &geq);
                step = std::min(step * 1.6, 4.0);
            } else {
                in_mult = std::move(bi);
                eq_mult = std::move(be);
                step *= 0.5;
                if (step < 1e-12) break;
            }
        }
        best_hard = std::min(best_hard, eval(false, 0.0, nullptr, nullptr));
    }
    return best_hard;
}

struct MasterResult {
    bool ok = false;
    std::vector<double> p;
    double value = 0.0;
    double fw_gap = std::numeric_limits<double>::infinity();
    std::vector<double> in_mult, eq_mult;
    double lambda = 0.0;
    double stationarity = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool infeasible = false;
};

// Maximize H(X|Y) over the polytope given by rs (plus simplex): Frank-Wolfe
// with away steps, polish attempts, and a final linearization certificate.
MasterResult master_solve(const Alphabet& A, const RowSet& rs,
                          const std::optional<std::vector<double>>& start,
                          double tol, int iter_budget) {
    const int n = A.size();
    MasterResult out;
    auto lp = make_lp(rs, n);
    if (!lp->feasible()) {
        out.infeasible = true;
        return out;
    }

    std::vector<double> p;
    if (start && static_cast<int>(start->size()) == n &&
        row_violation(rs, *start, nullptr) <= 1e-9) {
        p = *start;
    } else {
        const std::vector<double> zero(n, 0.0);
        p = lp->maximize(zero).x;
    }

    std::vector<std::vector<double>> atoms{p};
    std::vector<double> weights{1.0};
    std::vector<double> grad(n);

    auto grad_at = [&](const std::vector<double>& x, std::vector<double>& g) {
        conditional_entropy_gradient(A, x, g, kInternalCondFloor);
    };

    auto certify = [&](const std::vector<double>& x) {
        std::vector<double> g(n);
        grad_at(x, g);
        const LpResult v = lp->maximize(g);
        if (v.status != LpStatus::optimal) {
            return std::numeric_limits<double>::infinity();
        }
        return dot(g, v.x) - dot(g, x);
    };

    double polish_trigger = std::max(tol, 1e-3);
    int it = 0, stall_count = 0, certified_rounds = 0, last_polish = -100;
    auto finish_with = [&](PolishResult&& pr, double gap) {
        out.ok = true;
        out.p = std::move(pr.p);
        out.value = conditional_entropy(A, out.p);
        out.fw_gap = gap;
        out.in_mult = std::move(pr.in_mult);
        out.eq_mult = std::move(pr.eq_mult);
        out.lambda = pr.lambda;
        out.stationarity = pr.stationarity;
        out.iterations = it + pr.iterations;
    };

    while (it < iter_budget) {
        ++it;
        grad_at(p, grad);
        const LpResult vres = lp->maximize(grad);
        if (vres.status != LpStatus::optimal) break;
        const std::vector<double>& v = vres.x;
        double fw_gap = dot(grad, v) - dot(grad, p);

        const bool may_polish =
            it - last_polish >= 24 || (it <= 1 && start.has_value());
        if ((fw_gap <= polish_trigger && may_polish) || stall_count >= 192) {
            stall_count = 0;
            last_polish = it;
            PolishResult pr = polish(A, rs, p, tol, 40);
            if (row_violation(rs, pr.p, nullptr) <= 1e-8) {
                // Two value certificates: the linearization bound at the
                // polished point, and the closed-form dual bound from the
                // fitted multipliers. Either one alone can be loose when
                // the optimum sits on a flat face.
                double gap = certify(pr.p);
                const double h_here = conditional_entropy(A, pr.p);
                const double db =
                    dual_bound(A, rs, pr.in_mult, pr.eq_mult) - h_here;
                gap = std::min(gap, std::max(0.0, db));
                if (gap > tol && pr.stationarity > tol &&
                    rs.in_coef.size() + rs.eq_coef.size() <= 32) {
                    const double db2 =
                        refine_dual_bound(A, rs, pr.in_mult, pr.eq_mult) -
                        h_here;
                    gap = std::min(gap, std::max(0.0, db2));
                }
                if (gap <= tol &&
                    (pr.stationarity <= tol || ++certified_rounds >= 3)) {
                    finish_with(std::move(pr), gap);
                    out.ok = true;
                    return out;
                }
                if (conditional_entropy(A, pr.p) >
                    conditional_entropy(A, p) + 1e-14) {
                    p = pr.p;
                    atoms.assign(1, p);
                    weights.assign(1, 1.0);
                    grad_at(p, grad);
                    continue;
                }
            }
            polish_trigger = std::max(tol, polish_trigger * 0.1);
        } else {
            ++stall_count;
        }

        // Away atom.
        int away = -1;
        double away_score = std::numeric_limits<double>::infinity();
        for (size_t a = 0; a < atoms.size(); ++a) {
            const double s = dot(grad, atoms[a]);
            if (s < away_score) {
                away_score = s;
                away = static_cast<int>(a);
            }
        }

        std::vector<double> dir(n);
        double gamma_max;
        bool away_step = false;
        const double fw_score = dot(grad, v) - dot(grad, p);
        const double aw_score = dot(grad, p) - away_score;
        if (away >= 0 && aw_score > fw_score && weights[away] < 1.0 - 1e-12) {
            away_step = true;
            for (int w = 0; w < n; ++w) dir[w] = p[w] - atoms[away][w];
            gamma_max = weights[away] / (1.0 - weights[away]);
        } else {
            for (int w = 0; w < n; ++w) dir[w] = v[w] - p[w];
            gamma_max = 1.0;
        }

        // Concave 1-D line search by bisection on the directional derivative.
        std::vector<double> tmp(n), gtmp(n);
        auto dphi = [&](double g) {
            for (int w = 0; w < n; ++w)
                tmp[w] = std::max(0.0, p[w] + g * dir[w]);
            grad_at(tmp, gtmp);
            return dot(gtmp, dir);
        };
        double gamma = gamma_max;
        if (dphi(0.0) <= 0.0) {
            gamma = 0.0;
        } else if (dphi(gamma_max) < 0.0) {
            double lo = 0.0, hi = gamma_max;
            for (int b = 0; b < 50; ++b) {
                const double mid = 0.5 * (lo + hi);
                (dphi(mid) > 0.0 ? lo : hi) = mid;
            }
            gamma = 0.5 * (lo + hi);
        }
        if (gamma <= 0.0) {
            polish_trigger = std::max(tol, fw_gap);
            continue;
        }

        if (away_step) {
            for (int w = 0; w < n; ++w)
                p[w] = std::max(0.0, p[w] + gamma * dir[w]);
            for (size_t a = 0; a < atoms.size(); ++a) weights[a] *= 1.0 + gamma;
            weights[away] -= gamma;
            if (weights[away] <= 1e-14) {
                atoms.erase(atoms.begin() + away);
                weights.erase(weights.begin() + away);
            }
        } else {
            for (int w = 0; w < n; ++w)
                p[w] = std::max(0.0, p[w] + gamma * dir[w]);
            for (size_t a = 0; a < atoms.size(); ++a) weights[a] *= 1.0 - gamma;
            int found = -1;
            for (size_t a = 0; a < atoms.size(); ++a) {
                double diff = 0.0;
                for (int w = 0; w < n; ++w)
                    diff = std::max(diff, std::abs(atoms[a][w] - v[w]));
                if (diff < 1e-12) {
                    found = static_cast<int>(a);
                    break;
                }
            }
            if (found >= 0) {
                weights[found] += gamma;
            } else {
                atoms.push_back(v);
                weights.push_back(gamma);
            }
            if (atoms.size() > 400) {
                atoms.assign(1, p);
                weights.assign(1, 1.0);
            }
        }
    }

    // Budget exhausted: report the best effort, not converged.
    PolishResult pr = polish(A, rs, p, tol, 40);
    if (row_violation(rs, pr.p, nullptr) <= 1e-8) p = std::move(pr.p);
    out.p = p;
    out.value = conditional_entropy(A, p);
    double db = dual_bound(A, rs, pr.in_mult, pr.eq_mult) - out.value;
    if (rs.in_coef.size() + rs.eq_coef.size() <= 32) {
        db = std::min(db, refine_dual_bound(A, rs, pr.in_mult, pr.eq_mult) -
                              out.value);
    }
    out.fw_gap = std::min(certify(p), std::max(0.0, db));
    out.in_mult = std::move(pr.in_mult);
    out.eq_mult = std::move(pr.eq_mult);
    out.lambda = pr.lambda;
    out.stationarity = pr.stationarity;
    out.iterations = it + pr.iterations;
    out.ok = out.fw_gap <= tol;
    return out;
}

void validate_inputs(const Alphabet& A, const ConstraintSet& cs,
                     const SolverOptions& opt) {
    const size_t n = static_cast<size_t>(A.size());
    if (!(opt.tol > 0.0)) throw std::invalid_argument("tol must be positive");
    for (const auto& c : cs.inequalities)
        if (c.coef.size() != n)
            throw std::invalid_argument("inequality coefficient size mismatch");
    for (const auto& c : cs.equalities)
        if (c.coef.size() != n)
            throw std::invalid_argument("equality coefficient size mismatch");
    if (cs.gap) {
        if (cs.gap->g.size() != n || cs.gap->q.size() != n)
            throw std::invalid_argument("gap constraint size mismatch");
        if (cs.gap->delta < 0.0)
            throw std::invalid_argument("gap delta must be non-negative");
        for (double qi : cs.gap->q)
            if (!(qi >= 0.0))
                throw std::invalid_argument(
                    "gap q must be non-negative for concavity");
    }
}

RowSet base_rows(const ConstraintSet& cs) {
    RowSet rs;
    for (const auto& c : cs.inequalities) {
        rs.in_coef.push_back(c.coef);
        rs.in_b.push_back(c.bound);
    }
    for (const auto& c : cs.equalities) {
        rs.eq_coef.push_back(c.coef);
        rs.eq_b.push_back(c.bound);
    }
    return rs;
}

}  // namespace

double kkt_residual(const Alphabet& A, std::span<const double> p,
                    const ConstraintSet& cs, const Multipliers& m) {
    const int n = A.size();
    std::vector<double> grad(n);
    conditional_entropy_gradient(A, p, grad, kSpecCondFloor);

    std::vector<double> st(grad.begin(), grad.end());
    double residual = 0.0;

    for (size_t i = 0; i < cs.inequalities.size(); ++i) {
        const auto& c = cs.inequalities[i];
        const double mu = i < m.inequality.size() ? m.inequality[i] : 0.0;
        for (int w = 0; w < n; ++w) st[w] -= mu * c.coef[w];
        const double slack = c.bound - c.lhs(p);
        residual = std::max(residual, std::abs(mu * slack));  // complementarity
        residual = std::max(residual, std::max(0.0, -slack)); // primal
        residual = std::max(residual, std::max(0.0, -mu));    // dual sign
    }
    for (size_t i = 0; i < cs.equalities.size(); ++i) {
        const auto& c = cs.equalities[i];
        const double mu = i < m.equality.size() ? m.equality[i] : 0.0;
        for (int w = 0; w < n; ++w) st[w] -= mu * c.coef[w];
        residual = std::max(residual, std::abs(c.lhs(p) - c.bound));
    }
    if (cs.gap) {
        const double s = cs.gap->s_of(p);
        const double slope = cs.gap->slope_at_s(s);
        for (int w = 0; w < n; ++w)
            st[w] -= m.gap * (cs.gap->g[w] - slope * cs.gap->q[w]);
        const double slack = cs.gap->rhs_at_s(s) - cs.gap->lhs(p);
        residual = std::max(residual, std::abs(m.gap * slack));
        residual = std::max(residual, std::max(0.0, -slack));
        residual = std::max(residual, std::max(0.0, -m.gap));
    }
    double sum = 0.0;
    for (int w = 0; w < n; ++w) {
        st[w] -= m.normalization;
        sum += p[w];
        residual = std::max(residual, std::max(0.0, -p[w]));
    }
    residual = std::max(residual, std::abs(sum - 1.0));
    for (int w = 0; w < n; ++w) {
        // Coordinates at the simplex boundary carry an implicit bound
        // multiplier: only a positive reduced cost (mass wants in but is
        // held out without an explaining constraint) is a violation there.
        if (p[w] <= 1e-15) {
            residual = std::max(residual, std::max(0.0, st[w]));
        } else {
            residual = std::max(residual, std::abs(st[w]));
        }
    }
    return residual;
}

FeasibilityReport feasibility(const Alphabet& A, const ConstraintSet& cs) {
    const int n = A.size();
    const int ni = static_cast<int>(cs.inequalities.size());
    const int ne = static_cast<int>(cs.equalities.size());
    const bool has_gap = cs.gap.has_value() && cs.gap->delta >= 0.0;
    // Variables: P, v_in, v_eq_plus, v_eq_minus, [t for the gap epigraph].
    const int nv = n + ni + 2 * ne + (has_gap ? 1 : 0);
    const int t_idx = n + ni + 2 * ne;

    std::vector<double> tangent_s;  // tangent points added so far
    FeasibilityReport rep;

    std::vector<double> p(n, 0.0);
    for (int round = 0; round < 25; ++round) {
        std::vector<std::vector<double>> a_ub;
        std::vector<double> b_ub;
        std::vector<std::vector<double>> a_eq;
        std::vector<double> b_eq;

        for (int i = 0; i < ni; ++i) {
            std::vector<double> row(nv, 0.0);
            for (int w = 0; w < n; ++w) row[w] = cs.inequalities[i].coef[w];
            row[n + i] = -1.0;
            a_ub.push_back(std::move(row));
            b_ub.push_back(cs.inequalities[i].bound);
        }
        for (int j = 0; j < ne; ++j) {
            std::vector<double> row(nv, 0.0);
            for (int w = 0; w < n; ++w) row[w] = cs.equalities[j].coef[w];
            row[n + ni + 2 * j] = 1.0;
            row[n + ni + 2 * j + 1] = -1.0;
            a_eq.push_back(std::move(row));
            b_eq.push_back(cs.equalities[j].bound);
        }
        {
            std::vector<double> row(nv, 0.0);
            for (int w = 0; w < n; ++w) row[w] = 1.0;
            a_eq.push_back(std::move(row));
            b_eq.push_back(1.0);
        }
        if (has_gap) {
            for (double s0 : tangent_s) {
                const double slope = cs.gap->slope_at_s(s0);
                const double icpt = cs.gap->rhs_at_s(s0) - slope * s0;
                std::vector<double> row(nv, 0.0);
                for (int w = 0; w < n; ++w)
                    row[w] = cs.gap->g[w] - slope * cs.gap->q[w];
                row[t_idx] = -1.0;
                a_ub.push_back(std::move(row));
                b_ub.push_back(icpt);
            }
        }

        LpInstance lp(nv, std::move(a_ub), std::move(b_ub), std::move(a_eq),
                      std::move(b_eq));
        std::vector<double> obj(nv, 0.0);
        for (int k = n; k < nv; ++k) obj[k] = -1.0;
        const LpResult res = lp.maximize(obj);
        if (res.status != LpStatus::optimal) {
            throw std::runtime_error("feasibility LP failed unexpectedly");
        }
        std::vector<double> pnew(res.x.begin(), res.x.begin() + n);
        bool stable = round > 0;
        for (int w = 0; w < n && stable; ++w)
            if (std::abs(pnew[w] - p[w]) > 1e-12) stable = false;
        p = std::move(pnew);
        if (!has_gap || stable) break;
        const double s = cs.gap->s_of(p);
        if (cs.gap->violation(p) <= 1e-14) break;
        tangent_s.push_back(s);
        if (tangent_s.size() > 20) break;
    }

    rep.point = p;
    rep.inequality_violation.assign(ni, 0.0);
    rep.equality_violation.assign(ne, 0.0);
    double total = 0.0;
    for (int i = 0; i < ni; ++i) {
        const double v =
            std::max(0.0, cs.inequalities[i].lhs(p) - cs.inequalities[i].bound);
        rep.inequality_violation[i] = v;
        total += v;
        if (v > rep.worst_violation) {
            rep.worst_violation = v;
            rep.worst_description = "inequality " + std::to_string(i);
        }
    }
    for (int j = 0; j < ne; ++j) {
        const double v = std::abs(cs.equalities[j].lhs(p) - cs.equalities[j].bound);
        rep.equality_violation[j] = v;
        total += v;
        if (v > rep.worst_violation) {
            rep.worst_violation = v;
            rep.worst_description = "equality " + std::to_string(j);
        }
    }
    if (has_gap) {
        rep.gap_violation = cs.gap->violation(p);
        total += rep.gap_violation;
        if (rep.gap_violation > rep.worst_violation) {
            rep.worst_violation = rep.gap_violation;
            rep.worst_description = "gap constraint";
        }
    }
    rep.total_violation = total;
    return rep;
}

SolveReport maximize_conditional_entropy(const Alphabet& A,
                                         const ConstraintSet& cs,
                                         const SolverOptions& opt) {
    validate_inputs(A, cs, opt);
    const int n = A.size();
    RowSet base = base_rows(cs);

    SolveReport report;
    const int ni = static_cast<int>(cs.inequalities.size());

    auto assemble = [&](const MasterResult& mr, double gap_mult,
                        double value_gap) {
        report.optimum = mr.p;
        double total = 0.0;
        for (double v : report.optimum) total += v;
        if (total > 0.0 && std::abs(total - 1.0) <= 1e-7) {
            for (double& v : report.optimum) v /= total;
        }
        report.value = mr.value;
        report.iterations = mr.iterations;
        report.multipliers.inequality.assign(ni, 0.0);
        for (int i = 0; i < ni && i < static_cast<int>(mr.in_mult.size()); ++i)
            report.multipliers.inequality[i] = mr.in_mult[i];
        report.multipliers.equality = mr.eq_mult;
        report.multipliers.equality.resize(cs.equalities.size(), 0.0);
        report.multipliers.gap = gap_mult;
        report.multipliers.normalization = mr.lambda;
        report.kkt_residual = kkt_residual(A, report.optimum, cs, report.multipliers);
        report.optimality_gap = value_gap;
        report.converged = mr.ok && value_gap <= opt.tol &&
                           report.kkt_residual <= std::max(opt.tol, 1e-7);
    };

    auto fail_infeasible = [&](const char* where) {
        FeasibilityReport fr = feasibility(A, cs);
        throw InfeasibleError(std::string("infeasible constraint set (") + where +
                                  "): most violated " + fr.worst_description +
                                  " by " + std::to_string(fr.worst_violation),
                              fr.worst_description, fr.worst_violation);
    };

    const bool plain_gap = cs.gap && cs.gap->delta <= 0.0;
    if (!cs.gap || plain_gap) {
        RowSet rs = base;
        if (plain_gap) {
            rs.in_coef.push_back(cs.gap->g);
            rs.in_b.push_back(0.0);
        }
        MasterResult mr =
            master_solve(A, rs, opt.warm_start, opt.tol, opt.max_iterations);
        if (mr.infeasible) fail_infeasible("linear");
        double gap_mult = 0.0;
        if (plain_gap && mr.in_mult.size() > static_cast<size_t>(ni)) {
            gap_mult = mr.in_mult[ni];
        }
        assemble(mr, gap_mult, mr.fw_gap);
        return report;
    }

    // Concave-gap outer loop. The feasible set is approximated from inside
    // by piecewise chords of the right-hand side over a refining partition
    // of the range of s = <q, P>: a chord of a concave function lies below
    // it on its own piece, and the intersection of all chord half-spaces is
    // therefore a subset of the true region wherever s lands. Tangent cuts
    // give the matching outer relaxation, so every iterate is truly
    // feasible and the value is certified from both sides.
    const ConcaveGapConstraint& gap = *cs.gap;
    double s_min = std::numeric_limits<double>::infinity(), s_max = 0.0;
    for (int w = 0; w < n; ++w) {
        s_min = std::min(s_min, gap.q[w]);
        s_max = std::max(s_max, gap.q[w]);
    }

    // An anchor that is strictly inside every chord row: any point with
    // <g, P> <= 0 works because chords of the non-negative concave
    // right-hand side have non-negative intercept and slope.
    std::optional<std::vector<double>> anchor;
    if (opt.warm_start && static_cast<int>(opt.warm_start->size()) == n &&
        row_violation(base, *opt.warm_start, nullptr) <= 1e-9 &&
        gap.violation(*opt.warm_start) <= 0.0) {
        anchor = opt.warm_start;
    } else {
        RowSet rs0 = base;
        rs0.in_coef.push_back(gap.g);
        rs0.in_b.push_back(0.0);
        auto lp0 = make_lp(rs0, n);
        if (lp0->feasible()) {
            const std::vector<double> zero(n, 0.0);
            anchor = lp0->maximize(zero).x;
        }
    }

    auto repair_start = [&](const RowSet& rs,
                            const std::vector<double>& cand)
        -> std::optional<std::vector<double>> {
        if (!cand.empty() && row_violation(rs, cand, nullptr) <= 1e-9)
            return cand;
        if (!anchor) return std::nullopt;
        if (cand.empty()) return anchor;
        // Pull the candidate toward the anchor until the rows hold.
        double t_lo = 0.0, t_hi = 1.0;
        std::vector<double> mix(n);
        for (int b = 0; b < 30; ++b) {
            const double t = 0.5 * (t_lo + t_hi);
            for (int w = 0; w < n; ++w)
                mix[w] = (1.0 - t) * cand[w] + t * (*anchor)[w];
            (row_violation(rs, mix, nullptr) <= 1e-10 ? t_hi : t_lo) = t;
        }
        for (int w = 0; w < n; ++w)
            mix[w] = (1.0 - t_hi) * cand[w] + t_hi * (*anchor)[w];
        if (row_violation(rs, mix, nullptr) <= 1e-9) return mix;
        return anchor;
    };

    std::vector<double> breaks{s_min, s_max};
    if (s_max - s_min < 1e-18) breaks.pop_back();
    std::vector<double> cut_s;  // tangent points for the outer problem
    MasterResult best_inner;
    double lb = -std::numeric_limits<double>::infinity();
    double ub = std::numeric_limits<double>::infinity();
    double best_secant_mult = 0.0;
    int total_iters = 0;
    std::optional<std::vector<double>> outer_start;

    const int inner_budget = std::min(1200, opt.max_iterations);
    for (int outer = 0; outer < 50; ++outer) {
        // Inner problem: one chord row per partition piece.
        RowSet rs = base;
        const int chord_base = static_cast<int>(rs.in_coef.size());
        const int pieces = std::max(1, static_cast<int>(breaks.size()) - 1);
        for (int k = 0; k < pieces; ++k) {
            double a = breaks[k];
            double b = breaks.size() > 1 ? breaks[k + 1] : breaks[k];
            double slope, icpt;
            if (b - a > 1e-18) {
                slope = (gap.rhs_at_s(b) - gap.rhs_at_s(a)) / (b - a);
                icpt = gap.rhs_at_s(a) - slope * a;
            } else {
                slope = gap.slope_at_s(a);
                icpt = gap.rhs_at_s(a) - slope * a;
            }
            std::vector<double> row(n);
            for (int w = 0; w < n; ++w) row[w] = gap.g[w] - slope * gap.q[w];
            rs.in_coef.push_back(std::move(row));
            rs.in_b.push_back(icpt);
        }

        MasterResult inner =
            master_solve(A, rs, repair_start(rs, best_inner.p), opt.tol,
                         inner_budget);
        total_iters += inner.iterations;
        if (inner.infeasible) fail_infeasible("gap");
        const double s_star = gap.s_of(inner.p);
        if (trace_enabled()) {
            std::fprintf(stderr,
                         "[outer %d] inner ok=%d H=%.9f gap=%.2e it=%d "
                         "s*=%.6e pieces=%d\n",
                         outer, inner.ok, inner.value, inner.fw_gap,
                         inner.iterations, s_star, pieces);
        }
        if (inner.value > lb || best_inner.p.empty()) {
            lb = inner.value;
            best_inner = inner;
            // Multiplier of the binding chord row, for the KKT report.
            best_secant_mult = 0.0;
            for (int k = 0; k < pieces; ++k) {
                const int idx = chord_base + k;
                if (idx < static_cast<int>(inner.in_mult.size())) {
                    best_secant_mult += inner.in_mult[idx];
                }
            }
        }

        // Outer certificate with tangent cuts at the points seen so far.
        if (std::find(cut_s.begin(), cut_s.end(), s_star) == cut_s.end()) {
            cut_s.push_back(s_star);
        }
        RowSet rso = base;
        for (double s0 : cut_s) {
            const double tslope = gap.slope_at_s(s0);
            std::vector<double> row(n);
            for (int w = 0; w < n; ++w) row[w] = gap.g[w] - tslope * gap.q[w];
            rso.in_coef.push_back(std::move(row));
            rso.in_b.push_back(gap.rhs_at_s(s0) - tslope * s0);
        }
        MasterResult outer_res =
            master_solve(A, rso, repair_start(rso, outer_start.value_or(
                                                       std::vector<double>())),
                         opt.tol, inner_budget);
        total_iters += outer_res.iterations;
        if (outer_res.infeasible) fail_infeasible("gap outer");
        outer_start = outer_res.p;
        ub = std::min(ub, outer_res.value + std::max(0.0, outer_res.fw_gap));
        if (trace_enabled()) {
            std::fprintf(stderr,
                         "[outer %d] cert ok=%d H=%.9f gap=%.2e it=%d lb=%.9f "
                         "ub=%.9f cuts=%zu\n",
                         outer, outer_res.ok, outer_res.value, outer_res.fw_gap,
                         outer_res.iterations, lb, ub, cut_s.size());
        }
        if (std::find(cut_s.begin(), cut_s.end(), gap.s_of(outer_res.p)) ==
            cut_s.end()) {
            cut_s.push_back(gap.s_of(outer_res.p));
        }

        if (ub - lb <= opt.tol) break;

        // Subdivide the piece containing the inner optimum.
        if (breaks.size() >= 2) {
            auto it_up = std::upper_bound(breaks.begin(), breaks.end(), s_star);
            if (it_up == breaks.begin()) ++it_up;
            if (it_up == breaks.end()) --it_up;
            const double hi_b = *it_up, lo_b = *(it_up - 1);
            const double mid = std::clamp(s_star, lo_b, hi_b);
            if (mid - lo_b > 1e-14 * (1.0 + hi_b) &&
                hi_b - mid > 1e-14 * (1.0 + hi_b)) {
                breaks.insert(it_up, mid);
            } else {
                breaks.insert(it_up, 0.5 * (lo_b + hi_b));
            }
        }
    }

    if (best_inner.p.empty()) fail_infeasible("gap");
    best_inner.iterations = total_iters;
    assemble(best_inner, best_secant_mult, std::max(0.0, ub - lb));
    return report;
}

}  // namespace rrdps
