#include "oracles.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rrdps::oracle {

namespace mp = boost::multiprecision;

double binomial_pmf_bigint(int trials, double p, int successes) {
    mp::cpp_int choose = 1;
    for (int i = 0; i < successes; ++i) {
        choose *= trials - i;
        choose /= i + 1;
    }
    using big_float = mp::cpp_bin_float_50;
    const big_float bp(p);
    const big_float term = big_float(choose) * mp::pow(bp, successes) *
                           mp::pow(big_float(1) - bp, trials - successes);
    return term.convert_to<double>();
}

double binary_entropy_highprec(double x) {
    using big_float = mp::cpp_bin_float_50;
    const big_float bx(x);
    big_float h = 0;
    const big_float ln2 = mp::log(big_float(2));
    if (bx > 0) h -= bx * mp::log(bx) / ln2;
    if (bx < 1) h -= (big_float(1) - bx) * mp::log(big_float(1) - bx) / ln2;
    return h.convert_to<double>();
}

double bernstein_delta2_highprec(double eta2, double n) {
    using big_float = mp::cpp_bin_float_50;
    const big_float v = -mp::log(big_float(eta2)) / big_float(n);
    return v.convert_to<double>();
}

double conditional_entropy_direct(const Alphabet& alphabet,
                                  std::span<const double> mass) {
    // Build the (X, Y) joint explicitly, then sum -p log2 p(x|y).
    const int ny = alphabet.tag_count();
    std::vector<double> joint(2 * ny, 0.0);
    for (int i = 0; i < alphabet.size(); ++i) {
        const Element& e = alphabet.element(i);
        const Tag t = Alphabet::tag_of(e.m, e.u, e.x);
        joint[e.x * ny + alphabet.tag_index(t)] += mass[i];
    }
    double h = 0.0;
    for (int y = 0; y < ny; ++y) {
        const double py = joint[y] + joint[ny + y];
        if (py <= 0.0) continue;
        for (int x = 0; x < 2; ++x) {
            const double pxy = joint[x * ny + y];
            if (pxy <= 0.0) continue;
            h -= pxy * std::log2(pxy / py);
        }
    }
    return h;
}

double kl_direct(std::span<const double> q, std::span<const double> b) {
    double d = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        if (q[i] <= 0.0) continue;
        if (b[i] <= 0.0) return std::numeric_limits<double>::infinity();
        d += q[i] * std::log2(q[i] / b[i]);
    }
    return std::max(0.0, d);
}

namespace {

// Enumerate compositions of `total` into `dim` parts.
void for_each_composition(int dim, int total,
                          const std::function<void(std::span<const int>)>& fn) {
    std::vector<int> parts(dim, 0);
    std::function<void(int, int)> rec = [&](int idx, int remaining) {
        if (idx == dim - 1) {
            parts[idx] = remaining;
            fn(parts);
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            parts[idx] = k;
            rec(idx + 1, remaining - k);
        }
    };
    rec(0, total);
}

}  // namespace

GridMaxResult grid_maximize_simplex(
    int dim, int resolution, int levels,
    const std::function<double(std::span<const double>)>& objective,
    const std::function<bool(std::span<const double>)>& feasible) {
    std::vector<double> best;
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<double> candidate(dim);

    double shrink = 1.0;
    for (int level = 0; level < levels; ++level) {
        for_each_composition(dim, resolution, [&](std::span<const int> parts) {
            for (int i = 0; i < dim; ++i) {
                const double grid = static_cast<double>(parts[i]) / resolution;
                candidate[i] =
                    best.empty() ? grid
                                 : (1.0 - shrink) * best[i] + shrink * grid;
            }
            if (!feasible(candidate)) return;
            const double v = objective(candidate);
            if (v > best_value) {
                best_value = v;
                best = candidate;
            }
        });
        if (best.empty()) {
            // Nothing feasible at this resolution; refine and retry.
            resolution *= 2;
            continue;
        }
        shrink *= 0.5;
    }
    if (best.empty()) throw std::runtime_error("grid oracle: no feasible point");
    return GridMaxResult{best, best_value};
}

double min_divergence_grid(std::span<const double> b, std::span<const double> nu,
                           double threshold, int resolution, int levels) {
    const int dim = static_cast<int>(b.size());
    const GridMaxResult r = grid_maximize_simplex(
        dim, resolution, levels,
        [&](std::span<const double> q) { return -kl_direct(q, b); },
        [&](std::span<const double> q) {
            double e = 0.0;
            for (int i = 0; i < dim; ++i) e += q[i] * nu[i];
            return e >= threshold;
        });
    return -r.value;
}

}  // namespace rrdps::oracle
