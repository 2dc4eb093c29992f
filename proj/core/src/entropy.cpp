#include "rrdps/entropy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rrdps {

namespace {
constexpr double kZeroMass = 1e-300;
}  // namespace

double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::invalid_argument("binary_entropy argument must lie in [0, 1]");
    }
    double h = 0.0;
    if (x > kZeroMass) h -= x * std::log2(x);
    const double y = 1.0 - x;
    if (y > kZeroMass) h -= y * std::log2(y);
    return h;
}

double conditional_entropy(const Alphabet& alphabet, std::span<const double> mass) {
    double h = 0.0;
    for (int t = 0; t < alphabet.tag_count(); ++t) {
        const auto& members = alphabet.tag_members(t);
        const double p0 = mass[members[0]];
        const double p1 = mass[members[1]];
        const double s = p0 + p1;
        if (s <= kZeroMass) continue;
        if (p0 > kZeroMass) h -= p0 * std::log2(p0 / s);
        if (p1 > kZeroMass) h -= p1 * std::log2(p1 / s);
    }
    return h;
}

double conditional_entropy(const JointDistribution& p) {
    return conditional_entropy(p.alphabet(), p.mass());
}

void conditional_entropy_gradient(const Alphabet& alphabet,
                                  std::span<const double> mass,
                                  std::span<double> grad, double floor) {
    for (int t = 0; t < alphabet.tag_count(); ++t) {
        const auto& members = alphabet.tag_members(t);
        const double p0 = mass[members[0]];
        const double p1 = mass[members[1]];
        const double s = p0 + p1;
        double c0 = 0.5, c1 = 0.5;  // empty tags: the uniform limit
        if (s > kZeroMass) {
            c0 = p0 / s;
            c1 = p1 / s;
        }
        grad[members[0]] = -std::log2(std::max(c0, floor));
        grad[members[1]] = -std::log2(std::max(c1, floor));
    }
}

double kl_divergence(std::span<const double> q, std::span<const double> b) {
    if (q.size() != b.size()) {
        throw std::invalid_argument("kl_divergence: size mismatch");
    }
    double d = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        if (!(q[i] >= 0.0) || !(b[i] >= 0.0)) {
            throw std::invalid_argument("kl_divergence: negative mass");
        }
        if (q[i] <= kZeroMass) continue;
        if (b[i] <= kZeroMass) return std::numeric_limits<double>::infinity();
        d += q[i] * std::log2(q[i] / b[i]);
    }
    // Accumulated rounding can leave a tiny negative total when q == b.
    return (d < 0.0 && d > -1e-15) ? 0.0 : d;
}

}  // namespace rrdps
