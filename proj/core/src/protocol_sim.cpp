#include "rrdps/protocol_sim.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "rrdps/binomial.hpp"
#include "rrdps/solver.hpp"

namespace rrdps {

std::pair<bool, int> HonestRandomPolicy::decide(
    std::span<const std::uint8_t> bits, Xoshiro256StarStar& rng) const {
    if (!rng.bernoulli(rate_)) return {false, 0};
    return {true, 1 + rng.uniform_int(static_cast<int>(bits.size()))};
}

std::pair<bool, int> ParityAttackerPolicy::decide(
    std::span<const std::uint8_t> bits, Xoshiro256StarStar& rng) const {
    int m = 0;
    for (std::uint8_t b : bits) m += b;
    if (m < band_lo_ || m > band_hi_) return {false, 0};
    int zeros = 0;
    for (std::uint8_t b : bits) zeros += b == 0;
    if (zeros == 0) return {false, 0};
    int pick = rng.uniform_int(zeros);
    for (size_t l = 0; l < bits.size(); ++l) {
        if (bits[l] == 0 && pick-- == 0) return {true, static_cast<int>(l) + 1};
    }
    return {false, 0};  // unreachable
}

SimulationResult simulate(int block_length, double p_odd, std::int64_t n_em,
                          const AdversaryPolicy& policy, std::uint64_t seed) {
    const int L = block_length;
    if (L < 2) throw std::invalid_argument("block length must be at least 2");
    if (!(p_odd >= 0.0 && p_odd <= 1.0)) {
        throw std::invalid_argument("p_odd must lie in [0, 1]");
    }
    if (n_em < 0) throw std::invalid_argument("N_em must be non-negative");

    Xoshiro256StarStar rng(seed);
    SimulationResult out;
    out.v.assign(L + 1, 0);
    out.rounds.reserve(static_cast<size_t>(n_em));

    for (std::int64_t k = 0; k < n_em; ++k) {
        RoundRecord rec;
        rec.s_bits.resize(L);
        rec.m = 0;
        for (int l = 0; l < L; ++l) {
            rec.s_bits[l] = rng.bernoulli(p_odd) ? 1 : 0;
            rec.m += rec.s_bits[l];
        }
        ++out.v[rec.m];

        const auto [success, i] = policy.decide(rec.s_bits, rng);
        rec.success = success;
        if (success) {
            rec.i = i;
            // j uniform over the other L - 1 positions.
            const int draw = rng.uniform_int(L - 1);
            rec.j = draw + 1 >= i ? draw + 2 : draw + 1;
            rec.u = rec.s_bits[rec.i - 1];
            rec.x = rec.s_bits[rec.j - 1];
            rec.a = rec.m - rec.u - rec.x;
            rec.b = rec.u ^ rec.x;
            ++out.n_success;
        }
        out.rounds.push_back(std::move(rec));
    }
    return out;
}

JointDistribution type_of(const Alphabet& alphabet,
                          const std::vector<RoundRecord>& rounds) {
    std::vector<double> counts(alphabet.size(), 0.0);
    std::int64_t n = 0;
    for (const RoundRecord& r : rounds) {
        if (!r.success) continue;
        const int idx = alphabet.index_of(r.m, r.u, r.x);
        if (idx < 0) {
            throw std::logic_error("success round outside the alphabet");
        }
        counts[idx] += 1.0;
        ++n;
    }
    if (n == 0) {
        throw std::invalid_argument("type of an empty sample is undefined");
    }
    for (double& c : counts) c /= static_cast<double>(n);
    return JointDistribution(alphabet, std::move(counts));
}

MembershipReport membership_in_e(const JointDistribution& p,
                                 std::span<const double> nu, double delta1,
                                 std::span<const double> xi, double delta2,
                                 double n_rounds, double n_em, int block_length,
                                 double p_src) {
    const Alphabet& a = p.alphabet();
    const int L = block_length;
    if (a.block_length() != L) {
        throw std::invalid_argument("alphabet block length mismatch");
    }
    if (static_cast<int>(nu.size()) != L + 1 ||
        static_cast<int>(xi.size()) != a.pair_count()) {
        throw std::invalid_argument("multiplier size mismatch");
    }

    const std::vector<double> b = binomial_distribution(L, p_src);
    double e_b_nu = 0.0;
    for (int m = 0; m <= L; ++m) e_b_nu += b[m] * nu[m];

    double lhs_nu = 0.0, lhs_xi = 0.0, var_term = 0.0;
    for (int idx = 0; idx < a.size(); ++idx) {
        const Element& e = a.element(idx);
        const double c = a.pair_ratio(e.m, e.u);
        const double x = xi[a.pair_index_of_element(idx)];
        lhs_nu += p[idx] * nu[e.m];
        lhs_xi += p[idx] * (e.x - c) * x;
        var_term += p[idx] * c * (1.0 - c) * x * x;
    }

    MembershipReport rep;
    const double nu_bound = (n_em / n_rounds) * (e_b_nu + delta1);
    const double d3 = delta2 / 3.0;
    const double xi_bound = d3 + std::sqrt(d3 * d3 + 2.0 * delta2 * var_term);
    rep.nu_slack = nu_bound - lhs_nu;
    rep.xi_slack = xi_bound - lhs_xi;
    rep.member = rep.nu_slack >= -1e-12 && rep.xi_slack >= -1e-12;
    return rep;
}

PatternEnumeration enumerate_t(int n_rounds, std::span<const Tag> y_seq,
                               std::span<const double> nu, double delta1,
                               std::span<const double> xi, double delta2,
                               int block_length, double p_src, double n_em) {
    const int n = n_rounds;
    const int L = block_length;
    if (n < 1 || n > 8 || L < 2 || L > 5) {
        throw std::invalid_argument(
            "enumerate_t is limited to N <= 8 and L <= 5 (got N = " +
            std::to_string(n) + ", L = " + std::to_string(L) + ")");
    }
    if (static_cast<int>(y_seq.size()) != n) {
        throw std::invalid_argument("tag sequence length mismatch");
    }
    const Alphabet a(L);
    for (const Tag& t : y_seq) {
        if (t.a < 0 || t.a > L - 2 || t.b < 0 || t.b > 1) {
            throw std::invalid_argument("tag outside the tag alphabet");
        }
    }
    if (static_cast<int>(nu.size()) != L + 1 ||
        static_cast<int>(xi.size()) != a.pair_count()) {
        throw std::invalid_argument("multiplier size mismatch");
    }

    const std::vector<double> b = binomial_distribution(L, p_src);
    double e_b_nu = 0.0;
    for (int m = 0; m <= L; ++m) e_b_nu += b[m] * nu[m];

    // The two deviation-set constraints, shared by all candidate patterns.
    ConstraintSet cs_base;
    {
        LinearConstraint c;
        c.coef.assign(a.size(), 0.0);
        for (int idx = 0; idx < a.size(); ++idx) {
            c.coef[idx] = nu[a.element(idx).m];
        }
        c.bound = (n_em / n) * (e_b_nu + delta1);
        cs_base.inequalities.push_back(std::move(c));
    }
    {
        ConcaveGapConstraint gap;
        gap.g.assign(a.size(), 0.0);
        gap.q.assign(a.size(), 0.0);
        for (int idx = 0; idx < a.size(); ++idx) {
            const Element& e = a.element(idx);
            const double c = a.pair_ratio(e.m, e.u);
            const double x = xi[a.pair_index_of_element(idx)];
            gap.g[idx] = (e.x - c) * x;
            gap.q[idx] = c * (1.0 - c) * x * x;
        }
        gap.delta = delta2;
        cs_base.gap = std::move(gap);
    }

    PatternEnumeration out;
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        // Joint type of (x^N, y^N), mapped onto the alphabet: a tag and an
        // X value determine the letter uniquely.
        std::vector<double> type(a.size(), 0.0);
        for (int k = 0; k < n; ++k) {
            const int x = (bits >> k) & 1;
            const int u = y_seq[k].b ^ x;
            const int m = y_seq[k].a + u + x;
            const int idx = a.index_of(m, u, x);
            if (idx < 0) throw std::logic_error("tag/X pair outside alphabet");
            type[idx] += 1.0 / n;
        }

        ConstraintSet cs = cs_base;
        for (int idx = 0; idx < a.size(); ++idx) {
            LinearConstraint eq;
            eq.coef.assign(a.size(), 0.0);
            eq.coef[idx] = 1.0;
            eq.bound = type[idx];
            cs.equalities.push_back(std::move(eq));
        }
        const FeasibilityReport fr = feasibility(a, cs);
        if (fr.total_violation <= 1e-8) {
            std::vector<std::uint8_t> pattern(n);
            for (int k = 0; k < n; ++k) pattern[k] = (bits >> k) & 1;
            out.patterns.push_back(std::move(pattern));
        }
    }
    out.count = static_cast<std::int64_t>(out.patterns.size());
    return out;
}

}  // namespace rrdps
