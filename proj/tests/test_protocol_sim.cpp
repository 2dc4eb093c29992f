#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "rrdps/binomial.hpp"
#include "rrdps/key_rate.hpp"
#include "rrdps/protocol_sim.hpp"
#include "rrdps/tail_bounds.hpp"

using namespace rrdps;

TEST_CASE("degenerate source: every round is all-zero") {
    HonestRandomPolicy policy(0.5);
    const SimulationResult sim = simulate(5, 0.0, 500, policy, 7);
    CHECK(sim.v[0] == 500);
    for (const RoundRecord& r : sim.rounds) {
        CHECK(r.m == 0);
        if (r.success) {
            CHECK(r.u == 0);
            CHECK(r.x == 0);
            CHECK(r.a == 0);
            CHECK(r.b == 0);
        }
    }
    CHECK(sim.n_success > 100);
}

TEST_CASE("identical seeds reproduce identical round lists") {
    ParityAttackerPolicy policy(2, 7);
    const SimulationResult s1 = simulate(7, 0.2, 2000, policy, 12345);
    const SimulationResult s2 = simulate(7, 0.2, 2000, policy, 12345);
    REQUIRE(s1.rounds.size() == s2.rounds.size());
    CHECK(s1.n_success == s2.n_success);
    for (size_t k = 0; k < s1.rounds.size(); ++k) {
        CHECK(s1.rounds[k].s_bits == s2.rounds[k].s_bits);
        CHECK(s1.rounds[k].success == s2.rounds[k].success);
        CHECK(s1.rounds[k].i == s2.rounds[k].i);
        CHECK(s1.rounds[k].j == s2.rounds[k].j);
    }
    const SimulationResult s3 = simulate(7, 0.2, 2000, policy, 54321);
    bool differs = s3.n_success != s1.n_success;
    for (size_t k = 0; !differs && k < s1.rounds.size(); ++k) {
        differs = s1.rounds[k].s_bits != s3.rounds[k].s_bits;
    }
    CHECK(differs);
}

TEST_CASE("derived per-round variables and the multinomial counts") {
    HonestRandomPolicy policy(0.3);
    const int L = 7;
    const double p_odd = 0.1;
    const std::int64_t n_em = 100000;
    const SimulationResult sim = simulate(L, p_odd, n_em, policy, 99);

    // v is the histogram of all rounds.
    std::int64_t total = 0;
    for (std::int64_t v : sim.v) total += v;
    CHECK(total == n_em);

    // Tag-map consistency per round, and success statistics per Eq. counts.
    const Alphabet a(L);
    std::vector<std::int64_t> success_m(L + 1, 0);
    for (const RoundRecord& r : sim.rounds) {
        int m = 0;
        for (auto bit : r.s_bits) m += bit;
        CHECK(m == r.m);
        if (!r.success) continue;
        CHECK(r.u == r.s_bits[r.i - 1]);
        CHECK(r.x == r.s_bits[r.j - 1]);
        CHECK(r.a == r.m - r.u - r.x);
        CHECK(r.b == (r.u ^ r.x));
        CHECK(r.j != r.i);
        CHECK(a.index_of(r.m, r.u, r.x) >= 0);
        ++success_m[r.m];
    }

    // Success rounds with bit sum M never exceed v_M.
    for (int m = 0; m <= L; ++m) CHECK(success_m[m] <= sim.v[m]);

    // Empirical v against the binomial within 4 sigma per bin.
    const auto b = binomial_distribution(L, p_odd);
    for (int m = 0; m <= L; ++m) {
        const double expect = b[m] * n_em;
        const double sigma = std::sqrt(std::max(b[m] * (1 - b[m]) * n_em, 1.0));
        CHECK(std::abs(sim.v[m] - expect) <= 4.0 * sigma + 1.0);
    }
}

TEST_CASE("partner draws are uniform: x | m, u is Bernoulli((m-u)/(L-1))") {
    ParityAttackerPolicy policy(1, 6);
    const int L = 7;
    const SimulationResult sim = simulate(L, 0.25, 200000, policy, 4242);
    std::map<std::pair<int, int>, std::pair<std::int64_t, std::int64_t>> bins;
    for (const RoundRecord& r : sim.rounds) {
        if (!r.success) continue;
        auto& [count, ones] = bins[{r.m, r.u}];
        ++count;
        ones += r.x;
    }
    int tested = 0;
    for (const auto& [mu, stats] : bins) {
        const auto& [count, ones] = stats;
        if (count < 100) continue;
        const double c = static_cast<double>(mu.first - mu.second) / (L - 1);
        const double sigma = std::sqrt(std::max(c * (1 - c) * count, 1.0));
        CHECK(std::abs(ones - c * count) <= 4.0 * sigma + 1.0);
        ++tested;
    }
    CHECK(tested >= 4);
}

TEST_CASE("parity attacker points the detection at a zero bit") {
    ParityAttackerPolicy policy(2, 5);
    const SimulationResult sim = simulate(7, 0.3, 20000, policy, 31);
    for (const RoundRecord& r : sim.rounds) {
        if (!r.success) continue;
        CHECK(r.m >= 2);
        CHECK(r.m <= 5);
        CHECK(r.u == 0);
    }
    CHECK(sim.n_success > 1000);
}

TEST_CASE("type of the success rounds") {
    const Alphabet a(3);
    HonestRandomPolicy policy(1.0);
    // Single round: a point mass; duplicated rounds: the same point mass.
    SimulationResult sim = simulate(3, 0.4, 1, policy, 8);
    REQUIRE(sim.n_success == 1);
    const JointDistribution t1 = type_of(a, sim.rounds);
    int support = 0;
    for (int i = 0; i < a.size(); ++i) {
        if (t1[i] > 0) {
            CHECK(t1[i] == 1.0);
            ++support;
        }
    }
    CHECK(support == 1);

    auto twice = sim.rounds;
    twice.push_back(sim.rounds[0]);
    const JointDistribution t2 = type_of(a, twice);
    for (int i = 0; i < a.size(); ++i) CHECK(t2[i] == t1[i]);

    CHECK_THROWS_AS(type_of(a, std::vector<RoundRecord>{}),
                    std::invalid_argument);

    // Large honest sample: total variation to the true conditional law.
    const SimulationResult big = simulate(3, 0.3, 1000, policy, 77);
    const JointDistribution type = type_of(a, big.rounds);
    const auto b = binomial_distribution(3, 0.3);
    double tv = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        const Element& e = a.element(i);
        const double u_share = e.u ? e.m / 3.0 : 1.0 - e.m / 3.0;
        const double c = a.pair_ratio(e.m, e.u);
        const double truth = b[e.m] * u_share * (e.x ? c : 1.0 - c);
        tv += 0.5 * std::abs(type[i] - truth);
    }
    CHECK(tv <= 0.1);
}

TEST_CASE("membership evaluation of the deviation set") {
    const int L = 5;
    const Alphabet a(L);
    const double p_src = 0.2;
    const auto b = binomial_distribution(L, p_src);

    // The honest law is a member even with zero slack margins.
    std::vector<double> honest(a.size());
    for (int i = 0; i < a.size(); ++i) {
        const Element& e = a.element(i);
        const double u_share = e.u ? static_cast<double>(e.m) / L
                                   : 1.0 - static_cast<double>(e.m) / L;
        const double c = a.pair_ratio(e.m, e.u);
        honest[i] = b[e.m] * u_share * (e.x ? c : 1.0 - c);
    }
    const JointDistribution hp(a, honest);
    std::vector<double> nu(L + 1, 0.0);
    for (int m = 1; m <= L; ++m) nu[m] = m;  // L p_src = 1: free from M = 1
    std::vector<double> xi(a.pair_count(), 0.5);
    const MembershipReport ok =
        membership_in_e(hp, nu, 0.0, xi, 0.0, 100.0, 100.0, L, p_src);
    CHECK(ok.member);
    CHECK(ok.nu_slack >= -1e-12);
    CHECK(ok.xi_slack >= -1e-12);

    // A point mass at M = L violates the source constraint.
    std::vector<double> spike(a.size(), 0.0);
    spike[a.index_of(L, 1, 1)] = 1.0;
    const JointDistribution sp(a, spike);
    const MembershipReport bad =
        membership_in_e(sp, nu, 0.1, xi, 0.0, 100.0, 100.0, L, p_src);
    CHECK_FALSE(bad.member);
    CHECK(bad.nu_slack < 0.0);
}

TEST_CASE("pattern enumeration: scale guard and vacuous constraints") {
    const int L = 3;
    const Alphabet a(L);
    std::vector<double> nu(L + 1, 0.0);
    nu[L] = 1.0;
    std::vector<double> xi(a.pair_count(), 0.0);
    std::vector<Tag> tags{{0, 0}, {1, 1}, {0, 1}};

    CHECK_THROWS_AS(
        enumerate_t(9, std::vector<Tag>(9, Tag{0, 0}), nu, 0.0, xi, 0.0, L,
                    0.1, 100.0),
        std::invalid_argument);

    // Generous slacks make every pattern compatible: the tag and the bit
    // determine the letter, so all 2^N patterns are consistent.
    const PatternEnumeration all =
        enumerate_t(3, tags, nu, 10.0, xi, 10.0, L, 0.1, 100.0);
    std::int64_t direct = 0;
    for (int bits = 0; bits < 8; ++bits) {
        bool consistent = true;
        for (int k = 0; k < 3 && consistent; ++k) {
            const int x = (bits >> k) & 1;
            const int u = tags[k].b ^ x;
            consistent = a.index_of(tags[k].a + u + x, u, x) >= 0;
        }
        direct += consistent;
    }
    CHECK(direct == 8);
    CHECK(all.count == direct);
}

TEST_CASE("pattern enumeration: forced-zero mass excludes patterns") {
    // p_src = 0 makes E_b[nu] vanish, and with delta1 = 0 the constraint
    // E_P[nu] <= 0 forbids any mass at M = 3. Tag (1, 0) puts its X = 1
    // letter at M = 3, so patterns selecting X = 1 there drop out.
    const int L = 3;
    const Alphabet a(L);
    std::vector<double> nu{0.0, 0.0, 0.0, 1.0};
    std::vector<double> xi(a.pair_count(), 0.0);
    std::vector<Tag> tags{{1, 0}, {0, 0}, {0, 1}};
    const PatternEnumeration pe =
        enumerate_t(3, tags, nu, 0.0, xi, 10.0, L, 0.0, 100.0);
    CHECK(pe.count == 4);
    for (const auto& pattern : pe.patterns) CHECK(pattern[0] == 0);
}

TEST_CASE("observed types respect the deviation sets at desk scale") {
    // Small Monte Carlo sanity run of the two concentration statements;
    // the acceptance suite runs the full-size version.
    const int L = 7;
    const std::int64_t n_em = 500;
    const int trials = 500;
    const double eta1 = 1e-2, eta2 = 1e-2;

    ProtocolParams pp;
    pp.L = L;
    pp.transmission = 1.0;
    pp.mu = 0.1;
    pp.source_model = SourceModel::explicit_p_src;
    pp.p_src_explicit = 0.1;
    const double p_src = 0.1;

    const AsymptoticSolution sol = asymptotic_hpa(L, p_src, 0.3);
    const MultiplierSet ms = heuristic_multipliers(sol.multipliers);
    const double delta1 =
        sanov_delta1(ms.nu, eta1, static_cast<double>(n_em), L, p_src).delta1;

    const Alphabet a(L);
    HonestRandomPolicy honest(0.3);
    ParityAttackerPolicy attacker(1, 6);
    for (const AdversaryPolicy* policy :
         {static_cast<const AdversaryPolicy*>(&honest),
          static_cast<const AdversaryPolicy*>(&attacker)}) {
        int violations = 0, live = 0;
        for (int t = 0; t < trials; ++t) {
            const SimulationResult sim = simulate(
                L, p_src, n_em, *policy,
                Xoshiro256StarStar::stream(2718, t).next());
            if (sim.n_success == 0) continue;
            ++live;
            const double delta2 =
                bernstein_delta2(eta2, static_cast<double>(sim.n_success));
            const JointDistribution type = type_of(a, sim.rounds);
            const MembershipReport mr = membership_in_e(
                type, ms.nu, delta1, ms.xi, delta2,
                static_cast<double>(sim.n_success),
                static_cast<double>(n_em), L, p_src);
            violations += mr.member ? 0 : 1;
        }
        const double bound = eta1 + eta2;
        const double sigma = std::sqrt(bound * (1 - bound) * live);
        CHECK(violations <= bound * live + 3.0 * sigma + 1.0);
    }
}
