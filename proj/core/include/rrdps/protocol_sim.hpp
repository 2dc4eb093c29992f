#ifndef RRDPS_PROTOCOL_SIM_HPP_
#define RRDPS_PROTOCOL_SIM_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rrdps/alphabet.hpp"
#include "rrdps/distribution.hpp"
#include "rrdps/rng.hpp"

namespace rrdps {

/// One emitted block: the phase-basis bits, the announcement, and the
/// derived per-round variables. For failure rounds only `s_bits` and `m`
/// are meaningful.
struct RoundRecord {
    bool success = false;
    int i = 0;  // detected position, 1..L
    int j = 0;  // partner position, 1..L, != i
    std::vector<std::uint8_t> s_bits;
    int m = 0;  // sum of the bits
    int u = 0;  // bit at i
    int x = 0;  // bit at j
    int a = 0;  // m - u - x
    int b = 0;  // u xor x
};

/// Decision rule mapping a round's bit vector to (success, detected
/// position). The partner position j is never under policy control: the
/// simulator always draws it uniformly from the other L-1 positions.
class AdversaryPolicy {
public:
    virtual ~AdversaryPolicy() = default;
    // Returns {success, i (1-based)}; i is ignored on failure.
    virtual std::pair<bool, int> decide(std::span<const std::uint8_t> bits,
                                        Xoshiro256StarStar& rng) const = 0;
    virtual std::string name() const = 0;
};

// Success with a fixed probability, detected position uniform.
class HonestRandomPolicy : public AdversaryPolicy {
public:
    explicit HonestRandomPolicy(double success_rate) : rate_(success_rate) {}
    std::pair<bool, int> decide(std::span<const std::uint8_t> bits,
                                Xoshiro256StarStar& rng) const override;
    std::string name() const override { return "honest_random"; }

private:
    double rate_;
};

// Succeeds only on rounds whose bit sum falls in the targeted band, and
// points the detection at a position with bit value zero.
class ParityAttackerPolicy : public AdversaryPolicy {
public:
    ParityAttackerPolicy(int band_lo, int band_hi)
        : band_lo_(band_lo), band_hi_(band_hi) {}
    std::pair<bool, int> decide(std::span<const std::uint8_t> bits,
                                Xoshiro256StarStar& rng) const override;
    std::string name() const override { return "parity_attacker"; }

private:
    int band_lo_, band_hi_;
};

struct SimulationResult {
    std::vector<RoundRecord> rounds;
    std::vector<std::int64_t> v;  // rounds with bit sum M, size L + 1
    std::int64_t n_success = 0;
};

// Draws each round's bits i.i.d. Bernoulli(p_odd), lets the policy pick
// (success, i), draws j uniformly, and derives the per-round variables.
// Deterministic given the seed.
SimulationResult simulate(int block_length, double p_odd, std::int64_t n_em,
                          const AdversaryPolicy& policy, std::uint64_t seed);

// Empirical type of the success rounds over the alphabet; throws on an
// empty sample.
JointDistribution type_of(const Alphabet& alphabet,
                          const std::vector<RoundRecord>& rounds);

struct MembershipReport {
    bool member = false;
    double nu_slack = 0.0;  // bound minus attained value
    double xi_slack = 0.0;
};

// Evaluates both deviation-set inequalities directly on P.
MembershipReport membership_in_e(const JointDistribution& p,
                                 std::span<const double> nu, double delta1,
                                 std::span<const double> xi, double delta2,
                                 double n_rounds, double n_em, int block_length,
                                 double p_src);

struct PatternEnumeration {
    std::vector<std::vector<std::uint8_t>> patterns;
    std::int64_t count = 0;
};

// Brute-force construction of the compatible-pattern set for a tag
// sequence: every x^N whose joint type with y^N extends to a member of the
// deviation set. Desk scale only: N <= 8 and L <= 5.
PatternEnumeration enumerate_t(int n_rounds, std::span<const Tag> y_seq,
                               std::span<const double> nu, double delta1,
                               std::span<const double> xi, double delta2,
                               int block_length, double p_src, double n_em);

}  // namespace rrdps

#endif  // RRDPS_PROTOCOL_SIM_HPP_
