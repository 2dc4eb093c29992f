#ifndef RRDPS_DISTRIBUTION_HPP_
#define RRDPS_DISTRIBUTION_HPP_

#include <vector>

#include "rrdps/alphabet.hpp"

namespace rrdps {

/// A probability mass function over an Alphabet, stored as a vector in
/// canonical element order. Mass must be non-negative and sum to one
/// within 1e-12.
class JointDistribution {
public:
    JointDistribution(const Alphabet& alphabet, std::vector<double> mass);

    static JointDistribution uniform(const Alphabet& alphabet);

    const Alphabet& alphabet() const { return *alphabet_; }
    int size() const { return static_cast<int>(mass_.size()); }
    double operator[](int idx) const { return mass_[idx]; }
    const std::vector<double>& mass() const { return mass_; }

    // Marginal over M, size L + 1.
    std::vector<double> marginal_m() const;
    // Marginal over valid (M, U) pairs, in alphabet pair order.
    std::vector<double> marginal_mu() const;
    // Induced mass of each tag y, size 2(L - 1).
    std::vector<double> tag_mass() const;
    // Induced joint over (X, Y): entry [x * tag_count + y].
    std::vector<double> marginal_xy() const;

private:
    const Alphabet* alphabet_;
    std::vector<double> mass_;
};

}  // namespace rrdps

#endif  // RRDPS_DISTRIBUTION_HPP_
