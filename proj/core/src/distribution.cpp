#include "rrdps/distribution.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rrdps {

JointDistribution::JointDistribution(const Alphabet& alphabet,
                                     std::vector<double> mass)
    : alphabet_(&alphabet), mass_(std::move(mass)) {
    if (static_cast<int>(mass_.size()) != alphabet.size()) {
        throw std::invalid_argument("mass vector size " +
                                    std::to_string(mass_.size()) +
                                    " does not match alphabet size " +
                                    std::to_string(alphabet.size()));
    }
    double total = 0.0;
    for (double v : mass_) {
        if (!(v >= 0.0)) {
            throw std::invalid_argument("mass entries must be non-negative");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("mass must sum to 1 within 1e-12, got " +
                                    std::to_string(total));
    }
}

JointDistribution JointDistribution::uniform(const Alphabet& alphabet) {
    std::vector<double> mass(alphabet.size(), 1.0 / alphabet.size());
    return JointDistribution(alphabet, std::move(mass));
}

std::vector<double> JointDistribution::marginal_m() const {
    std::vector<double> out(alphabet_->block_length() + 1, 0.0);
    for (int i = 0; i < size(); ++i) out[alphabet_->element(i).m] += mass_[i];
    return out;
}

std::vector<double> JointDistribution::marginal_mu() const {
    std::vector<double> out(alphabet_->pair_count(), 0.0);
    for (int i = 0; i < size(); ++i) {
        out[alphabet_->pair_index_of_element(i)] += mass_[i];
    }
    return out;
}

std::vector<double> JointDistribution::tag_mass() const {
    std::vector<double> out(alphabet_->tag_count(), 0.0);
    for (int i = 0; i < size(); ++i) {
        out[alphabet_->tag_index_of_element(i)] += mass_[i];
    }
    return out;
}

std::vector<double> JointDistribution::marginal_xy() const {
    const int ny = alphabet_->tag_count();
    std::vector<double> out(2 * ny, 0.0);
    for (int i = 0; i < size(); ++i) {
        const Element& e = alphabet_->element(i);
        out[e.x * ny + alphabet_->tag_index_of_element(i)] += mass_[i];
    }
    return out;
}

}  // namespace rrdps
