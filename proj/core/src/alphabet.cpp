#include "rrdps/alphabet.hpp"

#include <cassert>
#include <stdexcept>
#include <string>

namespace rrdps {

Alphabet::Alphabet(int block_length) : block_length_(block_length) {
    if (block_length < 2) {
        throw std::invalid_argument("block length must be at least 2, got " +
                                    std::to_string(block_length));
    }
    const int L = block_length;
    element_lookup_.assign((L + 1) * 4, -1);
    pair_lookup_.assign((L + 1) * 2, -1);
    tag_members_.assign(2 * (L - 1), std::array<int, 2>{-1, -1});

    for (int m = 0; m <= L; ++m) {
        for (int u = 0; u <= 1; ++u) {
            for (int x = 0; x <= 1; ++x) {
                const int a = m - u - x;
                if (a < 0 || a > L - 2) continue;
                const int idx = static_cast<int>(elements_.size());
                elements_.push_back(Element{m, u, x});
                element_lookup_[(m * 2 + u) * 2 + x] = idx;

                const Tag t{a, u ^ x};
                tag_index_.push_back(tag_index(t));
                tag_members_[tag_index(t)][x] = idx;

                // c(M,U) in [0,1] follows from the alphabet constraint.
                const double c = pair_ratio(m, u);
                assert(c >= 0.0 && c <= 1.0);
                (void)c;

                if (pair_lookup_[m * 2 + u] < 0) {
                    pair_lookup_[m * 2 + u] = static_cast<int>(pairs_.size());
                    pairs_.emplace_back(m, u);
                }
                pair_of_element_.push_back(pair_lookup_[m * 2 + u]);
            }
        }
    }

    // Every tag has both an X=0 and an X=1 letter.
    for (const auto& members : tag_members_) {
        assert(members[0] >= 0 && members[1] >= 0);
        (void)members;
    }
}

int Alphabet::index_of(int m, int u, int x) const {
    if (m < 0 || m > block_length_ || u < 0 || u > 1 || x < 0 || x > 1) return -1;
    return element_lookup_[(m * 2 + u) * 2 + x];
}

Tag Alphabet::tag_of_element(int idx) const {
    const Element& e = elements_[idx];
    return tag_of(e.m, e.u, e.x);
}

int Alphabet::pair_index(int m, int u) const {
    if (m < 0 || m > block_length_ || u < 0 || u > 1) return -1;
    return pair_lookup_[m * 2 + u];
}

}  // namespace rrdps
