#ifndef RRDPS_ALPHABET_HPP_
#define RRDPS_ALPHABET_HPP_

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace rrdps {

// One letter (M, U, X): M odd-parity pulses in the block, U the parity at the
// detected position, X the parity at the partner position.
struct Element {
    int m;
    int u;
    int x;
};

// Announcement tag y = (a, b) with a = M - U - X and b = U xor X.
struct Tag {
    int a;
    int b;
};

/// The finite alphabet of per-round triples (M, U, X) for block length L.
///
/// Valid letters satisfy 0 <= M - U - X <= L - 2; they are stored in
/// lexicographic (M, U, X) order so that distributions are plain indexed
/// vectors. Every tag value y = (a, b) has exactly two letters, one per
/// value of X, which makes the map (M, U, X) -> (X, y) a bijection.
class Alphabet {
public:
    explicit Alphabet(int block_length);

    int block_length() const { return block_length_; }
    int size() const { return static_cast<int>(elements_.size()); }

    const Element& element(int idx) const { return elements_[idx]; }
    const std::vector<Element>& elements() const { return elements_; }

    // Index of (m, u, x) in canonical order, or -1 if outside the alphabet.
    int index_of(int m, int u, int x) const;

    Tag tag_of_element(int idx) const;
    static Tag tag_of(int m, int u, int x) { return Tag{m - u - x, u ^ x}; }

    // Tags are indexed as a * 2 + b, a in 0..L-2, b in 0..1.
    int tag_count() const { return 2 * (block_length_ - 1); }
    int tag_index(const Tag& t) const { return t.a * 2 + t.b; }
    int tag_index_of_element(int idx) const { return tag_index_[idx]; }

    // Members of a tag: [index with X = 0, index with X = 1].
    const std::array<int, 2>& tag_members(int tag_idx) const {
        return tag_members_[tag_idx];
    }

    // Pair ratio c(M, U) = (M - U) / (L - 1); in [0, 1] for every valid pair.
    double pair_ratio(int m, int u) const {
        return static_cast<double>(m - u) / (block_length_ - 1);
    }

    // Valid (M, U) pairs: 0 <= c(M, U) <= 1 and at least one X present.
    int pair_count() const { return static_cast<int>(pairs_.size()); }
    const std::pair<int, int>& pair(int pair_idx) const { return pairs_[pair_idx]; }
    int pair_index(int m, int u) const;
    int pair_index_of_element(int idx) const { return pair_of_element_[idx]; }

private:
    int block_length_;
    std::vector<Element> elements_;
    std::vector<int> tag_index_;
    std::vector<std::array<int, 2>> tag_members_;
    std::vector<std::pair<int, int>> pairs_;
    std::vector<int> pair_of_element_;
    std::vector<int> element_lookup_;  // (m * 2 + u) * 2 + x -> element index
    std::vector<int> pair_lookup_;     // m * 2 + u -> pair index
};

}  // namespace rrdps

#endif  // RRDPS_ALPHABET_HPP_
