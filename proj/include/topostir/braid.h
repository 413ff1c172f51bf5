#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace topostir {

/// One Artin generator of B3 raised to +1 or -1.
struct BraidLetter {
    int generator = 1;  // 1 or 2
    int sign = 1;       // +1 or -1

    bool operator==(const BraidLetter&) const = default;
};

/// A word in the three-strand braid group. Letters act on x-ordered slots.
class BraidWord {
public:
    BraidWord() = default;
    explicit BraidWord(std::vector<BraidLetter> letters);

    const std::vector<BraidLetter>& letters() const { return letters_; }
    std::size_t size() const { return letters_.size(); }
    bool empty() const { return letters_.empty(); }

    /// Cancels adjacent s s^-1 pairs until none remain.
    BraidWord reduced() const;
    BraidWord inverse() const;
    BraidWord operator*(const BraidWord& rhs) const;
    BraidWord power(int n) const;

    /// Signed-integer form, e.g. "1 -2".
    std::string to_string() const;
    /// Letter form, e.g. "aB".
    std::string to_letters() const;

    bool operator==(const BraidWord&) const = default;

private:
    std::vector<BraidLetter> letters_;
};

/// Accepts "1 -2 1", "1,-2", "a B a" or "aBa". Letters are never reduced.
BraidWord parse_braid(std::string_view text);

/// Exact integer 2x2 matrix [[a, b], [c, d]].
struct IntMatrix2 {
    std::int64_t a = 1, b = 0, c = 0, d = 1;

    static IntMatrix2 identity() { return {}; }
    std::int64_t trace() const;
    std::int64_t determinant() const;
    /// Inverse of an SL(2,Z) matrix; throws if det != 1.
    IntMatrix2 inverse() const;
    bool is_identity() const { return a == 1 && b == 0 && c == 0 && d == 1; }

    bool operator==(const IntMatrix2&) const = default;
};

/// Overflow-checked product; throws OverflowError instead of wrapping.
IntMatrix2 operator*(const IntMatrix2& lhs, const IntMatrix2& rhs);

/// Burau representation at t = -1, chi: B3 -> SL(2,Z).
IntMatrix2 burau_at_minus_one(const BraidWord& w);

enum class TNType { PseudoAnosov, FiniteOrder, Parabolic };

std::string to_string(TNType t);

/// Thurston-Nielsen type read off from |trace(chi(w))|.
struct TNClass {
    TNType type = TNType::Parabolic;
    std::int64_t trace = 2;
    /// Expansion constant; 1 unless pseudo-Anosov.
    double expansion = 1.0;
    /// Set when chi(w) is exactly the identity matrix.
    bool identity_matrix = false;

    bool pseudo_anosov() const { return type == TNType::PseudoAnosov; }
};

/// (|tr| + sqrt(tr^2 - 4)) / 2 for |tr| > 2, 1 otherwise.
double expansion_constant(std::int64_t trace);

TNClass classify(const BraidWord& w);

/// log(lambda) in nats per period; throws NotPseudoAnosov when |trace| <= 2.
double entropy_lower_bound(const BraidWord& w);

}  // namespace topostir
