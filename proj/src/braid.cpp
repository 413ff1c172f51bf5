#include "topostir/braid.h"

#include <cctype>
#include <charconv>
#include <cmath>

#include "topostir/errors.h"

namespace topostir {

BraidWord::BraidWord(std::vector<BraidLetter> letters) : letters_(std::move(letters))
{
    for(const auto& l : letters_) {
        if(l.generator != 1 && l.generator != 2)
            throw ParseError("generator index must be 1 or 2, got " + std::to_string(l.generator));
        if(l.sign != 1 && l.sign != -1)
            throw ParseError("generator exponent must be +1 or -1");
    }
}

BraidWord BraidWord::reduced() const
{
    std::vector<BraidLetter> out;
    out.reserve(letters_.size());
    for(const auto& l : letters_) {
        if(!out.empty() && out.back().generator == l.generator && out.back().sign == -l.sign)
            out.pop_back();
        else
            out.push_back(l);
    }
    return BraidWord(std::move(out));
}

BraidWord BraidWord::inverse() const
{
    std::vector<BraidLetter> out(letters_.rbegin(), letters_.rend());
    for(auto& l : out)
        l.sign = -l.sign;
    return BraidWord(std::move(out));
}

BraidWord BraidWord::operator*(const BraidWord& rhs) const
{
    std::vector<BraidLetter> out = letters_;
    out.insert(out.end(), rhs.letters_.begin(), rhs.letters_.end());
    return BraidWord(std::move(out));
}

BraidWord BraidWord::power(int n) const
{
    const BraidWord base = n < 0 ? inverse() : *this;
    BraidWord out;
    for(int i = 0; i < std::abs(n); ++i)
        out = out * base;
    return out;
}

std::string BraidWord::to_string() const
{
    std::string s;
    for(const auto& l : letters_) {
        if(!s.empty())
            s += ' ';
        s += std::to_string(l.sign * l.generator);
    }
    return s;
}

std::string BraidWord::to_letters() const
{
    std::string s;
    for(const auto& l : letters_) {
        const char base = l.sign > 0 ? 'a' : 'A';
        s += static_cast<char>(base + l.generator - 1);
    }
    return s;
}

BraidWord parse_braid(std::string_view text)
{
    std::vector<BraidLetter> letters;
    std::size_t i = 0;
    while(i < text.size()) {
        const char ch = text[i];
        if(std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
            ++i;
            continue;
        }
        if(std::isalpha(static_cast<unsigned char>(ch))) {
            const int lower = std::tolower(static_cast<unsigned char>(ch));
            const int gen = lower - 'a' + 1;
            if(gen < 1 || gen > 2)
                throw ParseError(std::string("unknown braid letter '") + ch + "'");
            letters.push_back({gen, std::islower(static_cast<unsigned char>(ch)) ? 1 : -1});
            ++i;
            continue;
        }
        std::size_t j = i;
        if(text[j] == '+' || text[j] == '-')
            ++j;
        while(j < text.size() && std::isdigit(static_cast<unsigned char>(text[j])))
            ++j;
        const std::string_view token = text.substr(i, j - i);
        const bool plus = !token.empty() && token.front() == '+';
        int value = 0;
        const char* first = token.data() + (plus ? 1 : 0);
        const char* last = token.data() + token.size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if(ec != std::errc() || ptr != last || first == last)
            throw ParseError("unknown braid token '" + std::string(text.substr(i, std::max<std::size_t>(j - i, 1))) + "'");
        if(value != 1 && value != -1 && value != 2 && value != -2)
            throw ParseError("generator index outside {1,2}: " + std::string(token));
        letters.push_back({std::abs(value), value > 0 ? 1 : -1});
        i = j;
    }
    return BraidWord(std::move(letters));
}

namespace {

std::int64_t checked_mul(std::int64_t x, std::int64_t y)
{
    std::int64_t r;
    if(__builtin_mul_overflow(x, y, &r))
        throw OverflowError("integer overflow in braid matrix product");
    return r;
}

std::int64_t checked_add(std::int64_t x, std::int64_t y)
{
    std::int64_t r;
    if(__builtin_add_overflow(x, y, &r))
        throw OverflowError("integer overflow in braid matrix product");
    return r;
}

const IntMatrix2 kSigma1{1, 1, 0, 1};
const IntMatrix2 kSigma2{1, 0, -1, 1};

}  // namespace

std::int64_t IntMatrix2::trace() const { return checked_add(a, d); }

std::int64_t IntMatrix2::determinant() const
{
    return checked_add(checked_mul(a, d), -checked_mul(b, c));
}

IntMatrix2 IntMatrix2::inverse() const
{
    if(determinant() != 1)
        throw Error("matrix is not in SL(2,Z)");
    return {d, -b, -c, a};
}

IntMatrix2 operator*(const IntMatrix2& l, const IntMatrix2& r)
{
    return {checked_add(checked_mul(l.a, r.a), checked_mul(l.b, r.c)),
            checked_add(checked_mul(l.a, r.b), checked_mul(l.b, r.d)),
            checked_add(checked_mul(l.c, r.a), checked_mul(l.d, r.c)),
            checked_add(checked_mul(l.c, r.b), checked_mul(l.d, r.d))};
}

IntMatrix2 burau_at_minus_one(const BraidWord& w)
{
    IntMatrix2 m = IntMatrix2::identity();
    for(const auto& l : w.letters()) {
        const IntMatrix2& g = l.generator == 1 ? kSigma1 : kSigma2;
        m = m * (l.sign > 0 ? g : g.inverse());
    }
    return m;
}

std::string to_string(TNType t)
{
    switch(t) {
    case TNType::PseudoAnosov: return "pseudo-Anosov";
    case TNType::FiniteOrder: return "finite-order";
    case TNType::Parabolic: return "parabolic";
    }
    return "unknown";
}

double expansion_constant(std::int64_t trace)
{
    const double t = std::abs(static_cast<double>(trace));
    if(t <= 2)
        return 1.0;
    return 0.5 * (t + std::sqrt((t - 2) * (t + 2)));
}

TNClass classify(const BraidWord& w)
{
    const IntMatrix2 m = burau_at_minus_one(w);
    TNClass out;
    out.trace = m.trace();
    const std::int64_t mag = out.trace < 0 ? -out.trace : out.trace;
    if(mag > 2) {
        out.type = TNType::PseudoAnosov;
        out.expansion = expansion_constant(out.trace);
    } else if(mag < 2) {
        out.type = TNType::FiniteOrder;
    } else {
        out.type = TNType::Parabolic;
        out.identity_matrix = m.is_identity();
    }
    return out;
}

double entropy_lower_bound(const BraidWord& w)
{
    const TNClass c = classify(w);
    if(!c.pseudo_anosov())
        throw NotPseudoAnosov("braid '" + w.to_string() + "' has |trace| = " +
                              std::to_string(c.trace < 0 ? -c.trace : c.trace) + " <= 2");
    return std::log(c.expansion);
}

}  // namespace topostir
