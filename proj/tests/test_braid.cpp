#include <doctest.h>

#include <cmath>
#include <random>

#include "topostir/braid.h"
#include "topostir/errors.h"

using namespace topostir;

namespace {

BraidWord random_word(std::mt19937_64& rng, int max_len)
{
    std::uniform_int_distribution<int> len(0, max_len), gen(1, 2), sign(0, 1);
    std::vector<BraidLetter> v(static_cast<std::size_t>(len(rng)));
    for(auto& l : v)
        l = BraidLetter{gen(rng), sign(rng) ? 1 : -1};
    return BraidWord(std::move(v));
}

// Plain matrix product without overflow checks, for an independent route.
IntMatrix2 naive_product(const BraidWord& w)
{
    std::int64_t a = 1, b = 0, c = 0, d = 1;
    for(const auto& l : w.letters()) {
        std::int64_t m[4];
        if(l.generator == 1)
            m[0] = 1, m[1] = l.sign, m[2] = 0, m[3] = 1;
        else
            m[0] = 1, m[1] = 0, m[2] = -l.sign, m[3] = 1;
        const std::int64_t na = a * m[0] + b * m[2], nb = a * m[1] + b * m[3];
        const std::int64_t nc = c * m[0] + d * m[2], nd = c * m[1] + d * m[3];
        a = na, b = nb, c = nc, d = nd;
    }
    return {a, b, c, d};
}

}  // namespace

TEST_CASE("parse accepts integer and letter forms")
{
    const BraidWord w = parse_braid("1 -2");
    CHECK(w == parse_braid("aB"));
    CHECK(w == parse_braid("1,-2"));
    CHECK(w == parse_braid(" a  B "));
    CHECK(w.to_string() == "1 -2");
    CHECK(w.to_letters() == "aB");
    CHECK(parse_braid("").empty());
    CHECK(parse_braid("1 -1").size() == 2);

    CHECK_THROWS_AS(parse_braid("3"), ParseError);
    CHECK_THROWS_AS(parse_braid("0"), ParseError);
    CHECK_THROWS_AS(parse_braid("x"), ParseError);
    CHECK_THROWS_AS(parse_braid("1 - 2"), ParseError);
}

TEST_CASE("word operations")
{
    const BraidWord w = parse_braid("1 2 -2 -1 2");
    CHECK(w.reduced() == parse_braid("2"));
    CHECK((w * w.inverse()).reduced().empty());
    CHECK(parse_braid("1 -2").power(3) == parse_braid("1 -2 1 -2 1 -2"));
    CHECK(parse_braid("1 -2").power(-1) == parse_braid("2 -1"));
    CHECK(parse_braid("1").power(0).empty());
}

TEST_CASE("generator matrices and the full twist")
{
    CHECK(burau_at_minus_one(parse_braid("1")) == IntMatrix2{1, 1, 0, 1});
    CHECK(burau_at_minus_one(parse_braid("2")) == IntMatrix2{1, 0, -1, 1});
    CHECK(burau_at_minus_one(BraidWord{}).is_identity());
    CHECK(burau_at_minus_one(parse_braid("1 2").power(3)) == IntMatrix2{-1, 0, 0, -1});
    CHECK(burau_at_minus_one(parse_braid("1 2").power(6)).is_identity());
}

TEST_CASE("classification")
{
    const TNClass pa = classify(parse_braid("1 -2"));
    CHECK(pa.type == TNType::PseudoAnosov);
    CHECK(pa.trace == 3);
    CHECK(pa.expansion == doctest::Approx((3 + std::sqrt(5.0)) / 2).epsilon(1e-15));
    CHECK(entropy_lower_bound(parse_braid("1 -2")) == doctest::Approx(0.9624236501192069).epsilon(1e-14));

    const TNClass fo = classify(parse_braid("1 2"));
    CHECK(fo.type == TNType::FiniteOrder);
    CHECK(fo.trace == 1);
    CHECK(fo.expansion == 1.0);
    CHECK_THROWS_AS(entropy_lower_bound(parse_braid("1 2")), NotPseudoAnosov);

    const TNClass par = classify(parse_braid("1"));
    CHECK(par.type == TNType::Parabolic);
    CHECK_FALSE(par.identity_matrix);

    const TNClass id = classify(parse_braid("1 2").power(6));
    CHECK(id.type == TNType::Parabolic);
    CHECK(id.identity_matrix);

    // Negative traces count by magnitude.
    const TNClass neg = classify(parse_braid("1 -2") * parse_braid("1 2").power(3));
    CHECK(neg.trace == -3);
    CHECK(neg.pseudo_anosov());
}

TEST_CASE("expansion constant is the larger root of x^2 - |t| x + 1")
{
    for(std::int64_t t = 3; t < 40; ++t) {
        const double lam = expansion_constant(t);
        CHECK(lam * lam - static_cast<double>(t) * lam + 1 == doctest::Approx(0).epsilon(1e-9));
        CHECK(lam > 1);
        CHECK(expansion_constant(-t) == lam);
    }
    CHECK(expansion_constant(2) == 1.0);
    CHECK(expansion_constant(0) == 1.0);
}

TEST_CASE("matrix algebra is exact and overflow is reported")
{
    const IntMatrix2 m{2, 1, 1, 1};
    CHECK((m * m.inverse()).is_identity());
    CHECK_THROWS_AS((IntMatrix2{3, 1, 1, 1}.inverse()), Error);
    CHECK_THROWS_AS(burau_at_minus_one(parse_braid("1 -2").power(60)), OverflowError);
    CHECK_NOTHROW(burau_at_minus_one(parse_braid("1 -2").power(20)));
}

TEST_CASE("representation properties on random words")
{
    std::mt19937_64 rng(42);
    const BraidWord gens[4] = {parse_braid("1"), parse_braid("-1"), parse_braid("2"), parse_braid("-2")};
    for(int trial = 0; trial < 500; ++trial) {
        const BraidWord u = random_word(rng, 12), v = random_word(rng, 12);
        const IntMatrix2 mu = burau_at_minus_one(u);
        CHECK(mu == naive_product(u));
        CHECK(mu.determinant() == 1);
        CHECK(burau_at_minus_one(u * v) == mu * burau_at_minus_one(v));
        CHECK(burau_at_minus_one(u.inverse()) == mu.inverse());
        CHECK(burau_at_minus_one(u.reduced()) == mu);
        for(const auto& g : gens)
            CHECK(classify(g * u * g.inverse()).trace == classify(u).trace);
    }
    CHECK(burau_at_minus_one(parse_braid("1 2 1")) == burau_at_minus_one(parse_braid("2 1 2")));
}
