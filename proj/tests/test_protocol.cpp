#include <doctest.h>

#include <cmath>
#include <random>

#include "topostir/errors.h"
#include "topostir/protocol.h"

using namespace topostir;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<BraidWord> words_up_to(int max_len)
{
    const BraidLetter letters[4] = {{1, 1}, {1, -1}, {2, 1}, {2, -1}};
    std::vector<BraidWord> out{BraidWord{}}, frontier{BraidWord{}};
    for(int len = 1; len <= max_len; ++len) {
        std::vector<BraidWord> next;
        for(const auto& w : frontier)
            for(const auto& l : letters) {
                auto v = w.letters();
                v.push_back(l);
                next.emplace_back(std::move(v));
            }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

}  // namespace

TEST_CASE("stirrer configuration validation")
{
    StirrerConfig c;
    CHECK_NOTHROW(c.validate());
    c.epsilon = 0.2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = StirrerConfig{};
    c.centers[1] = Vec2(-0.45, 0.0);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = StirrerConfig{};
    c.centers[2] = Vec2(0.96, 0.0);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(build_protocol(parse_braid("1"), c), ConfigError);
}

TEST_CASE("swap geometry")
{
    const StirringProtocol p = build_protocol(parse_braid("1 -2"));
    CHECK(p.period() == doctest::Approx(2.0));
    const auto start = p.positions(0);
    CHECK((start[0] - Vec2(-0.5, 0)).norm() < 1e-15);
    CHECK((start[2] - Vec2(0.5, 0)).norm() < 1e-15);

    // Half way through the counterclockwise swap of slots 1 and 2.
    const auto half = p.positions(0.5);
    CHECK((half[0] - Vec2(-0.25, -0.25)).norm() < 1e-14);
    CHECK((half[1] - Vec2(-0.25, 0.25)).norm() < 1e-14);
    CHECK((half[2] - Vec2(0.5, 0)).norm() < 1e-15);

    // Second move, clockwise about the midpoint of slots 2 and 3 (identities 0 and 2).
    const auto later = p.positions(1.5);
    CHECK((later[0] - Vec2(0.25, 0.25)).norm() < 1e-14);
    CHECK((later[2] - Vec2(0.25, -0.25)).norm() < 1e-14);

    // Smooth-step angle: a quarter of the way the swap has turned pi (1/4 - 1/(2 pi)).
    const auto quarter = p.positions(0.25);
    const double th = kPi * (0.25 - std::sin(kPi / 2) / (2 * kPi));
    CHECK((quarter[1] - Vec2(-0.25 + 0.25 * std::cos(th), 0.25 * std::sin(th))).norm() < 1e-14);
}

TEST_CASE("velocities match finite differences and vanish at junctions")
{
    const StirringProtocol p = build_protocol(parse_braid("1 -2 -1 2"));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0, 3 * p.period());
    const double h = 1e-6;
    for(int k = 0; k < 50; ++k) {
        const double t = uni(rng);
        const auto v = p.velocities(t);
        const auto a = p.positions(t + h), b = p.positions(t - h);
        for(int i = 0; i < 3; ++i)
            CHECK(((a[i] - b[i]) / (2 * h) - v[i]).norm() < 1e-7);
    }
    for(int m = 0; m <= 4; ++m)
        for(const auto& v : p.velocities(m * 1.0))
            CHECK(v.norm() < 1e-12);
}

TEST_CASE("period map permutes identities")
{
    const StirringProtocol p = build_protocol(parse_braid("1 -2"));
    const auto& perm = p.permutation();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(0, p.period());
    for(int k = 0; k < 20; ++k) {
        const double t = uni(rng);
        const auto now = p.positions(t), next = p.positions(t + p.period());
        for(int i = 0; i < 3; ++i)
            CHECK((next[i] - now[perm[i]]).norm() < 1e-12);
    }
}

TEST_CASE("hold protocol")
{
    const StirringProtocol p = build_protocol(BraidWord{});
    CHECK(p.period() == doctest::Approx(1.0));
    CHECK(p.moves().size() == 1);
    for(const auto& v : p.velocities(0.3))
        CHECK(v.norm() == 0);
    CHECK(extract_braid(p).empty());
}

TEST_CASE("admissibility report")
{
    const AdmissibilityReport r = validate(build_protocol(parse_braid("1 -2 1 2")));
    CHECK(r.passed);
    CHECK(r.min_gap > 0.3);
    CHECK(r.min_clearance > 0.3);
    CHECK(r.max_velocity_jump < 1e-12);
    CHECK(r.closure_error < 1e-12);

    std::vector<Move> moves{Swap{1, Handedness::Ccw, 1.0}};
    StirrerConfig tight;
    tight.centers = {Vec2(-0.85, 0), Vec2(0.85, 0), Vec2(0, 0.5)};
    // Swapping stirrers 0.85 away from the center sweeps them through the outer wall.
    CHECK_FALSE(validate(StirringProtocol(tight, moves)).passed);
}

TEST_CASE("braid extraction round trip")
{
    for(const auto& w : words_up_to(3))
        CHECK(extract_braid(build_protocol(w), 4000).reduced() == w.reduced());
    const BraidWord w = parse_braid("1 -2 -2 1 2 2 -1");
    CHECK(extract_braid(build_protocol(w)) == w);
}

TEST_CASE("rotating the projection preserves the conjugacy class")
{
    for(const char* text : {"1 -2", "1 2", "1 1 -2", "2 -1 -1 2 1"}) {
        const BraidWord w = parse_braid(text);
        const StirringProtocol p = build_protocol(w);
        for(double angle : {0.3, 1.1, 2.0, -0.7}) {
            const BraidWord seen = extract_braid(p, 10000, angle);
            CHECK(classify(seen).trace == classify(w).trace);
        }
    }
}

TEST_CASE("degenerate projection")
{
    // Collinear stirrers that never move project to a single point on the y axis.
    CHECK_THROWS_AS(extract_braid(build_protocol(BraidWord{}), 1000, kPi / 2), DegenerateProjection);
}
