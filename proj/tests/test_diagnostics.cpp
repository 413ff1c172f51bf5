#include <doctest.h>

#include <cmath>
#include <random>

#include "topostir/diagnostics.h"
#include "topostir/errors.h"

using namespace topostir;

namespace {

constexpr double kPi = 3.14159265358979323846;

GrowthSeries series_of(std::vector<double> v)
{
    GrowthSeries s;
    s.values = std::move(v);
    return s;
}

ProtocolFlow sigma_flow()
{
    return ProtocolFlow(build_protocol(parse_braid("1 -2")), FlowConditions::potential(4));
}

double segment_to_point(const Vec2& a, const Vec2& b, const Vec2& c)
{
    const Vec2 d = b - a;
    const double s = std::clamp((c - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
    return (a + s * d - c).norm();
}

}  // namespace

TEST_CASE("growth fit recovers exact exponentials")
{
    std::vector<double> v;
    for(int n = 0; n <= 8; ++n)
        v.push_back(3.0 * std::exp(0.9 * n));
    const GrowthFit f = estimate_growth_rate(series_of(v));
    CHECK(f.slope == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(f.window_begin == 4);
    CHECK(f.window_end == 8);
    CHECK(f.max_residual < 1e-12);
}

TEST_CASE("growth fit of constant series is zero")
{
    const GrowthFit f = estimate_growth_rate(series_of({2, 2, 2, 2, 2}));
    CHECK(std::abs(f.slope) < 1e-15);
    CHECK(f.window_begin == 2);
}

TEST_CASE("growth fit tolerates multiplicative noise")
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-0.02, 0.02);
    for(int trial = 0; trial < 100; ++trial) {
        const double rate = 0.1 + 0.02 * trial;
        std::vector<double> v;
        for(int n = 0; n <= 8; ++n)
            v.push_back(std::exp(rate * n + u(rng)));
        const GrowthFit f = estimate_growth_rate(series_of(v));
        // Five points at unit spacing: |slope error| <= sum |x - xm| * 0.02 / sum (x - xm)^2.
        CHECK(std::abs(f.slope - rate) <= 0.012 + 1e-12);
        CHECK(f.max_residual <= 0.04 + 1e-12);
    }
}

TEST_CASE("growth fit rejects unusable series")
{
    CHECK_THROWS_AS(estimate_growth_rate(series_of({1, 2, 3})), ConfigError);
    CHECK_THROWS_AS(estimate_growth_rate(series_of({1, 2, 3, 0})), DegenerateSeries);
    CHECK_THROWS_AS(estimate_growth_rate(series_of({1, 2, -1, 4, 5})), DegenerateSeries);
    // Values before the window may be zero.
    CHECK_NOTHROW(estimate_growth_rate(series_of({0, 0, 1, 2, 4})));
}

TEST_CASE("material curve constructors")
{
    const MaterialCurve s = MaterialCurve::segment(Vec2(0, 0.5), Vec2(0.3, 0.9), 10);
    CHECK(s.vertices.size() == 11);
    CHECK(!s.closed);
    CHECK(s.length() == doctest::Approx(0.5));
    const MaterialCurve c = MaterialCurve::circle(Vec2(0.1, 0.2), 0.3, 400);
    CHECK(c.closed);
    CHECK(c.vertices.size() == 400);
    CHECK(c.length() == doctest::Approx(2 * kPi * 0.3).epsilon(1e-4));
}

TEST_CASE("curve length in the zero flow stays constant")
{
    const SteadyFlow f = SteadyFlow::zero();
    IntegratorOptions o;
    o.dt = 0.05;
    const auto ev = evolve_curve(MaterialCurve::segment(Vec2(-0.5, 0.3), Vec2(0.5, 0.3), 8), f, 4, o);
    REQUIRE(ev.series.values.size() == 5);
    for(double v : ev.series.values)
        CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(estimate_growth_rate(ev.series).slope == doctest::Approx(0.0));
    CHECK(!ev.series.budget_exceeded);
}

TEST_CASE("solid-body rotation preserves a circle's length")
{
    const SteadyFlow f = SteadyFlow::solid_body(2.0);
    IntegratorOptions o;
    o.dt = 0.01;
    RefinementOptions r;
    r.max_segment = 0.02;
    const auto ev = evolve_curve(MaterialCurve::circle(Vec2(0.3, 0.1), 0.2, 64), f, 3, o, r);
    for(std::size_t n = 1; n < ev.series.values.size(); ++n)
        CHECK(ev.series.values[n] == doctest::Approx(ev.series.values[0]).epsilon(1e-8));
    for(std::size_t i = 0; i < ev.images.size(); ++i) {
        // Three unit periods at angular speed 1.
        const Vec2& p = ev.preimages[i];
        const Vec2 rot(std::cos(3.0) * p.x() - std::sin(3.0) * p.y(), std::sin(3.0) * p.x() + std::cos(3.0) * p.y());
        CHECK((ev.images[i] - rot).norm() < 1e-9);
    }
}

TEST_CASE("curves must start inside the fluid")
{
    const ProtocolFlow f = sigma_flow();
    CHECK_THROWS_AS(evolve_curve(MaterialCurve::segment(Vec2(-0.9, 0.02), Vec2(0.9, 0.02), 3), f, 1), ConfigError);
    CHECK_THROWS_AS(evolve_curve(MaterialCurve::segment(Vec2(0, 0.5), Vec2(0, 1.2), 4), f, 1), OutOfDomain);
    RefinementOptions r;
    r.max_segment = 0;
    CHECK_THROWS_AS(evolve_curve(MaterialCurve::segment(Vec2(0, 0.5), Vec2(0, 0.7), 4), f, 1, {}, r), ConfigError);
}

TEST_CASE("advected band stays outside the stirrers")
{
    const ProtocolFlow f = sigma_flow();
    IntegratorOptions o;
    o.dt = f.period() / 1000;
    RefinementOptions r;
    r.max_segment = 0.05;
    const auto ev = evolve_curve(MaterialCurve::segment(Vec2(-0.25, -0.9), Vec2(-0.25, 0.9), 32), f, 2, o, r);
    REQUIRE(ev.series.values.size() == 3);
    CHECK(ev.series.values[1] > ev.series.values[0]);
    CHECK(ev.series.values[2] > ev.series.values[1]);
    const DomainSnapshot dom = f.domain(2 * f.period());
    for(std::size_t i = 0; i + 1 < ev.path.size(); ++i)
        for(const auto& c : dom.inner_centers)
            CHECK(segment_to_point(ev.path[i], ev.path[i + 1], c) > dom.epsilon - 1e-3);
    CHECK(ev.images.size() == ev.preimages.size());
    // Each preimage maps to its image under two periods of the flow.
    const auto fwd = advect(std::span<const Vec2>(ev.preimages.data(), std::min<std::size_t>(ev.preimages.size(), 20)),
                            0.0, 2 * f.period(), f, o);
    for(std::size_t i = 0; i < fwd.size(); ++i)
        CHECK((fwd[i] - ev.images[i]).norm() < 1e-9);
}

TEST_CASE("vorticity fields")
{
    const VorticityField c = VorticityField::constant(1.5);
    CHECK(c.value(Vec2(0.3, 0.2)) == 1.5);
    CHECK(c.gradient(Vec2(0.3, 0.2)).norm() == 0);
    const VorticityField lx = VorticityField::linear_x();
    CHECK(lx.value(Vec2(0.3, 0.2)) == 0.3);
    CHECK((lx.gradient(Vec2(0.3, 0.2)) - Vec2(1, 0)).norm() == 0);
    const VorticityField g = VorticityField::gaussian_bump(Vec2(0.1, 0), 0.2, 2.0);
    const Vec2 z(0.25, -0.1), h(1e-6, 0), k(0, 1e-6);
    const Vec2 fd((g.value(z + h) - g.value(z - h)) / 2e-6, (g.value(z + k) - g.value(z - k)) / 2e-6);
    CHECK((fd - g.gradient(z)).norm() < 1e-8);
    CHECK_THROWS_AS(VorticityField::gaussian_bump(Vec2::Zero(), 0.0), ConfigError);
}

TEST_CASE("transported vorticity")
{
    const SteadyFlow zero = SteadyFlow::zero();
    IntegratorOptions o;
    o.dt = 0.01;
    CHECK(transported_vorticity(VorticityField::linear_x(), zero, Vec2(0.3, 0.4), 3, o) == doctest::Approx(0.3));
    CHECK(transported_vorticity(VorticityField::constant(2.0), sigma_flow(), Vec2(0.3, 0.4), 3) == 2.0);
    // A quarter turn of solid-body rotation: the preimage of (0, y) is (y, 0).
    const SteadyFlow rot = SteadyFlow::solid_body(kPi);
    CHECK(transported_vorticity(VorticityField::linear_x(), rot, Vec2(0.0, 0.4), 1, o) ==
          doctest::Approx(0.4).epsilon(1e-10));
}

TEST_CASE("transported vorticity agrees with forward transport")
{
    const ProtocolFlow f = sigma_flow();
    IntegratorOptions o;
    o.dt = f.period() / 1000;
    const VorticityField w = VorticityField::gaussian_bump(Vec2(0.2, 0.3), 0.3);
    const std::vector<Vec2> pts{Vec2(0.1, 0.6), Vec2(-0.6, -0.2)};
    const auto fwd = advect(pts, 0.0, f.period(), f, o);
    for(std::size_t i = 0; i < pts.size(); ++i)
        CHECK(transported_vorticity(w, f, fwd[i], 1, o) == doctest::Approx(w.value(pts[i])).epsilon(1e-5));
}

TEST_CASE("gradient growth follows the chain rule")
{
    const ProtocolFlow f = sigma_flow();
    IntegratorOptions o;
    o.dt = f.period() / 1000;
    const VorticityField w = VorticityField::gaussian_bump(Vec2(0.1, 0.2), 0.4);
    const Vec2 z(0.3, 0.55);
    const std::vector<Vec2> grid{z};
    const GrowthSeries s = vorticity_gradient_growth(w, f, grid, 1, o);
    REQUIRE(s.values.size() == 2);
    CHECK(s.values[0] == doctest::Approx(w.gradient(z).norm()));
    for(double h : {1e-3, 1e-4, 1e-5}) {
        const Vec2 ex(h, 0), ey(0, h);
        const Vec2 fd((transported_vorticity(w, f, z + ex, 1, o) - transported_vorticity(w, f, z - ex, 1, o)) / (2 * h),
                      (transported_vorticity(w, f, z + ey, 1, o) - transported_vorticity(w, f, z - ey, 1, o)) / (2 * h));
        CHECK(fd.norm() == doctest::Approx(s.values[1]).epsilon(1e-3));
    }
}

TEST_CASE("constant vorticity has a degenerate gradient series")
{
    const std::vector<Vec2> grid{Vec2(0.2, 0.2)};
    const GrowthSeries s = vorticity_gradient_growth(VorticityField::constant(1.0), sigma_flow(), grid, 3);
    CHECK(s.degenerate);
    CHECK(s.values == std::vector<double>(4, 0.0));
    CHECK_THROWS_AS(estimate_growth_rate(s), DegenerateSeries);
}

TEST_CASE("interior grid keeps its margin")
{
    const DomainSnapshot dom = snapshot_at(build_protocol(parse_braid("1")), 0.0);
    const auto pts = interior_grid(dom, 32, 0.025);
    CHECK(!pts.empty());
    CHECK(pts.size() < 32 * 32);
    for(const auto& z : pts)
        CHECK(dom.clearance(z) >= 0.025);
    CHECK(interior_grid(dom, 32, 0.0).size() > pts.size());
}

TEST_CASE("polyline circulation")
{
    const SteadyFlow rot = SteadyFlow::solid_body(2.0);
    const MaterialCurve c = MaterialCurve::circle(Vec2(0.1, -0.1), 0.3, 256);
    // Vorticity times enclosed polygon area.
    const double area = 0.5 * 256 * 0.09 * std::sin(2 * kPi / 256);
    CHECK(polyline_circulation(c.vertices, rot, 0.0, 1) == doctest::Approx(2.0 * area).epsilon(1e-12));
    const SteadyFlow vortex = SteadyFlow::centered_vortex(0.7, 0.05);
    const MaterialCurve around = MaterialCurve::circle(Vec2(0.02, 0.0), 0.4, 400);
    CHECK(polyline_circulation(around.vertices, vortex, 0.0, 8) == doctest::Approx(0.7).epsilon(1e-5));
}

TEST_CASE("circulation drift")
{
    IntegratorOptions o;
    o.dt = 0.01;
    const auto z = circulation_drift(SteadyFlow::zero(), MaterialCurve::circle(Vec2(0.2, 0.2), 0.2, 64), 2, o);
    CHECK(z.values.size() == 3);
    CHECK(z.drift == 0.0);

    const auto v = circulation_drift(SteadyFlow::centered_vortex(0.7, 0.05), MaterialCurve::circle(Vec2::Zero(), 0.3, 128),
                                     2, o, {}, 2);
    CHECK(v.values.size() == 5);
    CHECK(v.times.back() == doctest::Approx(2.0));
    CHECK(v.values.front() == doctest::Approx(0.7).epsilon(1e-4));
    CHECK(v.drift < 1e-6);
    CHECK_THROWS_AS(circulation_drift(SteadyFlow::zero(), MaterialCurve::segment(Vec2(0, 0), Vec2(0.1, 0)), 1, o),
                    ConfigError);
}
