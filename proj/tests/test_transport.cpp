#include <doctest.h>

#include <cmath>
#include <random>

#include "topostir/errors.h"
#include "topostir/transport.h"

using namespace topostir;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec2 rotate(const Vec2& z, double th)
{
    return {std::cos(th) * z.x() - std::sin(th) * z.y(), std::sin(th) * z.x() + std::cos(th) * z.y()};
}

// Uniform outward drift in the empty disk; tracers eventually cross the wall.
class OutwardFlow : public VelocityProvider {
public:
    Vec2 velocity(const Vec2&, double) const override { return {1.0, 0.0}; }
    void velocity_and_gradient(const Vec2& z, double t, Vec2& vel, Mat2& grad) const override
    {
        vel = velocity(z, t);
        grad.setZero();
    }
    DomainSnapshot domain(double t) const override { return DomainSnapshot{t, 0.05, {}}; }
    double period() const override { return 1.0; }
    double clearance(const Vec2& z, double t, Vec2* normal) const override
    {
        const DomainSnapshot d = domain(t);
        if(normal)
            d.nearest_boundary(z, normal);
        return d.clearance(z);
    }
};

ProtocolFlow sigma_flow()
{
    return ProtocolFlow(build_protocol(parse_braid("1 -2")), FlowConditions::potential(4));
}

}  // namespace

TEST_CASE("zero flow leaves tracers in place")
{
    const SteadyFlow f = SteadyFlow::zero();
    const std::vector<Vec2> pts{Vec2(0.1, 0.2), Vec2(-0.7, 0.3)};
    IntegratorOptions o;
    o.dt = 0.01;
    const auto out = advect(pts, 0.0, 1.0, f, o);
    for(std::size_t i = 0; i < pts.size(); ++i)
        CHECK((out[i] - pts[i]).norm() == 0.0);
}

TEST_CASE("solid-body rotation turns tracers by omega t / 2")
{
    const double omega = 1.3;
    const SteadyFlow f = SteadyFlow::solid_body(omega);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    std::vector<Vec2> pts;
    for(int i = 0; i < 20; ++i)
        pts.emplace_back(u(rng), u(rng));
    IntegratorOptions o;
    o.dt = 1e-3;
    const auto out = advect_with_jacobian(pts, 0.0, 2.0, f, o);
    for(std::size_t i = 0; i < pts.size(); ++i) {
        CHECK((out[i].point - rotate(pts[i], omega)).norm() < 1e-12);
        CHECK(out[i].jacobian.determinant() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(out[i].t0 == 0.0);
        CHECK(out[i].t1 == doctest::Approx(2.0));
    }
}

TEST_CASE("RK4 error shrinks with the fourth power of the step")
{
    const SteadyFlow f = SteadyFlow::solid_body(1.0);
    const std::vector<Vec2> start{Vec2(0.6, 0.1)};
    auto error = [&](double h) {
        IntegratorOptions o;
        o.dt = h;
        return (advect(start, 0.0, 8.0, f, o)[0] - rotate(start[0], 4.0)).norm();
    };
    const double ratio = error(0.4) / error(0.2);
    CHECK(ratio > 12);
    CHECK(ratio < 20);
}

TEST_CASE("centered vortex keeps tracers on their circle")
{
    const SteadyFlow f = SteadyFlow::centered_vortex(0.8, 0.05);
    const std::vector<Vec2> pts{Vec2(0.3, 0.0), Vec2(0.0, -0.6)};
    IntegratorOptions o;
    o.dt = 1e-3;
    const auto out = advect(pts, 0.0, 1.0, f, o);
    for(std::size_t i = 0; i < pts.size(); ++i)
        CHECK(out[i].norm() == doctest::Approx(pts[i].norm()).epsilon(1e-10));
    // Positive circulation turns counterclockwise at angular speed gamma / (2 pi r^2).
    const double r = 0.3;
    const double th = 0.8 / (2 * kPi * r * r);
    CHECK((out[0] - rotate(pts[0], th)).norm() < 1e-9);
}

TEST_CASE("step must divide the integration span")
{
    const SteadyFlow f = SteadyFlow::zero();
    const std::vector<Vec2> pts{Vec2(0, 0)};
    IntegratorOptions o;
    o.dt = 0.3;
    CHECK_THROWS_AS(advect(pts, 0.0, 1.0, f, o), ConfigError);
    CHECK_THROWS_AS(inverse_flow(pts, -1, f), ConfigError);
}

TEST_CASE("tracers crossing a wall raise LeftDomain")
{
    const OutwardFlow f;
    const std::vector<Vec2> pts{Vec2(0.5, 0.0)};
    IntegratorOptions o;
    o.dt = 0.01;
    CHECK_NOTHROW(advect(pts, 0.0, 0.4, f, o));
    CHECK_THROWS_AS(advect(pts, 0.0, 1.0, f, o), LeftDomain);
}

TEST_CASE("protocol flow models are reused across periods")
{
    const ProtocolFlow f = sigma_flow();
    CHECK(f.period() == doctest::Approx(2.0));
    CHECK(f.default_step() == doctest::Approx(1e-3));
    f.prepare(0.01);
    const auto models = f.cached_models();
    CHECK(models.size() == 400);
    const auto a = f.model_at(0.25);
    const auto b = f.model_at(0.25 + f.period());
    const auto c = f.model_at(0.25 + 3 * f.period());
    CHECK(a.get() == b.get());
    CHECK(a.get() == c.get());
    for(const auto& m : models)
        CHECK(m->residual().max_normal_residual < 1e-5);

    // Off-grid times are solved directly and agree with an explicit solve.
    const Vec2 z(0.2, 0.6);
    const double t = 0.123456;
    CHECK((f.velocity(z, t) - evaluate_velocity(f.solve_at(t), z)).norm() < 1e-14);
}

TEST_CASE("protocol flow velocity matches the stirrer motion on the stirrer surface")
{
    const ProtocolFlow f = sigma_flow();
    for(double t : {0.2, 0.5, 1.3}) {
        const auto pos = f.protocol().positions(t);
        const auto vel = f.protocol().velocities(t);
        for(int i = 0; i < 3; ++i)
            for(int k = 0; k < 8; ++k) {
                const double th = 2 * kPi * (k + 0.5) / 8;
                const Vec2 n(std::cos(th), std::sin(th));
                const Vec2 z = pos[i] + (0.05 + 1e-9) * n;
                CHECK(std::abs((f.velocity(z, t) - vel[i]).dot(n)) < 1e-5);
            }
    }
}

TEST_CASE("flow-map Jacobian matches finite differences and preserves area")
{
    const ProtocolFlow f = sigma_flow();
    IntegratorOptions o;
    o.dt = 2.0 / 1000;
    const std::vector<Vec2> pts{Vec2(0.2, 0.5), Vec2(-0.3, -0.6), Vec2(0.7, 0.2)};
    const auto out = advect_with_jacobian(pts, 0.0, 2.0, f, o);
    const double h = 1e-6;
    for(std::size_t i = 0; i < pts.size(); ++i) {
        const std::vector<Vec2> shifted{pts[i] + Vec2(h, 0), pts[i] - Vec2(h, 0), pts[i] + Vec2(0, h),
                                        pts[i] - Vec2(0, h)};
        const auto s = advect(shifted, 0.0, 2.0, f, o);
        Mat2 fd;
        fd.col(0) = (s[0] - s[1]) / (2 * h);
        fd.col(1) = (s[2] - s[3]) / (2 * h);
        CHECK((fd - out[i].jacobian).norm() < 1e-4 * std::max(1.0, fd.norm()));
        CHECK(out[i].jacobian.determinant() == doctest::Approx(1.0).epsilon(1e-6));
        CHECK((out[i].point - advect(std::vector<Vec2>{pts[i]}, 0.0, 2.0, f, o)[0]).norm() == 0.0);
    }
}

TEST_CASE("forward then backward advection returns to the start")
{
    const ProtocolFlow f = sigma_flow();
    IntegratorOptions o;
    o.dt = 2.0 / 1000;
    const std::vector<Vec2> pts{Vec2(0.1, 0.4), Vec2(-0.8, 0.1), Vec2(0.3, -0.3)};
    const auto fwd = advect(pts, 0.0, 2.0, f, o);
    const auto back = inverse_flow(fwd, 1, f, o);
    for(std::size_t i = 0; i < pts.size(); ++i) {
        CHECK((back[i].point - pts[i]).norm() < 1e-8);
        CHECK(back[i].jacobian.determinant() == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("default step splits every move into whole steps")
{
    StirrerConfig cfg;
    const ProtocolFlow f(build_protocol(parse_braid("1 2 1"), cfg, 1.0 / 0.7), FlowConditions::potential(4));
    const double dt = f.default_step();
    const double per_move = 0.7 / dt;
    CHECK(std::abs(per_move - std::round(per_move)) < 1e-9);
    CHECK(dt <= f.period() / 2000 * (1 + 1e-12));
}

TEST_CASE("protocol flow is time periodic")
{
    const ProtocolFlow f = sigma_flow();
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0), ut(0.0, 2.0);
    int probes = 0;
    while(probes < 50) {
        const Vec2 z(u(rng), u(rng));
        const double t = ut(rng);
        if(f.clearance(z, t) < 0.01)
            continue;
        const StreamModel m = f.solve_at(t);
        CHECK((f.velocity(z, t) - f.velocity(z, t + f.period())).norm() <= 1e-12);
        CHECK((f.velocity(z, t + 2 * f.period()) - evaluate_velocity(m, z)).norm() <= 10 * m.residual().max_normal_residual);
        ++probes;
    }
}
