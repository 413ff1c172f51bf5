#include "topostir/transport.h"

#include <cmath>
#include <string>

#include "topostir/errors.h"
#include "topostir/parallel.h"

namespace topostir {

namespace {

constexpr double kPi = 3.14159265358979323846;

double domain_clearance(const DomainSnapshot& dom, const Vec2& z, Vec2* normal)
{
    const double c = dom.clearance(z);
    if(normal)
        dom.nearest_boundary(z, normal);
    return c;
}

}  // namespace

SteadyFlow::SteadyFlow(StreamModel model, double period) : model_(std::move(model)), period_(period) {}

SteadyFlow SteadyFlow::zero()
{
    return SteadyFlow(StreamModel::from_coefficients(DomainSnapshot{0, 0.05, {}}, 0.0, {}, {0.0}, {}));
}

SteadyFlow SteadyFlow::solid_body(double omega)
{
    return SteadyFlow(StreamModel::from_coefficients(DomainSnapshot{0, 0.05, {}}, omega, {}, {0.0}, {}));
}

SteadyFlow SteadyFlow::centered_vortex(double gamma, double eps)
{
    DomainSnapshot dom{0, eps, {Vec2::Zero()}};
    return SteadyFlow(StreamModel::from_coefficients(dom, 0.0, {-gamma / (2 * kPi)}, {0.0}, {{}}));
}

Vec2 SteadyFlow::velocity(const Vec2& z, double) const { return model_.velocity_unchecked(z); }

void SteadyFlow::velocity_and_gradient(const Vec2& z, double, Vec2& vel, Mat2& grad) const
{
    model_.velocity_and_gradient_unchecked(z, vel, grad);
}

DomainSnapshot SteadyFlow::domain(double t) const
{
    DomainSnapshot d = model_.domain();
    d.time = t;
    return d;
}

double SteadyFlow::clearance(const Vec2& z, double, Vec2* normal) const
{
    return domain_clearance(model_.domain(), z, normal);
}

DomainSnapshot snapshot_at(const StirringProtocol& p, double t)
{
    const auto c = p.positions(t);
    return DomainSnapshot{t, p.config().epsilon, {c[0], c[1], c[2]}};
}

ProtocolFlow::ProtocolFlow(StirringProtocol protocol, FlowConditions conditions, SolverOptions solver)
    : protocol_(std::move(protocol)), conditions_(std::move(conditions)), solver_(solver)
{
    solver_.validate();
    // Re-validates the circulation constraint against this protocol's area.
    conditions_ = FlowConditions(conditions_.omega(), conditions_.circulations(), snapshot_at(protocol_, 0));
}

StreamModel ProtocolFlow::solve_at(double t) const
{
    const DomainSnapshot dom = snapshot_at(protocol_, t);
    const auto v = protocol_.velocities(t);
    const std::vector<Vec2> bv{Vec2::Zero(), v[0], v[1], v[2]};
    return solve_stream(dom, conditions_, bv, solver_);
}

double ProtocolFlow::default_step() const
{
    const auto& moves = protocol_.moves();
    const double first = duration_of(moves.front());
    bool equal = true;
    for(const auto& m : moves)
        equal = equal && std::abs(duration_of(m) - first) <= 1e-12 * first;
    if(!equal)
        return period() / 2000;
    const long per_move = (2000 + static_cast<long>(moves.size()) - 1) / static_cast<long>(moves.size());
    return first / static_cast<double>(per_move);
}

void ProtocolFlow::prepare(double dt) const
{
    std::lock_guard lock(mutex_);
    const double quantum = dt / 2;
    if(quantum_ == quantum && !grid_.empty())
        return;
    for(const auto& m : protocol_.moves()) {
        const double ratio = duration_of(m) / dt;
        if(std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
            throw ConfigError("time step " + std::to_string(dt) + " does not divide move duration " +
                              std::to_string(duration_of(m)));
    }
    const double T = period();
    const std::size_t n = static_cast<std::size_t>(std::llround(T / quantum));
    std::vector<std::shared_ptr<const StreamModel>> grid(n);
    parallel_for(n, [&](std::size_t k) {
        grid[k] = std::make_shared<const StreamModel>(solve_at(static_cast<double>(k) * quantum));
    });
    grid_ = std::move(grid);
    quantum_ = quantum;
}

std::vector<std::shared_ptr<const StreamModel>> ProtocolFlow::cached_models() const
{
    std::lock_guard lock(mutex_);
    return grid_;
}

const StreamModel& ProtocolFlow::lookup(double t, std::shared_ptr<const StreamModel>& holder) const
{
    const double T = period();
    double tau = std::fmod(t, T);
    if(tau < 0)
        tau += T;
    if(!grid_.empty()) {
        const double q = tau / quantum_;
        long long k = std::llround(q);
        if(std::abs(q - static_cast<double>(k)) < 1e-6) {
            if(k >= static_cast<long long>(grid_.size()))
                k = 0;
            return *grid_[static_cast<std::size_t>(k)];
        }
    }
    std::lock_guard lock(mutex_);
    auto it = off_grid_.find(tau);
    if(it == off_grid_.end())
        it = off_grid_.emplace(tau, std::make_shared<const StreamModel>(solve_at(tau))).first;
    holder = it->second;
    return *holder;
}

std::shared_ptr<const StreamModel> ProtocolFlow::model_at(double t) const
{
    std::shared_ptr<const StreamModel> holder;
    const StreamModel& m = lookup(t, holder);
    if(holder)
        return holder;
    return std::shared_ptr<const StreamModel>(std::shared_ptr<const StreamModel>{}, &m);
}

Vec2 ProtocolFlow::velocity(const Vec2& z, double t) const
{
    std::shared_ptr<const StreamModel> holder;
    return lookup(t, holder).velocity_unchecked(z);
}

void ProtocolFlow::velocity_and_gradient(const Vec2& z, double t, Vec2& vel, Mat2& grad) const
{
    std::shared_ptr<const StreamModel> holder;
    lookup(t, holder).velocity_and_gradient_unchecked(z, vel, grad);
}

double ProtocolFlow::clearance(const Vec2& z, double t, Vec2* normal) const
{
    std::shared_ptr<const StreamModel> holder;
    return domain_clearance(lookup(t, holder).domain(), z, normal);
}

double IntegratorOptions::step_for(const VelocityProvider& vp) const
{
    const double h = dt > 0 ? dt : vp.default_step();
    if(!(h > 0))
        throw ConfigError("integrator step must be positive");
    return h;
}

namespace {

struct StepPlan {
    long steps = 0;
    double h = 0;  // signed
};

StepPlan plan_steps(double t0, double t1, double dt)
{
    const double span = std::abs(t1 - t0);
    const long steps = std::lround(span / dt);
    if(std::abs(static_cast<double>(steps) * dt - span) > 1e-9 * std::max(1.0, span))
        throw ConfigError("time step " + std::to_string(dt) + " does not divide the span " + std::to_string(span));
    return {steps, t1 >= t0 ? dt : -dt};
}

void guard(const VelocityProvider& vp, Vec2& z, double t)
{
    Vec2 n;
    const double c = vp.clearance(z, t, &n);
    if(c < -kLeaveTolerance)
        throw LeftDomain("tracer at (" + std::to_string(z.x()) + ", " + std::to_string(z.y()) +
                         ") penetrated a boundary by " + std::to_string(-c) + " at t = " + std::to_string(t));
    if(c < kGrazeDistance)
        z += (kGrazeDistance - c) * n;
}

Vec2 integrate_point(Vec2 z, double t0, const StepPlan& plan, const VelocityProvider& vp)
{
    const double h = plan.h;
    for(long s = 0; s < plan.steps; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        guard(vp, z, t);
        const Vec2 k1 = vp.velocity(z, t);
        const Vec2 k2 = vp.velocity(z + 0.5 * h * k1, t + 0.5 * h);
        const Vec2 k3 = vp.velocity(z + 0.5 * h * k2, t + 0.5 * h);
        const Vec2 k4 = vp.velocity(z + h * k3, t + h);
        z += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    guard(vp, z, t0 + static_cast<double>(plan.steps) * h);
    return z;
}

FlowMapSample integrate_with_jacobian(Vec2 z, double t0, const StepPlan& plan, const VelocityProvider& vp)
{
    const double h = plan.h;
    Mat2 J = Mat2::Identity();
    Vec2 v1, v2, v3, v4;
    Mat2 g1, g2, g3, g4;
    for(long s = 0; s < plan.steps; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        guard(vp, z, t);
        vp.velocity_and_gradient(z, t, v1, g1);
        const Mat2 K1 = g1 * J;
        vp.velocity_and_gradient(z + 0.5 * h * v1, t + 0.5 * h, v2, g2);
        const Mat2 K2 = g2 * (J + 0.5 * h * K1);
        vp.velocity_and_gradient(z + 0.5 * h * v2, t + 0.5 * h, v3, g3);
        const Mat2 K3 = g3 * (J + 0.5 * h * K2);
        vp.velocity_and_gradient(z + h * v3, t + h, v4, g4);
        const Mat2 K4 = g4 * (J + h * K3);
        z += (h / 6) * (v1 + 2 * v2 + 2 * v3 + v4);
        J += (h / 6) * (K1 + 2 * K2 + 2 * K3 + K4);
    }
    const double t1 = t0 + static_cast<double>(plan.steps) * h;
    guard(vp, z, t1);
    return {z, J, t0, t1};
}

}  // namespace

std::vector<Vec2> advect(std::span<const Vec2> points, double t0, double t1, const VelocityProvider& vp,
                         const IntegratorOptions& opts)
{
    const double dt = opts.step_for(vp);
    const StepPlan plan = plan_steps(t0, t1, dt);
    vp.prepare(dt);
    std::vector<Vec2> out(points.size());
    parallel_for(points.size(), [&](std::size_t i) { out[i] = integrate_point(points[i], t0, plan, vp); });
    return out;
}

std::vector<FlowMapSample> advect_with_jacobian(std::span<const Vec2> points, double t0, double t1,
                                                const VelocityProvider& vp, const IntegratorOptions& opts)
{
    const double dt = opts.step_for(vp);
    const StepPlan plan = plan_steps(t0, t1, dt);
    vp.prepare(dt);
    std::vector<FlowMapSample> out(points.size());
    parallel_for(points.size(),
                 [&](std::size_t i) { out[i] = integrate_with_jacobian(points[i], t0, plan, vp); });
    return out;
}

std::vector<FlowMapSample> inverse_flow(std::span<const Vec2> points, int periods, const VelocityProvider& vp,
                                        const IntegratorOptions& opts)
{
    if(periods < 0)
        throw ConfigError("period count must be non-negative");
    return advect_with_jacobian(points, periods * vp.period(), 0.0, vp, opts);
}

}  // namespace topostir
