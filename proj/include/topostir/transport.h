#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "topostir/field.h"
#include "topostir/protocol.h"

namespace topostir {

/// Time-dependent velocity field X(z, t) on a moving domain.
class VelocityProvider {
public:
    virtual ~VelocityProvider() = default;

    virtual Vec2 velocity(const Vec2& z, double t) const = 0;
    virtual void velocity_and_gradient(const Vec2& z, double t, Vec2& vel, Mat2& grad) const = 0;
    /// Fluid domain at time t.
    virtual DomainSnapshot domain(double t) const = 0;
    /// Period T of the flow (any positive number for steady flows).
    virtual double period() const = 0;
    /// Signed distance to the nearest boundary at time t and the unit normal
    /// pointing into the fluid there.
    virtual double clearance(const Vec2& z, double t, Vec2* normal = nullptr) const = 0;
    /// Step used when IntegratorOptions::dt is 0.
    virtual double default_step() const { return period() / 2000; }
    /// Called on the integrating thread before an integration with step dt;
    /// providers may precompute. Must not run concurrently with evaluation.
    virtual void prepare(double /*dt*/) const {}
};

/// A single stream model used at every time (fixed boundaries).
class SteadyFlow : public VelocityProvider {
public:
    explicit SteadyFlow(StreamModel model, double period = 1.0);

    /// Identically zero velocity in the disk with no stirrers.
    static SteadyFlow zero();
    /// Psi = -omega |z|^2 / 4 in the disk with no stirrers.
    static SteadyFlow solid_body(double omega);
    /// Psi = -(gamma / 2 pi) log|z| around one centered stirrer of radius eps.
    static SteadyFlow centered_vortex(double gamma, double eps);

    const StreamModel& model() const { return model_; }
    Vec2 velocity(const Vec2& z, double t) const override;
    void velocity_and_gradient(const Vec2& z, double t, Vec2& vel, Mat2& grad) const override;
    DomainSnapshot domain(double t) const override;
    double period() const override { return period_; }
    double clearance(const Vec2& z, double t, Vec2* normal = nullptr) const override;

private:
    StreamModel model_;
    double period_;
};

/// Domain snapshot of a protocol at time t (stirrers in identity order).
DomainSnapshot snapshot_at(const StirringProtocol& p, double t);

/// Constant-vorticity flow compatible with a stirring protocol. Stream
/// models are solved per snapshot and memoized on the time grid of spacing
/// quantum (dt / 2 of the integrator), keyed by t mod T: the domain and its
/// boundary velocities are T-periodic as sets, so one period of models
/// serves every period.
class ProtocolFlow : public VelocityProvider {
public:
    ProtocolFlow(StirringProtocol protocol, FlowConditions conditions, SolverOptions solver = {});

    const StirringProtocol& protocol() const { return protocol_; }
    const FlowConditions& conditions() const { return conditions_; }
    const SolverOptions& solver() const { return solver_; }

    /// Solves the model for time t without touching the cache.
    StreamModel solve_at(double t) const;
    /// Model used for time t: cached grid model when t is on the grid.
    std::shared_ptr<const StreamModel> model_at(double t) const;

    /// Solves every grid snapshot of one period (in parallel) for quantum dt/2.
    void prepare(double dt) const override;
    /// Grid models of the current cache, ordered by time.
    std::vector<std::shared_ptr<const StreamModel>> cached_models() const;

    Vec2 velocity(const Vec2& z, double t) const override;
    void velocity_and_gradient(const Vec2& z, double t, Vec2& vel, Mat2& grad) const override;
    DomainSnapshot domain(double t) const override { return snapshot_at(protocol_, t); }
    double period() const override { return protocol_.period(); }
    double clearance(const Vec2& z, double t, Vec2* normal = nullptr) const override;
    /// period / 2000, rounded so equal-length moves hold whole steps.
    double default_step() const override;

private:
    const StreamModel& lookup(double t, std::shared_ptr<const StreamModel>& holder) const;

    StirringProtocol protocol_;
    FlowConditions conditions_;
    SolverOptions solver_;

    mutable std::mutex mutex_;
    mutable double quantum_ = 0;
    mutable std::vector<std::shared_ptr<const StreamModel>> grid_;
    mutable std::map<double, std::shared_ptr<const StreamModel>> off_grid_;
};

/// Fixed-step classical RK4.
struct IntegratorOptions {
    double dt = 0;  // 0 selects the provider's default_step()

    double step_for(const VelocityProvider& vp) const;
};

/// Distance inside which tracers are pushed back into the fluid before a
/// step, and the depth by which a step may overshoot before LeftDomain.
inline constexpr double kGrazeDistance = 1e-9;
inline constexpr double kLeaveTolerance = 1e-6;

struct FlowMapSample {
    Vec2 point = Vec2::Zero();
    Mat2 jacobian = Mat2::Identity();
    double t0 = 0, t1 = 0;
};

/// Positions at t1 of tracers released at t0 (t1 < t0 integrates backward).
std::vector<Vec2> advect(std::span<const Vec2> points, double t0, double t1, const VelocityProvider& vp,
                         const IntegratorOptions& opts = {});

/// Positions plus flow-map Jacobians from the variational equation
/// dJ/dt = grad X J, J(t0) = I, integrated with the same scheme.
std::vector<FlowMapSample> advect_with_jacobian(std::span<const Vec2> points, double t0, double t1,
                                                const VelocityProvider& vp, const IntegratorOptions& opts = {});

/// phi_n^{-1}: points at t = n T carried back to t = 0, with Jacobians.
std::vector<FlowMapSample> inverse_flow(std::span<const Vec2> points, int periods, const VelocityProvider& vp,
                                        const IntegratorOptions& opts = {});

}  // namespace topostir
