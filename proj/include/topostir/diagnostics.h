#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "topostir/transport.h"

namespace topostir {

/// Polyline material curve. Each vertex remembers its t = 0 preimage so
/// refinement can bisect preimages instead of interpolating images.
struct MaterialCurve {
    std::vector<Vec2> vertices;
    bool closed = false;

    /// Straight chord from a to b split into `segments` pieces.
    static MaterialCurve segment(const Vec2& a, const Vec2& b, int segments = 64);
    /// Closed circle sampled with `segments` vertices.
    static MaterialCurve circle(const Vec2& center, double radius, int segments = 128);

    double length() const;
};

struct RefinementOptions {
    double max_segment = 5e-3;
    double max_turn = 0.2;  // radians
    /// Turning-angle refinement stops below this segment length.
    double min_segment = 2.5e-4;
    /// Preimage pairs closer than this are never bisected.
    double min_preimage_gap = 1e-9;
    std::size_t vertex_budget = 2'000'000;
};

/// Per-period values (curve length or gradient sup-norm).
struct GrowthSeries {
    std::vector<double> values;
    /// Vertex budget ran out before the requested number of periods.
    bool budget_exceeded = false;
    /// Constant-vorticity input: identically zero gradient.
    bool degenerate = false;
    std::vector<std::size_t> vertex_counts;
};

struct GrowthFit {
    double slope = 0;
    double intercept = 0;
    double max_residual = 0;
    std::size_t window_begin = 0;
    std::size_t window_end = 0;  // inclusive
};

/// Least-squares slope of log(values) against the period index over the
/// window [ceil(N/2), N]. Throws DegenerateSeries on non-positive values
/// and ConfigError on series shorter than 4.
GrowthFit estimate_growth_rate(const GrowthSeries& s);

struct CurveEvolution {
    GrowthSeries series;
    /// Stirrer wraps in the band per period.
    std::vector<std::size_t> wrap_counts;
    /// Tracer images and t = 0 preimages after the last completed period.
    std::vector<Vec2> images;
    std::vector<Vec2> preimages;
    /// Final band as a polyline, wraps sampled along the stirrer surfaces.
    std::vector<Vec2> path;
};

/// Advects the curve step by step as a taut band of tracers and stirrer
/// wraps. Stirrers that run into a chord trigger preimage bisection, or a
/// wrap once preimages are too close to bisect; after each period chords
/// are refined by preimage bisection. Records the band length per period,
/// a lower bound on the material curve length.
CurveEvolution evolve_curve(const MaterialCurve& c, const VelocityProvider& vp, int periods,
                            const IntegratorOptions& opts = {}, const RefinementOptions& refine = {});

/// Closed-form initial vorticity with closed-form gradient.
class VorticityField {
public:
    enum class Kind { Constant, LinearX, GaussianBump };

    static VorticityField constant(double omega);
    /// omega_0(x, y) = x.
    static VorticityField linear_x();
    /// amplitude * exp(-|z - center|^2 / (2 width^2)); one nondegenerate maximum.
    static VorticityField gaussian_bump(const Vec2& center, double width, double amplitude = 1.0);

    Kind kind() const { return kind_; }
    double value(const Vec2& z) const;
    Vec2 gradient(const Vec2& z) const;

private:
    Kind kind_ = Kind::Constant;
    double a_ = 0, width_ = 1;
    Vec2 center_ = Vec2::Zero();
};

/// omega_n(z) = omega_0(phi_n^{-1}(z)).
double transported_vorticity(const VorticityField& w0, const VelocityProvider& vp, const Vec2& z, int periods,
                             const IntegratorOptions& opts = {});

/// Uniform n x n grid on [-1, 1]^2 keeping points at least `margin` inside the fluid at t = 0.
std::vector<Vec2> interior_grid(const DomainSnapshot& dom, int n, double margin);

/// Sup over the grid of |grad omega_n| = |D(phi_n^{-1})^T grad omega_0(phi_n^{-1}(z))|
/// for n = 0..periods.
GrowthSeries vorticity_gradient_growth(const VorticityField& w0, const VelocityProvider& vp,
                                       std::span<const Vec2> grid, int periods, const IntegratorOptions& opts = {});

struct CirculationSeries {
    std::vector<double> times;
    std::vector<double> values;
    double drift = 0;  // max |value - values[0]|
    bool budget_exceeded = false;
};

/// Trapezoid-rule circulation of the velocity at time t along a closed polyline,
/// each segment split into `subdivisions` equal pieces.
double polyline_circulation(std::span<const Vec2> vertices, const VelocityProvider& vp, double t,
                            int subdivisions = 1);

/// Circulation along the advected closed curve (as a band, see evolve_curve;
/// equal to the material circulation when no vorticity lies between the
/// band and the curve) at samples_per_period evenly
/// spaced instants of every period (period boundaries included).
CirculationSeries circulation_drift(const VelocityProvider& vp, const MaterialCurve& c, int periods,
                                    const IntegratorOptions& opts = {}, const RefinementOptions& refine = {},
                                    int samples_per_period = 1, int subdivisions = 4);

}  // namespace topostir
