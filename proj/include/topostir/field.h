#pragma once

#include <span>
#include <vector>

#include "topostir/geometry.h"

namespace topostir {

/// Largest number of stirrers a stream model supports.
inline constexpr std::size_t kMaxStirrers = 8;

/// The fluid region at one instant: unit disk with round holes of common
/// radius epsilon removed. Boundary 0 is the outer circle; boundary i >= 1
/// is the circle around inner_centers[i - 1].
struct DomainSnapshot {
    double time = 0;
    double epsilon = 0.05;
    std::vector<Vec2> inner_centers;

    std::size_t boundary_count() const { return inner_centers.size() + 1; }
    double area() const;
    /// Signed distance to the nearest boundary (positive inside the fluid).
    double clearance(const Vec2& z) const;
    /// Index of the boundary nearest to z and its outward-from-fluid normal.
    std::size_t nearest_boundary(const Vec2& z, Vec2* normal_into_fluid = nullptr) const;
};

/// Constant vorticity plus circulations measured with the fluid on the left
/// (outer circle counterclockwise, inner circles clockwise).
class FlowConditions {
public:
    FlowConditions() = default;
    /// Throws ConfigError unless sum(circulations) = omega * area to
    /// 1e-12 * max(1, |omega|).
    FlowConditions(double omega, std::vector<double> circulations, const DomainSnapshot& dom);

    /// Omega = 0 and every circulation zero.
    static FlowConditions potential(std::size_t boundaries);

    double omega() const { return omega_; }
    const std::vector<double>& circulations() const { return circulations_; }

private:
    double omega_ = 0;
    std::vector<double> circulations_{0.0};
};

struct SolverOptions {
    int order = 12;
    int nodes_per_boundary = 128;
    /// Smallest / largest singular value guard.
    double min_singular_ratio = 1e-10;
    /// Max boundary normal-velocity residual accepted by solve_stream.
    double residual_tolerance = 1e-5;
    /// Pair every stirrer term with its reflection in the unit circle so the
    /// term vanishes on the outer boundary (see StreamModel).
    bool reflect_in_outer = true;
    /// Skip the dense residual check after solving (used by bulk precompute
    /// paths that check residuals separately).
    bool check_residual = true;

    void validate() const;
};

struct ResidualReport {
    double max_normal_residual = 0;
    std::vector<double> normal_residual;       // per boundary
    std::vector<double> circulation_error;     // per boundary, |quadrature - prescribed|
    std::vector<double> circulation;           // per boundary, quadrature value
    double condition_estimate = 0;
};

/// Stream function of the unique constant-vorticity flow on one snapshot:
///
///   Psi(z) = -omega |z|^2 / 4 + sum_i a_i log|z - c_i| + Re F(z),
///   F(z)   = sum_{k=0..K} A_k z^k + sum_i sum_{k=1..K} B_ik (eps / (z - c_i))^k,
///
/// with complex A_k = d_k - i e_k and B_ik = b_ik - i c_ik, so Re(A z^k) =
/// d Re(z^k) + e Im(z^k). The Laurent basis is scaled by eps^k so columns
/// have unit size on the stirrer circles.
///
/// With reflection enabled (the default) each stirrer term is paired with its
/// image under z -> 1 / conj(z): Re(B w^k) becomes Re(B w^k) - Re(conj(B) v^k)
/// with v = eps z / (1 - conj(c) z), and a log|z - c| becomes
/// a (log|z - c| - log|1 - conj(c) z|). Each pair vanishes on |z| = 1 and the
/// images are singular only outside the unit disk, so circulations are
/// unchanged and the outer Taylor part only has to absorb interactions. Velocity is X = J grad Psi with
/// J = [[0, 1], [-1, 0]]. Every non-particular term is harmonic, so
/// Laplacian Psi = -omega and curl X = omega hold identically.
///
/// Boundary condition. For a circle translating rigidly with velocity U the
/// normal-velocity condition X.n = U.n is the statement that the tangential
/// derivative of Psi - (U_x y - U_y x) vanishes along the circle, because
/// J grad (U_x y - U_y x) = U. Hence Psi - (U_x y - U_y x) = s_i on circle i,
/// with s_0 = 0 on the outer circle fixing the gauge.
class StreamModel {
public:
    double omega() const { return omega_; }
    int order() const { return order_; }
    bool reflected() const { return reflected_; }
    const DomainSnapshot& domain() const { return domain_; }
    const std::vector<double>& log_strengths() const { return log_strengths_; }
    const std::vector<Complex>& outer_coefficients() const { return outer_; }
    const std::vector<std::vector<Complex>>& inner_coefficients() const { return inner_; }
    const std::vector<double>& stream_constants() const { return stream_constants_; }
    const std::vector<Vec2>& boundary_velocities() const { return boundary_velocities_; }
    const ResidualReport& residual() const { return residual_; }

    /// Unchecked evaluation; valid anywhere except at stirrer centers.
    double stream_unchecked(const Vec2& z) const;
    Vec2 velocity_unchecked(const Vec2& z) const;
    void velocity_and_gradient_unchecked(const Vec2& z, Vec2& vel, Mat2& grad) const;

    friend StreamModel solve_stream(const DomainSnapshot&, const FlowConditions&, std::span<const Vec2>,
                                    const SolverOptions&);
    /// Builds a model directly from coefficients (tests and file loading).
    static StreamModel from_coefficients(DomainSnapshot dom, double omega, std::vector<double> log_strengths,
                                         std::vector<Complex> outer,
                                         std::vector<std::vector<Complex>> inner, bool reflected = false);

private:
    void derivatives(Complex z, Complex& d1, Complex* d2) const;
    /// Precomputes series tail bounds used to stop summation early.
    void finalize();

    DomainSnapshot domain_;
    double omega_ = 0;
    int order_ = 0;
    bool reflected_ = false;
    std::vector<double> log_strengths_;
    std::vector<Complex> outer_;                // A_0..A_K
    std::vector<std::vector<Complex>> inner_;   // B_i1..B_iK
    std::vector<double> stream_constants_;      // s_0..s_m
    std::vector<Vec2> boundary_velocities_;
    ResidualReport residual_;
    int outer_terms_ = 0;                       // trailing negligible A_k dropped
    // Derivative series coefficients, stirrer-interleaved (index k * m + i
    // for m stirrers) and zero-padded to a common length: k B_k,
    // k (k + 1) B_k, and for the images k conj(B_k), k (k - 1) conj(B_k).
    std::size_t series_terms_ = 0;
    std::vector<Complex> d1_terms_, d2_terms_, image_d1_terms_, image_d2_terms_;
};

/// Boundary velocities are indexed like boundaries (entry 0 is the outer
/// circle and must be zero). Throws IllConditioned or ResidualTooLarge.
StreamModel solve_stream(const DomainSnapshot& dom, const FlowConditions& cond,
                         std::span<const Vec2> boundary_velocities, const SolverOptions& opts = {});

/// Domain tolerance for the checked evaluators.
inline constexpr double kDomainTolerance = 1e-9;

double evaluate_stream(const StreamModel& m, const Vec2& z);
Vec2 evaluate_velocity(const StreamModel& m, const Vec2& z);
Mat2 evaluate_velocity_gradient(const StreamModel& m, const Vec2& z);

/// Residuals on 4x the collocation density, circulation quadrature per
/// boundary. The condition estimate is copied from the model's solve.
ResidualReport residual_report(const StreamModel& m, const FlowConditions& cond,
                               std::span<const Vec2> boundary_velocities, int nodes_per_boundary = 128);

/// Trapezoid-rule circulation around boundary b with the fluid on the left.
double boundary_circulation(const StreamModel& m, std::size_t b, int nodes);

}  // namespace topostir
