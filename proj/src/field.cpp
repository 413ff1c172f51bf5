#include "topostir/field.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "topostir/errors.h"

namespace topostir {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Point on boundary b at parameter theta, traversed with the fluid on the
// left, and d(point)/d(theta).
void boundary_point(const DomainSnapshot& dom, std::size_t b, double theta, Complex& z, Complex& dz)
{
    if(b == 0) {
        z = std::polar(1.0, theta);
        dz = Complex(0, 1) * z;
    } else {
        const Complex e = std::polar(dom.epsilon, -theta);
        z = to_complex(dom.inner_centers[b - 1]) + e;
        dz = Complex(0, -1) * e;
    }
}

}  // namespace

double DomainSnapshot::area() const
{
    return kPi * (1.0 - static_cast<double>(inner_centers.size()) * epsilon * epsilon);
}

double DomainSnapshot::clearance(const Vec2& z) const
{
    double c = 1.0 - z.norm();
    for(const auto& ci : inner_centers)
        c = std::min(c, (z - ci).norm() - epsilon);
    return c;
}

std::size_t DomainSnapshot::nearest_boundary(const Vec2& z, Vec2* normal) const
{
    std::size_t best = 0;
    double c = 1.0 - z.norm();
    for(std::size_t i = 0; i < inner_centers.size(); ++i) {
        const double ci = (z - inner_centers[i]).norm() - epsilon;
        if(ci < c) {
            c = ci;
            best = i + 1;
        }
    }
    if(normal) {
        if(best == 0)
            *normal = z.norm() > 0 ? Vec2(-z.normalized()) : Vec2(0, 0);
        else
            *normal = (z - inner_centers[best - 1]).normalized();
    }
    return best;
}

FlowConditions::FlowConditions(double omega, std::vector<double> circulations, const DomainSnapshot& dom)
    : omega_(omega), circulations_(std::move(circulations))
{
    if(circulations_.size() != dom.boundary_count())
        throw ConfigError("expected " + std::to_string(dom.boundary_count()) + " circulations, got " +
                          std::to_string(circulations_.size()));
    double sum = 0;
    for(double g : circulations_)
        sum += g;
    const double mismatch = std::abs(sum - omega * dom.area());
    if(mismatch > 1e-12 * std::max(1.0, std::abs(omega)))
        throw ConfigError("circulations must sum to omega * area (mismatch " + std::to_string(mismatch) + ")");
}

FlowConditions FlowConditions::potential(std::size_t boundaries)
{
    FlowConditions c;
    c.circulations_.assign(boundaries, 0.0);
    return c;
}

void SolverOptions::validate() const
{
    if(order < 1)
        throw ConfigError("truncation order must be >= 1");
    if(nodes_per_boundary < 4 * order)
        throw ConfigError("nodes per boundary must be at least 4 * order");
}

StreamModel StreamModel::from_coefficients(DomainSnapshot dom, double omega, std::vector<double> log_strengths,
                                           std::vector<Complex> outer, std::vector<std::vector<Complex>> inner,
                                           bool reflected)
{
    StreamModel m;
    m.reflected_ = reflected;
    m.order_ = static_cast<int>(outer.empty() ? 0 : outer.size() - 1);
    m.domain_ = std::move(dom);
    m.omega_ = omega;
    m.log_strengths_ = std::move(log_strengths);
    m.outer_ = std::move(outer);
    m.inner_ = std::move(inner);
    m.log_strengths_.resize(m.domain_.inner_centers.size(), 0.0);
    m.inner_.resize(m.domain_.inner_centers.size());
    m.stream_constants_.assign(m.domain_.boundary_count(), 0.0);
    m.boundary_velocities_.assign(m.domain_.boundary_count(), Vec2::Zero());
    m.finalize();
    return m;
}

void StreamModel::finalize()
{
    outer_terms_ = static_cast<int>(outer_.size()) - 1;
    double scale = 0;
    for(const auto& c : outer_)
        scale = std::max(scale, std::abs(c));
    for(const auto& B : inner_)
        for(const auto& c : B)
            scale = std::max(scale, std::abs(c));
    const double floor = 1e-15 * std::max(scale, 1.0);
    while(outer_terms_ > 0 && std::abs(outer_[outer_terms_]) * outer_terms_ * outer_terms_ <= floor)
        --outer_terms_;
    // |eps / (z - c)| <= 1 in the fluid, so terms below the floor stay negligible.
    const std::size_t m = inner_.size();
    if(m > kMaxStirrers)
        throw ConfigError("at most " + std::to_string(kMaxStirrers) + " stirrers are supported");
    series_terms_ = 0;
    for(const auto& B : inner_) {
        std::size_t n = B.size();
        while(n > 0 && std::abs(B[n - 1]) * static_cast<double>(n * (n + 1)) <= floor)
            --n;
        series_terms_ = std::max(series_terms_, n);
    }
    d1_terms_.assign(series_terms_ * m, 0.0);
    d2_terms_.assign(series_terms_ * m, 0.0);
    image_d1_terms_.assign(series_terms_ * m, 0.0);
    image_d2_terms_.assign(series_terms_ * m, 0.0);
    for(std::size_t i = 0; i < m; ++i)
        for(std::size_t k = 1; k <= std::min(series_terms_, inner_[i].size()); ++k) {
            const double kk = static_cast<double>(k);
            const Complex b = inner_[i][k - 1];
            const std::size_t at = (k - 1) * m + i;
            d1_terms_[at] = kk * b;
            d2_terms_[at] = kk * (kk + 1) * b;
            image_d1_terms_[at] = kk * std::conj(b);
            image_d2_terms_[at] = kk * (kk - 1) * std::conj(b);
        }
}

void StreamModel::derivatives(Complex z, Complex& d1, Complex* d2) const
{
    d1 = 0;
    Complex s2 = 0;
    // Outer Taylor part: sum k A_k z^(k-1), sum k (k-1) A_k z^(k-2).
    for(int k = outer_terms_; k >= 1; --k)
        d1 = d1 * z + static_cast<double>(k) * outer_[k];
    if(d2)
        for(int k = outer_terms_; k >= 2; --k)
            s2 = s2 * z + static_cast<double>(k * (k - 1)) * outer_[k];

    // The stirrer series are summed side by side so their Horner chains overlap.
    const std::size_t m = inner_.size();
    const std::size_t n = series_terms_;
    const double eps = domain_.epsilon;
    std::array<Complex, kMaxStirrers> inv, w, cc, q, v, h, g;
    for(std::size_t i = 0; i < m; ++i) {
        const Complex c = to_complex(domain_.inner_centers[i]);
        inv[i] = 1.0 / (z - c);
        w[i] = eps * inv[i];
        cc[i] = std::conj(c);
        q[i] = 1.0 / (1.0 - cc[i] * z);
        v[i] = eps * z * q[i];
        h[i] = 0;
        g[i] = 0;
    }

    // d/dz sum B_k w^k = -inv sum k B_k w^k.
    // Images -conj(B_k) v^k - a log(1 - conj(c) z), v = eps z q,
    // q = 1 / (1 - conj(c) z), v' = eps q^2, v'' = 2 eps conj(c) q^3:
    // g = sum k conj(B_k) v^(k-1).
    if(reflected_) {
        for(std::size_t k = n; k-- > 0;)
            for(std::size_t i = 0; i < m; ++i) {
                h[i] = (h[i] + d1_terms_[k * m + i]) * w[i];
                g[i] = g[i] * v[i] + image_d1_terms_[k * m + i];
            }
    } else {
        for(std::size_t k = n; k-- > 0;)
            for(std::size_t i = 0; i < m; ++i)
                h[i] = (h[i] + d1_terms_[k * m + i]) * w[i];
    }
    for(std::size_t i = 0; i < m; ++i) {
        const double a = log_strengths_[i];
        d1 += inv[i] * (a - h[i]);
        if(reflected_)
            d1 += a * cc[i] * q[i] - g[i] * (eps * q[i] * q[i]);
    }
    if(!d2)
        return;

    // Second derivatives: inv^2 sum k (k + 1) B_k w^k and, for the images,
    // e = sum k (k - 1) conj(B_k) v^(k-2).
    std::array<Complex, kMaxStirrers> h2, e;
    for(std::size_t i = 0; i < m; ++i) {
        h2[i] = 0;
        e[i] = 0;
    }
    for(std::size_t k = n; k-- > 0;)
        for(std::size_t i = 0; i < m; ++i) {
            h2[i] = (h2[i] + d2_terms_[k * m + i]) * w[i];
            if(reflected_ && k >= 1)
                e[i] = e[i] * v[i] + image_d2_terms_[k * m + i];
        }
    for(std::size_t i = 0; i < m; ++i) {
        const double a = log_strengths_[i];
        s2 += inv[i] * inv[i] * (h2[i] - a);
        if(reflected_) {
            const Complex dv = eps * q[i] * q[i];
            s2 += a * cc[i] * cc[i] * q[i] * q[i] - e[i] * dv * dv - g[i] * (2.0 * eps * cc[i] * q[i] * q[i] * q[i]);
        }
    }
    *d2 = s2;
}

double StreamModel::stream_unchecked(const Vec2& v) const
{
    const Complex z = to_complex(v);
    Complex f = 0;
    for(int k = static_cast<int>(outer_.size()) - 1; k >= 0; --k)
        f = f * z + outer_[k];
    double psi = f.real() - 0.25 * omega_ * std::norm(z);
    for(std::size_t i = 0; i < inner_.size(); ++i) {
        const Complex d = z - to_complex(domain_.inner_centers[i]);
        const Complex w = domain_.epsilon / d;
        Complex g = 0;
        for(std::size_t k = inner_[i].size(); k >= 1; --k)
            g = (g + inner_[i][k - 1]) * w;
        psi += g.real() + log_strengths_[i] * std::log(std::abs(d));
        if(reflected_) {
            const Complex cc = std::conj(to_complex(domain_.inner_centers[i]));
            const Complex v = domain_.epsilon * z / (1.0 - cc * z);
            Complex h = 0;
            for(std::size_t k = inner_[i].size(); k >= 1; --k)
                h = (h + std::conj(inner_[i][k - 1])) * v;
            psi -= h.real() + log_strengths_[i] * std::log(std::abs(1.0 - cc * z));
        }
    }
    return psi;
}

Vec2 StreamModel::velocity_unchecked(const Vec2& v) const
{
    Complex d1;
    derivatives(to_complex(v), d1, nullptr);
    return {-d1.imag() - 0.5 * omega_ * v.y(), -d1.real() + 0.5 * omega_ * v.x()};
}

void StreamModel::velocity_and_gradient_unchecked(const Vec2& v, Vec2& vel, Mat2& grad) const
{
    Complex d1, d2;
    derivatives(to_complex(v), d1, &d2);
    vel = {-d1.imag() - 0.5 * omega_ * v.y(), -d1.real() + 0.5 * omega_ * v.x()};
    grad << -d2.imag(), -d2.real() - 0.5 * omega_,
            -d2.real() + 0.5 * omega_, d2.imag();
}

double boundary_circulation(const StreamModel& m, std::size_t b, int nodes)
{
    double sum = 0;
    const double h = 2 * kPi / nodes;
    for(int j = 0; j < nodes; ++j) {
        Complex z, dz;
        boundary_point(m.domain(), b, j * h, z, dz);
        const Vec2 x = m.velocity_unchecked(to_vec(z));
        sum += x.x() * dz.real() + x.y() * dz.imag();
    }
    return sum * h;
}

ResidualReport residual_report(const StreamModel& m, const FlowConditions& cond,
                               std::span<const Vec2> boundary_velocities, int nodes_per_boundary)
{
    const DomainSnapshot& dom = m.domain();
    const std::size_t nb = dom.boundary_count();
    const int dense = 4 * nodes_per_boundary;
    ResidualReport r;
    r.condition_estimate = m.residual().condition_estimate;
    r.normal_residual.assign(nb, 0.0);
    r.circulation_error.assign(nb, 0.0);
    r.circulation.assign(nb, 0.0);
    for(std::size_t b = 0; b < nb; ++b) {
        const Vec2 U = b < boundary_velocities.size() ? boundary_velocities[b] : Vec2::Zero();
        const Vec2 center = b == 0 ? Vec2::Zero() : dom.inner_centers[b - 1];
        for(int j = 0; j < dense; ++j) {
            Complex z, dz;
            boundary_point(dom, b, 2 * kPi * j / dense, z, dz);
            const Vec2 p = to_vec(z);
            const Vec2 n = (p - center).normalized();
            const double res = std::abs((m.velocity_unchecked(p) - U).dot(n));
            r.normal_residual[b] = std::max(r.normal_residual[b], res);
        }
        r.max_normal_residual = std::max(r.max_normal_residual, r.normal_residual[b]);
        r.circulation[b] = boundary_circulation(m, b, dense);
        const double target = b < cond.circulations().size() ? cond.circulations()[b] : 0.0;
        r.circulation_error[b] = std::abs(r.circulation[b] - target);
    }
    return r;
}

StreamModel solve_stream(const DomainSnapshot& dom, const FlowConditions& cond,
                         std::span<const Vec2> boundary_velocities, const SolverOptions& opts)
{
    opts.validate();
    const std::size_t nb = dom.boundary_count();
    const std::size_t ni = dom.inner_centers.size();
    if(boundary_velocities.size() != nb)
        throw ConfigError("expected one boundary velocity per boundary");
    if(boundary_velocities[0].norm() != 0)
        throw ConfigError("the outer boundary is stationary");
    if(cond.circulations().size() != nb)
        throw ConfigError("circulation count does not match the domain");
    {
        double sum = 0;
        for(double g : cond.circulations())
            sum += g;
        if(std::abs(sum - cond.omega() * dom.area()) > 1e-12 * std::max(1.0, std::abs(cond.omega())))
            throw ConfigError("circulations must sum to omega * area");
    }

    StreamModel m;
    m.domain_ = dom;
    m.omega_ = cond.omega();
    m.order_ = opts.order;
    m.reflected_ = opts.reflect_in_outer;
    m.boundary_velocities_.assign(boundary_velocities.begin(), boundary_velocities.end());

    // Each log term a log|z - c| carries clockwise circulation 2 pi a around
    // its own circle; the particular term carries -omega pi eps^2 there.
    const double eps = dom.epsilon;
    m.log_strengths_.resize(ni);
    for(std::size_t i = 0; i < ni; ++i)
        m.log_strengths_[i] = (cond.circulations()[i + 1] + cond.omega() * kPi * eps * eps) / (2 * kPi);

    const int K = opts.order;
    const int N = opts.nodes_per_boundary;
    const Eigen::Index cols = 1 + 2 * K + static_cast<Eigen::Index>(ni) * 2 * K + static_cast<Eigen::Index>(ni);
    const Eigen::Index rows = static_cast<Eigen::Index>(nb) * N;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::VectorXd rhs(rows);

    for(std::size_t b = 0; b < nb; ++b) {
        const Vec2 U = boundary_velocities[b];
        for(int j = 0; j < N; ++j) {
            const Eigen::Index row = static_cast<Eigen::Index>(b) * N + j;
            Complex z, dz;
            boundary_point(dom, b, 2 * kPi * j / N, z, dz);

            Eigen::Index col = 0;
            A(row, col++) = 1.0;
            Complex zk = 1;
            for(int k = 1; k <= K; ++k) {
                zk *= z;
                A(row, col++) = zk.real();
                A(row, col++) = zk.imag();
            }
            for(std::size_t i = 0; i < ni; ++i) {
                const Complex c = to_complex(dom.inner_centers[i]);
                const Complex w = eps / (z - c);
                const Complex v = opts.reflect_in_outer ? eps * z / (1.0 - std::conj(c) * z) : Complex(0);
                Complex wk = 1, vk = 1;
                for(int k = 1; k <= K; ++k) {
                    wk *= w;
                    vk *= v;
                    A(row, col++) = wk.real() - vk.real();
                    A(row, col++) = wk.imag() + vk.imag();
                }
            }
            if(b > 0)
                A(row, col + static_cast<Eigen::Index>(b) - 1) = -1.0;

            double fixed = -0.25 * cond.omega() * std::norm(z);
            for(std::size_t i = 0; i < ni; ++i) {
                const Complex c = to_complex(dom.inner_centers[i]);
                fixed += m.log_strengths_[i] * std::log(std::abs(z - c));
                if(opts.reflect_in_outer)
                    fixed -= m.log_strengths_[i] * std::log(std::abs(1.0 - std::conj(c) * z));
            }
            rhs(row) = U.x() * z.imag() - U.y() * z.real() - fixed;
        }
    }

    Eigen::VectorXd scale(cols);
    for(Eigen::Index c = 0; c < cols; ++c) {
        const double n = A.col(c).norm();
        scale(c) = n > 0 ? 1.0 / n : 1.0;
        A.col(c) *= scale(c);
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    const auto diag = qr.matrixQR().diagonal().cwiseAbs();
    const double rmax = diag.maxCoeff(), rmin = diag.minCoeff();
    if(!(rmin > opts.min_singular_ratio * rmax))
        throw IllConditioned("collocation matrix is ill-conditioned (estimate " + std::to_string(rmax / rmin) +
                             ") at t = " + std::to_string(dom.time));
    const Eigen::VectorXd x = qr.solve(rhs).cwiseProduct(scale);

    Eigen::Index col = 0;
    m.outer_.assign(static_cast<std::size_t>(K) + 1, 0.0);
    m.outer_[0] = x(col++);
    for(int k = 1; k <= K; ++k, col += 2)
        m.outer_[k] = Complex(x(col), -x(col + 1));
    m.inner_.assign(ni, std::vector<Complex>(static_cast<std::size_t>(K)));
    for(std::size_t i = 0; i < ni; ++i)
        for(int k = 0; k < K; ++k, col += 2)
            m.inner_[i][k] = Complex(x(col), -x(col + 1));
    m.stream_constants_.assign(nb, 0.0);
    for(std::size_t i = 0; i < ni; ++i)
        m.stream_constants_[i + 1] = x(col++);

    m.finalize();
    m.residual_.condition_estimate = rmax / rmin;
    if(opts.check_residual) {
        m.residual_ = residual_report(m, cond, boundary_velocities, N);
        m.residual_.condition_estimate = rmax / rmin;
        if(m.residual_.max_normal_residual > opts.residual_tolerance)
            throw ResidualTooLarge("boundary normal-velocity residual " +
                                   std::to_string(m.residual_.max_normal_residual) + " exceeds tolerance at t = " +
                                   std::to_string(dom.time));
    }
    return m;
}

namespace {
void require_inside(const StreamModel& m, const Vec2& z)
{
    if(m.domain().clearance(z) < -kDomainTolerance)
        throw OutOfDomain("point (" + std::to_string(z.x()) + ", " + std::to_string(z.y()) +
                          ") is outside the fluid domain");
}
}  // namespace

double evaluate_stream(const StreamModel& m, const Vec2& z)
{
    require_inside(m, z);
    return m.stream_unchecked(z);
}

Vec2 evaluate_velocity(const StreamModel& m, const Vec2& z)
{
    require_inside(m, z);
    return m.velocity_unchecked(z);
}

Mat2 evaluate_velocity_gradient(const StreamModel& m, const Vec2& z)
{
    require_inside(m, z);
    Vec2 v;
    Mat2 g;
    m.velocity_and_gradient_unchecked(z, v, g);
    return g;
}

}  // namespace topostir
