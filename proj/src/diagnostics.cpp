#include "topostir/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "topostir/errors.h"
#include "topostir/parallel.h"

namespace topostir {

namespace {

constexpr double kPi = 3.14159265358979323846;

double polyline_length(const std::vector<Vec2>& v, bool closed)
{
    double len = 0;
    for(std::size_t i = 0; i + 1 < v.size(); ++i)
        len += (v[i + 1] - v[i]).norm();
    if(closed && v.size() > 1)
        len += (v.front() - v.back()).norm();
    return len;
}

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double turning_angle(const Vec2& a, const Vec2& b, const Vec2& c)
{
    const Vec2 u = b - a, v = c - b;
    return std::abs(std::atan2(cross(u, v), u.dot(v)));
}

double segment_distance(const Vec2& c, const Vec2& a, const Vec2& b)
{
    const Vec2 d = b - a;
    const double dd = d.squaredNorm();
    const double s = dd > 0 ? std::clamp((c - a).dot(d) / dd, 0.0, 1.0) : 0.0;
    return (a + s * d - c).norm();
}

// Directed common tangent from circle (c1, r1) to circle (c2, r2). Signed
// radii: r > 0 keeps the circle on the left of the line. Points have r = 0.
void tangent(const Vec2& c1, double r1, const Vec2& c2, double r2, Vec2& p, Vec2& q)
{
    const Vec2 d = c2 - c1;
    const double len = d.norm();
    if(len == 0) {
        p = q = c1;
        return;
    }
    const double phi = std::atan2(d.y(), d.x()) + std::acos(std::clamp((r2 - r1) / len, -1.0, 1.0));
    const Vec2 nl(std::cos(phi), std::sin(phi));
    p = c1 - r1 * nl;
    q = c2 - r2 * nl;
}

// Angle swept from `in` to `out` around c, counterclockwise for side +1 and
// clockwise for side -1, in [0, 2 pi).
double swept_angle(const Vec2& c, int side, const Vec2& in, const Vec2& out)
{
    const Vec2 u = in - c, v = out - c;
    double a = std::atan2(cross(u, v), u.dot(v));
    if(side < 0)
        a = -a;
    if(a < 0)
        a += 2 * kPi;
    return a;
}

// Stirrer disks intersecting a chord by less than this are ignored, so chords
// between tracers hugging a stirrer (sagitta L^2 / 8 eps) are left alone. A
// stirrer moves far more than this per step and cannot cross a chord unseen.
constexpr double kCaptureSlack = 1e-4;

// Material curve tracked as a taut band. A node is either a tracer (image at
// the current time plus its t = 0 preimage) or a wrap: the curve runs around
// stirrer `stirrer` with the stirrer on its left (side +1) or right (side -1).
// Between nodes the band is straight; at wraps it follows the stirrer surface.
//
// Slip flow past a moving stirrer drags material only inside a layer whose
// thickness decays exponentially along the stirrer path, far below what
// preimage bisection can resolve in double precision. Where a stirrer runs
// into a chord whose end preimages can no longer be bisected, the band wraps
// it instead of letting the chord cut through the stirrer. The band is
// homotopic to the material curve relative to the stirrers and never longer.
class Band {
public:
    Band(const MaterialCurve& c, const VelocityProvider& vp, const IntegratorOptions& opts,
         const RefinementOptions& r)
        : vp_(vp), opts_(opts), r_(r), closed_(c.closed)
    {
        if(c.vertices.size() < 2)
            throw ConfigError("a material curve needs at least two vertices");
        for(std::size_t i = 0; i + 1 < c.vertices.size(); ++i)
            if(c.vertices[i] == c.vertices[i + 1])
                throw ConfigError("consecutive curve vertices must be distinct");
        for(const auto& v : c.vertices) {
            if(vp.clearance(v, 0.0) < -kDomainTolerance)
                throw OutOfDomain("material curve vertex outside the fluid domain");
            nodes_.push_back(Node{v, v, -1, 0, 0});
        }
        locate(0.0);
        for(std::size_t i = 0; i < piece_count(); ++i)
            for(std::size_t k = 0; k < centers_.size(); ++k)
                if(segment_distance(centers_[k], nodes_[i].image, nodes_[next(i)].image) < eps_ - kCaptureSlack)
                    throw ConfigError("material curve crosses stirrer " + std::to_string(k + 1));
    }

    bool budget_exceeded() const { return budget_exceeded_; }

    std::size_t tracer_count() const
    {
        return static_cast<std::size_t>(
            std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return !n.wrap(); }));
    }
    std::size_t wrap_count() const { return nodes_.size() - tracer_count(); }

    std::vector<Vec2> images() const
    {
        std::vector<Vec2> out;
        for(const auto& n : nodes_)
            if(!n.wrap())
                out.push_back(n.image);
        return out;
    }
    std::vector<Vec2> preimages() const
    {
        std::vector<Vec2> out;
        for(const auto& n : nodes_)
            if(!n.wrap())
                out.push_back(n.preimage);
        return out;
    }

    // Integrates every tracer from t0 to t1 one step at a time, restoring
    // the band after each step.
    void advance(double t0, double t1)
    {
        const double h = opts_.step_for(vp_);
        const long steps = std::lround((t1 - t0) / h);
        if(steps < 0 || std::abs(static_cast<double>(steps) * h - (t1 - t0)) > 1e-9 * std::max(1.0, t1 - t0))
            throw ConfigError("time step " + std::to_string(h) + " does not divide the span " +
                              std::to_string(t1 - t0));
        IntegratorOptions one = opts_;
        one.dt = h;
        for(long s = 0; s < steps && !budget_exceeded_; ++s) {
            const double ta = t0 + static_cast<double>(s) * h;
            const double tb = s + 1 == steps ? t1 : ta + h;
            std::vector<Vec2> pts;
            std::vector<std::size_t> idx;
            for(std::size_t i = 0; i < nodes_.size(); ++i)
                if(!nodes_[i].wrap()) {
                    pts.push_back(nodes_[i].image);
                    idx.push_back(i);
                }
            const auto moved = advect(pts, ta, tb, vp_, one);
            for(std::size_t j = 0; j < idx.size(); ++j)
                nodes_[idx[j]].image = moved[j];
            locate(tb);
            settle(tb);
        }
    }

    // Bisects tracer preimages on chords longer than max_segment or next to
    // turns sharper than max_turn, then restores the band.
    void refine(double t)
    {
        locate(t);
        for(;;) {
            const std::size_t nseg = piece_count();
            const std::size_t n = nodes_.size();
            std::vector<char> flag(nseg, 0);
            auto plain = [&](std::size_t j) { return !nodes_[j].wrap() && !nodes_[next(j)].wrap(); };
            auto can_split = [&](std::size_t j) {
                return plain(j) && (nodes_[j].preimage - nodes_[next(j)].preimage).norm() > r_.min_preimage_gap;
            };
            for(std::size_t j = 0; j < nseg; ++j)
                if(can_split(j) && (nodes_[next(j)].image - nodes_[j].image).norm() > r_.max_segment)
                    flag[j] = 1;
            for(std::size_t i = 0; i < n; ++i) {
                if(!closed_ && (i == 0 || i + 1 == n))
                    continue;
                const std::size_t prev = i == 0 ? n - 1 : i - 1;
                const std::size_t nxt = next(i);
                if(!plain(prev) || !plain(i))
                    continue;
                const Vec2 &a = nodes_[prev].image, &b = nodes_[i].image, &c = nodes_[nxt].image;
                if(turning_angle(a, b, c) <= r_.max_turn)
                    continue;
                if((b - a).norm() > r_.min_segment && can_split(prev))
                    flag[prev] = 1;
                if((c - b).norm() > r_.min_segment && can_split(i))
                    flag[i] = 1;
            }
            std::vector<std::size_t> pieces;
            for(std::size_t j = 0; j < nseg; ++j)
                if(flag[j])
                    pieces.push_back(j);
            if(pieces.empty())
                break;
            if(!bisect(pieces, t))
                return;
        }
        settle(t);
    }

    double length() const
    {
        const auto g = geometry();
        double len = 0;
        for(std::size_t j = 0; j < g.size(); ++j)
            len += (g[j].second - g[j].first).norm();
        for(std::size_t i = 0; i < nodes_.size(); ++i)
            if(nodes_[i].wrap())
                len += eps_ * arc_at(i, g);
        return len;
    }

    // The band as a polyline: wraps are sampled every max_step radians.
    std::vector<Vec2> path(double max_step = 0.05) const
    {
        const auto g = geometry();
        const std::size_t n = nodes_.size();
        std::vector<Vec2> out;
        for(std::size_t i = 0; i < n; ++i) {
            const Node& node = nodes_[i];
            if(!node.wrap()) {
                out.push_back(node.image);
                continue;
            }
            const Vec2& c = centers_[node.stirrer];
            const Vec2 in = g[i == 0 ? n - 1 : i - 1].second;
            const double arc = arc_at(i, g);
            const int m = std::max(1, static_cast<int>(std::ceil(arc / max_step)));
            const double a0 = std::atan2(in.y() - c.y(), in.x() - c.x());
            for(int k = 0; k <= m; ++k) {
                const double a = a0 + node.side * arc * k / m;
                out.push_back(c + eps_ * Vec2(std::cos(a), std::sin(a)));
            }
        }
        return out;
    }

private:
    struct Node {
        Vec2 image = Vec2::Zero();
        Vec2 preimage = Vec2::Zero();
        int stirrer = -1;
        int side = 0;
        double arc = 0;  // last accepted swept angle
        bool wrap() const { return stirrer >= 0; }
    };

    using Piece = std::pair<Vec2, Vec2>;

    std::size_t next(std::size_t i) const { return i + 1 == nodes_.size() ? 0 : i + 1; }
    std::size_t piece_count() const { return closed_ ? nodes_.size() : nodes_.size() - 1; }

    void locate(double t)
    {
        const DomainSnapshot dom = vp_.domain(t);
        centers_ = dom.inner_centers;
        eps_ = dom.epsilon;
    }

    // Straight part of piece j, from node j to node j + 1.
    std::vector<Piece> geometry() const
    {
        std::vector<Piece> g(piece_count());
        for(std::size_t j = 0; j < g.size(); ++j) {
            const Node &x = nodes_[j], &y = nodes_[next(j)];
            tangent(x.wrap() ? centers_[x.stirrer] : x.image, x.wrap() ? x.side * eps_ : 0.0,
                    y.wrap() ? centers_[y.stirrer] : y.image, y.wrap() ? y.side * eps_ : 0.0, g[j].first,
                    g[j].second);
        }
        return g;
    }

    double arc_at(std::size_t i, const std::vector<Piece>& g) const
    {
        const std::size_t prev = i == 0 ? nodes_.size() - 1 : i - 1;
        return swept_angle(centers_[nodes_[i].stirrer], nodes_[i].side, g[prev].second, g[i].first);
    }

    // Inserts the t = 0 midpoint of each listed tracer-tracer piece, advected to t.
    bool bisect(const std::vector<std::size_t>& pieces, double t)
    {
        if(tracer_count() + pieces.size() > r_.vertex_budget) {
            budget_exceeded_ = true;
            return false;
        }
        std::vector<Vec2> fresh;
        for(std::size_t j : pieces)
            fresh.push_back(0.5 * (nodes_[j].preimage + nodes_[next(j)].preimage));
        const std::vector<Vec2> moved = t == 0 ? fresh : advect(fresh, 0.0, t, vp_, opts_);
        std::vector<Node> out;
        out.reserve(nodes_.size() + pieces.size());
        std::size_t k = 0;
        for(std::size_t i = 0; i < nodes_.size(); ++i) {
            out.push_back(nodes_[i]);
            if(k < pieces.size() && pieces[k] == i) {
                out.push_back(Node{moved[k], fresh[k], -1, 0, 0});
                ++k;
            }
        }
        nodes_ = std::move(out);
        return true;
    }

    // Releases wraps the band has slipped off, then resolves stirrers that
    // run into chords: by bisection while preimages allow, else by wrapping.
    void settle(double t)
    {
        for(;;) {
            auto g = geometry();
            std::vector<char> drop(nodes_.size(), 0);
            bool dropped = false;
            for(std::size_t i = 0; i < nodes_.size(); ++i) {
                if(!nodes_[i].wrap())
                    continue;
                const double arc = arc_at(i, g);
                // A swept angle that jumps by more than pi has crossed zero.
                if(arc - nodes_[i].arc > kPi) {
                    drop[i] = 1;
                    dropped = true;
                }
            }
            if(dropped) {
                std::vector<Node> kept;
                for(std::size_t i = 0; i < nodes_.size(); ++i)
                    if(!drop[i])
                        kept.push_back(nodes_[i]);
                nodes_ = std::move(kept);
                continue;
            }
            for(std::size_t i = 0; i < nodes_.size(); ++i)
                if(nodes_[i].wrap())
                    nodes_[i].arc = arc_at(i, g);

            std::vector<std::size_t> split;
            std::vector<std::pair<std::size_t, Node>> wraps;
            for(std::size_t j = 0; j < g.size(); ++j) {
                const Node &x = nodes_[j], &y = nodes_[next(j)];
                const Vec2 &a = g[j].first, &b = g[j].second;
                const double reach = (b - a).norm() + eps_;
                int hit = -1;
                double depth = 0;
                for(std::size_t k = 0; k < centers_.size(); ++k) {
                    const int ki = static_cast<int>(k);
                    if(x.stirrer == ki || y.stirrer == ki || (centers_[k] - a).norm() > reach)
                        continue;
                    const double d = eps_ - kCaptureSlack - segment_distance(centers_[k], a, b);
                    if(d > depth) {
                        depth = d;
                        hit = ki;
                    }
                }
                if(hit < 0)
                    continue;
                if(!x.wrap() && !y.wrap() && (x.preimage - y.preimage).norm() > r_.min_preimage_gap) {
                    split.push_back(j);
                } else {
                    const int side = cross(b - a, centers_[hit] - a) >= 0 ? 1 : -1;
                    wraps.emplace_back(j, Node{Vec2::Zero(), Vec2::Zero(), hit, side, 0});
                }
            }
            if(split.empty() && wraps.empty())
                return;
            if(!wraps.empty()) {
                std::vector<Node> out;
                out.reserve(nodes_.size() + wraps.size());
                std::size_t k = 0;
                for(std::size_t i = 0; i < nodes_.size(); ++i) {
                    out.push_back(nodes_[i]);
                    if(k < wraps.size() && wraps[k].first == i)
                        out.push_back(wraps[k++].second);
                }
                nodes_ = std::move(out);
                continue;  // piece indices of `split` are stale
            }
            if(!bisect(split, t))
                return;
        }
    }

    const VelocityProvider& vp_;
    IntegratorOptions opts_;
    RefinementOptions r_;
    bool closed_;
    std::vector<Node> nodes_;
    std::vector<Vec2> centers_;
    double eps_ = 0;
    bool budget_exceeded_ = false;
};

}  // namespace

MaterialCurve MaterialCurve::segment(const Vec2& a, const Vec2& b, int segments)
{
    MaterialCurve c;
    segments = std::max(segments, 1);
    for(int i = 0; i <= segments; ++i)
        c.vertices.push_back(a + (b - a) * (static_cast<double>(i) / segments));
    return c;
}

MaterialCurve MaterialCurve::circle(const Vec2& center, double radius, int segments)
{
    MaterialCurve c;
    c.closed = true;
    segments = std::max(segments, 3);
    for(int i = 0; i < segments; ++i) {
        const double th = 2 * kPi * i / segments;
        c.vertices.push_back(center + radius * Vec2(std::cos(th), std::sin(th)));
    }
    return c;
}

double MaterialCurve::length() const { return polyline_length(vertices, closed); }

GrowthFit estimate_growth_rate(const GrowthSeries& s)
{
    const std::size_t count = s.values.size();
    if(count < 4)
        throw ConfigError("growth series needs at least 4 values");
    const std::size_t N = count - 1;
    GrowthFit fit;
    fit.window_begin = (N + 1) / 2;
    fit.window_end = N;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(fit.window_end - fit.window_begin + 1);
    for(std::size_t n = fit.window_begin; n <= fit.window_end; ++n) {
        if(!(s.values[n] > 0))
            throw DegenerateSeries("growth series value at period " + std::to_string(n) + " is not positive");
        const double x = static_cast<double>(n), y = std::log(s.values[n]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double xm = sx / m, ym = sy / m;
    fit.slope = (sxy - m * xm * ym) / (sxx - m * xm * xm);
    fit.intercept = ym - fit.slope * xm;
    for(std::size_t n = fit.window_begin; n <= fit.window_end; ++n) {
        const double res = std::log(s.values[n]) - (fit.intercept + fit.slope * static_cast<double>(n));
        fit.max_residual = std::max(fit.max_residual, std::abs(res));
    }
    return fit;
}

CurveEvolution evolve_curve(const MaterialCurve& c, const VelocityProvider& vp, int periods,
                            const IntegratorOptions& opts, const RefinementOptions& refine_opts)
{
    if(!(refine_opts.max_segment > 0) || !(refine_opts.max_turn > 0))
        throw ConfigError("refinement parameters must be positive");
    if(periods < 0)
        throw ConfigError("period count must be non-negative");
    Band band(c, vp, opts, refine_opts);
    CurveEvolution out;
    auto record = [&] {
        out.series.values.push_back(band.length());
        out.series.vertex_counts.push_back(band.tracer_count());
        out.wrap_counts.push_back(band.wrap_count());
    };
    band.refine(0.0);
    record();
    const double T = vp.period();
    for(int n = 1; n <= periods && !band.budget_exceeded(); ++n) {
        band.advance((n - 1) * T, n * T);
        if(!band.budget_exceeded())
            band.refine(n * T);
        if(band.budget_exceeded())
            break;
        record();
    }
    out.series.budget_exceeded = band.budget_exceeded();
    out.images = band.images();
    out.preimages = band.preimages();
    out.path = band.path();
    return out;
}

VorticityField VorticityField::constant(double omega)
{
    VorticityField f;
    f.kind_ = Kind::Constant;
    f.a_ = omega;
    return f;
}

VorticityField VorticityField::linear_x()
{
    VorticityField f;
    f.kind_ = Kind::LinearX;
    f.a_ = 1.0;
    return f;
}

VorticityField VorticityField::gaussian_bump(const Vec2& center, double width, double amplitude)
{
    if(!(width > 0))
        throw ConfigError("bump width must be positive");
    VorticityField f;
    f.kind_ = Kind::GaussianBump;
    f.center_ = center;
    f.width_ = width;
    f.a_ = amplitude;
    return f;
}

double VorticityField::value(const Vec2& z) const
{
    switch(kind_) {
    case Kind::Constant: return a_;
    case Kind::LinearX: return z.x();
    case Kind::GaussianBump: return a_ * std::exp(-(z - center_).squaredNorm() / (2 * width_ * width_));
    }
    return 0;
}

Vec2 VorticityField::gradient(const Vec2& z) const
{
    switch(kind_) {
    case Kind::Constant: return Vec2::Zero();
    case Kind::LinearX: return Vec2(1, 0);
    case Kind::GaussianBump: return -(z - center_) / (width_ * width_) * value(z);
    }
    return Vec2::Zero();
}

double transported_vorticity(const VorticityField& w0, const VelocityProvider& vp, const Vec2& z, int periods,
                             const IntegratorOptions& opts)
{
    if(w0.kind() == VorticityField::Kind::Constant)
        return w0.value(z);
    const std::vector<Vec2> pts{z};
    const auto back = advect(pts, periods * vp.period(), 0.0, vp, opts);
    return w0.value(back[0]);
}

std::vector<Vec2> interior_grid(const DomainSnapshot& dom, int n, double margin)
{
    std::vector<Vec2> pts;
    for(int j = 0; j < n; ++j)
        for(int i = 0; i < n; ++i) {
            const Vec2 z(-1 + (i + 0.5) * 2.0 / n, -1 + (j + 0.5) * 2.0 / n);
            if(dom.clearance(z) >= margin)
                pts.push_back(z);
        }
    return pts;
}

GrowthSeries vorticity_gradient_growth(const VorticityField& w0, const VelocityProvider& vp,
                                       std::span<const Vec2> grid, int periods, const IntegratorOptions& opts)
{
    GrowthSeries s;
    if(w0.kind() == VorticityField::Kind::Constant) {
        s.values.assign(static_cast<std::size_t>(periods) + 1, 0.0);
        s.degenerate = true;
        return s;
    }
    for(int n = 0; n <= periods; ++n) {
        double sup = 0;
        if(n == 0) {
            for(const auto& z : grid)
                sup = std::max(sup, w0.gradient(z).norm());
        } else {
            const auto back = inverse_flow(grid, n, vp, opts);
            for(const auto& b : back)
                sup = std::max(sup, (b.jacobian.transpose() * w0.gradient(b.point)).norm());
        }
        s.values.push_back(sup);
    }
    return s;
}

double polyline_circulation(std::span<const Vec2> v, const VelocityProvider& vp, double t, int subdivisions)
{
    subdivisions = std::max(subdivisions, 1);
    const std::size_t n = v.size();
    std::vector<double> parts(n);
    parallel_for(n, [&](std::size_t i) {
        const Vec2& a = v[i];
        const Vec2& b = v[i + 1 == n ? 0 : i + 1];
        const Vec2 step = (b - a) / subdivisions;
        double acc = 0;
        Vec2 xa = vp.velocity(a, t);
        for(int k = 1; k <= subdivisions; ++k) {
            const Vec2 xb = vp.velocity(a + step * k, t);
            acc += 0.5 * (xa + xb).dot(step);
            xa = xb;
        }
        parts[i] = acc;
    });
    double sum = 0;
    for(double p : parts)
        sum += p;
    return sum;
}

CirculationSeries circulation_drift(const VelocityProvider& vp, const MaterialCurve& c, int periods,
                                    const IntegratorOptions& opts, const RefinementOptions& refine_opts,
                                    int samples_per_period, int subdivisions)
{
    if(!c.closed)
        throw ConfigError("circulation needs a closed curve");
    samples_per_period = std::max(samples_per_period, 1);
    const double T = vp.period();
    vp.prepare(opts.step_for(vp));
    Band band(c, vp, opts, refine_opts);
    band.refine(0.0);

    CirculationSeries out;
    const int total = periods * samples_per_period;
    double t_prev = 0;
    for(int k = 0; k <= total && !band.budget_exceeded(); ++k) {
        const double t = T * k / samples_per_period;
        if(k > 0) {
            band.advance(t_prev, t);
            band.refine(t);
            if(band.budget_exceeded())
                break;
        }
        const auto path = band.path();
        out.times.push_back(t);
        out.values.push_back(polyline_circulation(path, vp, t, subdivisions));
        out.drift = std::max(out.drift, std::abs(out.values.back() - out.values.front()));
        t_prev = t;
    }
    out.budget_exceeded = band.budget_exceeded();
    return out;
}

}  // namespace topostir
