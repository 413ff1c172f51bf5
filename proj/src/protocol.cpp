#include "topostir/protocol.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

#include "topostir/errors.h"

namespace topostir {

namespace {

constexpr double kPi = 3.14159265358979323846;

double swap_angle(double s) { return kPi * (s - std::sin(2 * kPi * s) / (2 * kPi)); }
double swap_angle_rate(double s) { return kPi * (1 - std::cos(2 * kPi * s)); }

std::array<int, 3> order_by_x(const std::array<Vec2, 3>& p)
{
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a].x() < p[b].x(); });
    return order;
}

double set_distance(const std::array<Vec2, 3>& a, const std::array<Vec2, 3>& b)
{
    std::array<int, 3> perm{0, 1, 2};
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0;
        for(int i = 0; i < 3; ++i)
            worst = std::max(worst, (a[i] - b[perm[i]]).norm());
        best = std::min(best, worst);
    } while(std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace

void StirrerConfig::validate() const
{
    if(!(epsilon > 0 && epsilon < 0.125))
        throw ConfigError("stirrer radius must satisfy 0 < epsilon < 1/8, got " + std::to_string(epsilon));
    if(outer_radius != 1.0)
        throw ConfigError("outer radius is fixed to 1");
    for(int i = 0; i < 3; ++i) {
        if(outer_radius - centers[i].norm() < epsilon + margin)
            throw ConfigError("stirrer " + std::to_string(i + 1) + " is too close to the outer boundary");
        for(int j = i + 1; j < 3; ++j)
            if((centers[i] - centers[j]).norm() < 2 * epsilon + margin)
                throw ConfigError("stirrers " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                                  " overlap");
    }
}

double duration_of(const Move& m)
{
    return std::visit([](const auto& mv) { return mv.duration; }, m);
}

StirringProtocol::StirringProtocol(StirrerConfig config, std::vector<Move> moves)
    : config_(std::move(config)), moves_(std::move(moves))
{
    if(moves_.empty())
        throw ConfigError("a protocol needs at least one move");
    std::array<Vec2, 3> current = config_.centers;
    for(const auto& m : moves_) {
        const double d = duration_of(m);
        if(!(d > 0))
            throw ConfigError("move durations must be positive");
        MoveFrame frame{current, order_by_x(current)};
        if(const auto* sw = std::get_if<Swap>(&m)) {
            if(sw->slot != 1 && sw->slot != 2)
                throw ConfigError("swap slot must be 1 or 2");
            const int left = frame.order[sw->slot - 1], right = frame.order[sw->slot];
            std::swap(current[left], current[right]);
        }
        starts_.push_back(period_);
        frames_.push_back(frame);
        period_ += d;
    }
    // current[i] is where identity i ends the period; match to start slots.
    for(int i = 0; i < 3; ++i) {
        int best = 0;
        for(int j = 1; j < 3; ++j)
            if((current[i] - config_.centers[j]).norm() < (current[i] - config_.centers[best]).norm())
                best = j;
        permutation_[i] = best;
    }
}

void StirringProtocol::evaluate(double t, std::array<Vec2, 3>* pos, std::array<Vec2, 3>* vel) const
{
    double periods = std::floor(t / period_);
    double tau = t - periods * period_;
    if(tau >= period_) {
        tau -= period_;
        periods += 1;
    }
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), tau);
    const std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - starts_.begin() - 1, 0));
    const MoveFrame& frame = frames_[k];
    const Move& move = moves_[k];
    const double d = duration_of(move);
    const double s = std::clamp((tau - starts_[k]) / d, 0.0, 1.0);

    std::array<Vec2, 3> p = frame.start;
    std::array<Vec2, 3> v{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
    if(const auto* sw = std::get_if<Swap>(&move)) {
        const int left = frame.order[sw->slot - 1], right = frame.order[sw->slot];
        const Complex mid = 0.5 * (to_complex(frame.start[left]) + to_complex(frame.start[right]));
        const Complex arm = to_complex(frame.start[left]) - mid;
        const double sense = sw->hand == Handedness::Ccw ? 1.0 : -1.0;
        const Complex rot = std::polar(1.0, sense * swap_angle(s));
        const Complex drot = Complex(0, sense * swap_angle_rate(s) / d) * rot;
        p[left] = to_vec(mid + arm * rot);
        p[right] = to_vec(mid - arm * rot);
        v[left] = to_vec(arm * drot);
        v[right] = to_vec(-arm * drot);
    }

    // Trajectory j of the reference period is followed in period n by the
    // identity i with P^n(i) = j.
    std::array<int, 3> follow{0, 1, 2};
    const long n = static_cast<long>(periods);
    const long cycle = n % 6 < 0 ? n % 6 + 6 : n % 6;  // P^6 = id for any permutation of 3
    for(long step = 0; step < cycle; ++step)
        for(auto& f : follow)
            f = permutation_[f];
    for(int i = 0; i < 3; ++i) {
        if(pos)
            (*pos)[i] = p[follow[i]];
        if(vel)
            (*vel)[i] = v[follow[i]];
    }
}

std::array<Vec2, 3> StirringProtocol::positions(double t) const
{
    std::array<Vec2, 3> p;
    evaluate(t, &p, nullptr);
    return p;
}

std::array<Vec2, 3> StirringProtocol::velocities(double t) const
{
    std::array<Vec2, 3> v;
    evaluate(t, nullptr, &v);
    return v;
}

StirringProtocol build_protocol(const BraidWord& w, const StirrerConfig& config, double moves_per_unit_time,
                                double hold_duration)
{
    config.validate();
    if(!(moves_per_unit_time > 0))
        throw ConfigError("moves per unit time must be positive");
    std::vector<Move> moves;
    for(const auto& l : w.letters())
        moves.push_back(Swap{l.generator, l.sign > 0 ? Handedness::Ccw : Handedness::Cw, 1.0 / moves_per_unit_time});
    if(moves.empty())
        moves.push_back(Hold{hold_duration});
    return StirringProtocol(config, std::move(moves));
}

AdmissibilityReport validate(const StirringProtocol& p, int samples_per_move)
{
    samples_per_move = std::max(samples_per_move, 100);
    const double eps = p.config().epsilon;
    AdmissibilityReport r;
    r.min_gap = std::numeric_limits<double>::infinity();
    r.min_clearance = std::numeric_limits<double>::infinity();

    const auto& moves = p.moves();
    for(std::size_t k = 0; k < moves.size(); ++k) {
        const double t0 = p.move_start(k), d = duration_of(moves[k]);
        for(int j = 0; j < samples_per_move; ++j) {
            const double t = t0 + d * j / (samples_per_move - 1);
            // The last sample sits exactly on the junction; evaluate it from the
            // inside of the move so closure is measured on the formula.
            const auto c = p.positions(j == samples_per_move - 1 ? std::nextafter(t, t0) : t);
            for(int a = 0; a < 3; ++a) {
                r.min_clearance = std::min(r.min_clearance, p.config().outer_radius - c[a].norm() - eps);
                for(int b = a + 1; b < 3; ++b)
                    r.min_gap = std::min(r.min_gap, (c[a] - c[b]).norm() - 2 * eps);
            }
        }
        const double tend = t0 + d;
        const auto before = p.velocities(std::nextafter(tend, t0));
        const auto after = p.velocities(tend);
        for(int a = 0; a < 3; ++a)
            r.max_velocity_jump = std::max(r.max_velocity_jump, (before[a] - after[a]).norm());
    }
    r.closure_error = set_distance(p.positions(std::nextafter(p.period(), 0.0)), p.positions(0.0));

    bool config_ok = true;
    try {
        p.config().validate();
    } catch(const ConfigError&) {
        config_ok = false;
    }
    r.passed = config_ok && r.min_gap > 0 && r.min_clearance > 0 && r.max_velocity_jump < 1e-9 &&
               r.closure_error < 1e-12;
    return r;
}

namespace {

struct Projected {
    std::array<double, 3> along;
    std::array<double, 3> depth;
};

Projected project(const StirringProtocol& p, double t, double angle)
{
    const auto c = p.positions(t);
    const double ca = std::cos(angle), sa = std::sin(angle);
    Projected out;
    for(int i = 0; i < 3; ++i) {
        out.along[i] = c[i].x() * ca + c[i].y() * sa;
        out.depth[i] = -c[i].x() * sa + c[i].y() * ca;
    }
    return out;
}

constexpr double kTie = 1e-12;

// Identities sorted by projected coordinate; empty if two are tied.
std::optional<std::array<int, 3>> strand_order(const Projected& pr)
{
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return pr.along[a] < pr.along[b]; });
    for(int k = 0; k < 2; ++k)
        if(pr.along[order[k + 1]] - pr.along[order[k]] < kTie)
            return std::nullopt;
    return order;
}

class CrossingReader {
public:
    CrossingReader(const StirringProtocol& p, double angle) : p_(p), angle_(angle) {}

    std::array<int, 3> order_at(double& t, double lo, double hi) const
    {
        // Nudge off exact ties toward the interior of [lo, hi].
        for(int attempt = 0; attempt < 8; ++attempt) {
            if(auto o = strand_order(project(p_, t, angle_)))
                return *o;
            const double shift = (hi - lo) * 1e-3 * (attempt + 1);
            t = std::clamp(t + (attempt % 2 == 0 ? shift : -2 * shift), lo, hi);
        }
        throw DegenerateProjection("stirrer centers share a projected coordinate at t = " + std::to_string(t));
    }

    void scan(double ta, const std::array<int, 3>& oa, double tb, const std::array<int, 3>& ob, int depth,
              std::vector<BraidLetter>& out) const
    {
        if(oa == ob)
            return;
        int k = -1;
        if(oa[0] == ob[1] && oa[1] == ob[0] && oa[2] == ob[2])
            k = 0;
        else if(oa[1] == ob[2] && oa[2] == ob[1] && oa[0] == ob[0])
            k = 1;
        if(k < 0) {
            if(depth > 40)
                throw DegenerateProjection("could not separate simultaneous crossings");
            double tm = 0.5 * (ta + tb);
            const auto om = order_at(tm, ta + (tb - ta) * 0.25, ta + (tb - ta) * 0.75);
            scan(ta, oa, tm, om, depth + 1, out);
            scan(tm, om, tb, ob, depth + 1, out);
            return;
        }
        const int left = oa[k], right = oa[k + 1];
        double lo = ta, hi = tb;
        for(int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const auto pr = project(p_, mid, angle_);
            if(pr.along[left] < pr.along[right])
                lo = mid;
            else
                hi = mid;
        }
        const auto pr = project(p_, 0.5 * (lo + hi), angle_);
        const double gap = pr.depth[left] - pr.depth[right];
        if(std::abs(gap) < kTie)
            throw DegenerateProjection("strands collide in the projection plane");
        out.push_back({k + 1, gap < 0 ? 1 : -1});
    }

private:
    const StirringProtocol& p_;
    double angle_;
};

}  // namespace

BraidWord extract_braid(const StirringProtocol& p, int samples, double angle)
{
    samples = std::max(samples, 2);
    const double T = p.period();
    const CrossingReader reader(p, angle);
    std::vector<BraidLetter> letters;

    double t_prev = 0;
    auto o_prev = reader.order_at(t_prev, 0, 0);
    for(int k = 1; k <= samples; ++k) {
        // Interior samples are offset from the uniform grid so they avoid the
        // exact mid-swap instants where projected coordinates coincide.
        double t = k == samples ? T : (k - 0.5 + 0.1234567) * T / samples;
        const auto o = k == samples ? reader.order_at(t, T, T) : reader.order_at(t, t_prev, T);
        reader.scan(t_prev, o_prev, t, o, 0, letters);
        t_prev = t;
        o_prev = o;
    }
    return BraidWord(std::move(letters));
}

}  // namespace topostir
