#pragma once

#include <array>
#include <variant>
#include <vector>

#include "topostir/braid.h"
#include "topostir/geometry.h"

namespace topostir {

/// Geometry of the stirred region: unit outer circle, three round stirrers
/// of radius epsilon.
struct StirrerConfig {
    double outer_radius = 1.0;
    double epsilon = 0.05;
    std::array<Vec2, 3> centers{Vec2(-0.5, 0.0), Vec2(0.0, 0.0), Vec2(0.5, 0.0)};
    /// Extra clearance demanded on top of contact.
    double margin = 1e-3;

    /// Throws ConfigError unless 0 < epsilon < 1/8, stirrers are pairwise
    /// separated by 2 epsilon + margin and clear the outer circle by
    /// epsilon + margin.
    void validate() const;
};

enum class Handedness { Ccw, Cw };

/// Half-turn interchange of the stirrers in x-ordered slots (slot, slot + 1).
struct Swap {
    int slot = 1;
    Handedness hand = Handedness::Ccw;
    double duration = 1.0;
};

struct Hold {
    double duration = 1.0;
};

using Move = std::variant<Swap, Hold>;

double duration_of(const Move& m);

/// Piecewise-smooth T-periodic motion of the three stirrer centers.
///
/// Stirrer identities are 0, 1, 2 (initially the centers in config order).
/// positions(t)[i] is alpha_i(t). Letters act on slots ordered by x at the
/// start of each move; the swap angle follows the smooth step
/// theta(s) = pi (s - sin(2 pi s) / (2 pi)), so velocity vanishes at every
/// move junction.
class StirringProtocol {
public:
    StirringProtocol(StirrerConfig config, std::vector<Move> moves);

    const StirrerConfig& config() const { return config_; }
    const std::vector<Move>& moves() const { return moves_; }
    double period() const { return period_; }
    double move_start(std::size_t k) const { return starts_[k]; }

    /// permutation()[i] = identity found after one period where identity i
    /// started, so alpha_i(t + T) = alpha_{permutation()[i]}(t).
    const std::array<int, 3>& permutation() const { return permutation_; }

    std::array<Vec2, 3> positions(double t) const;
    std::array<Vec2, 3> velocities(double t) const;

private:
    struct MoveFrame {
        std::array<Vec2, 3> start;  // positions by identity at move start
        std::array<int, 3> order;   // identities sorted by x at move start
    };

    void evaluate(double t, std::array<Vec2, 3>* pos, std::array<Vec2, 3>* vel) const;

    StirrerConfig config_;
    std::vector<Move> moves_;
    std::vector<double> starts_;
    std::vector<MoveFrame> frames_;
    double period_ = 0;
    std::array<int, 3> permutation_{0, 1, 2};
};

/// Default unit time per letter; the empty word becomes one Hold.
StirringProtocol build_protocol(const BraidWord& w, const StirrerConfig& config = {},
                                double moves_per_unit_time = 1.0, double hold_duration = 1.0);

struct AdmissibilityReport {
    double min_gap = 0;            // min pairwise center distance - 2 eps
    double min_clearance = 0;      // min (outer - |c|) - eps
    double max_velocity_jump = 0;  // across move junctions
    double closure_error = 0;      // set distance positions(T) vs positions(0)
    bool passed = false;
};

AdmissibilityReport validate(const StirringProtocol& p, int samples_per_move = 100);

/// Reads the braid traced by the stirrers: projects onto the axis at
/// `angle` (radians from the x axis), and emits sigma_i^{+1} whenever the
/// strand coming from the left of slot i passes behind (smaller depth).
BraidWord extract_braid(const StirringProtocol& p, int samples = 10000, double angle = 0.0);

}  // namespace topostir
