#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topostir/diagnostics.h"

namespace topostir {

using Json = nlohmann::json;

enum class DiagnosticKind { None, Curve, Gradient, Circulation };

std::string to_string(DiagnosticKind k);

struct CurveSpec {
    enum class Kind { Segment, Circle };
    Kind kind = Kind::Segment;
    Vec2 from = Vec2::Zero(), to = Vec2::Zero();  // segment
    Vec2 center = Vec2::Zero();                   // circle
    double radius = 0;
    int segments = 64;

    MaterialCurve build() const;
};

struct VorticitySpec {
    VorticityField::Kind kind = VorticityField::Kind::LinearX;
    double value = 0;  // constant
    Vec2 center = Vec2::Zero();
    double width = 0.2;
    double amplitude = 1.0;

    VorticityField build() const;
};

/// Declared pass/fail thresholds; unset ones are not checked.
struct Thresholds {
    std::optional<double> min_rate;
    std::optional<double> max_rate;
    std::optional<double> max_drift;
};

/// One experiment. JSON schema (every key optional unless noted):
///
///   name: string
///   protocol: { word: "1 -2" | moves: [{swap: 1|2, hand: "ccw"|"cw",
///               duration}, {hold: duration}], epsilon, centers: [[x, y] x3],
///               move_duration, hold_duration, margin }      (word or moves)
///   flow: { omega, circulations: [outer, s1, s2, s3] }
///   solver: { order, nodes, residual_tolerance }
///   integrator: { steps_per_period | dt }
///   diagnostic: { kind: "none"|"curve"|"gradient"|"circulation", periods,
///                 curve: {type: "segment", from, to, segments} |
///                        {type: "circle", center, radius, segments},
///                 refinement: { max_segment, max_turn, min_segment,
///                               min_preimage_gap, vertex_budget },
///                 grid, grid_margin,
///                 vorticity: {type: "linear_x"} | {type: "constant", value} |
///                            {type: "gaussian", center, width, amplitude},
///                 samples_per_period, subdivisions }
///   thresholds: { min_rate, max_rate, max_drift }
///   output: directory
struct ExperimentConfig {
    std::string name = "experiment";

    std::optional<std::string> word;
    std::vector<Move> moves;  // used when word is unset
    StirrerConfig stirrers;
    double move_duration = 1.0;
    double hold_duration = 1.0;

    double omega = 0;
    std::vector<double> circulations{0, 0, 0, 0};

    SolverOptions solver;

    long steps_per_period = 0;
    double dt = 0;  // used when steps_per_period is 0; 0 means provider default

    DiagnosticKind kind = DiagnosticKind::None;
    int periods = 0;
    CurveSpec curve;
    RefinementOptions refinement;
    int grid = 32;
    std::optional<double> grid_margin;  // default epsilon / 2
    VorticitySpec vorticity;
    int samples_per_period = 1;
    int subdivisions = 4;

    Thresholds thresholds;
    std::string output;

    StirringProtocol protocol() const;
    BraidWord braid() const;
    FlowConditions conditions() const;
    IntegratorOptions integrator() const;
};

/// Parses and cross-validates; throws ConfigError.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Canonical form: every field explicit, keys sorted.
Json to_json(const ExperimentConfig& c);
/// 64-bit FNV-1a of the canonical JSON text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);
/// Build version, config hash and every numerical tolerance in use.
Json provenance(const ExperimentConfig& c);

struct ExperimentResult {
    int exit_code = 0;  // 0 pass, 1 threshold failure
    Json summary;
    std::vector<double> values;
    std::vector<std::size_t> counts;  // vertices per period (curve runs)
    std::string csv;
};

/// Runs the selected diagnostic. Writes braid.json, residuals.csv,
/// series.csv and summary.json into `out_dir` when it is non-empty.
/// Module errors propagate.
ExperimentResult run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir = {});

/// Per-period CSV "n,value[,vertices]" with %.17g values.
std::string series_csv(const std::vector<double>& values, const std::vector<std::size_t>& counts);

/// Exit status for an exception escaping run_experiment: 2 for
/// configuration errors, 3 for everything else.
int exit_code_for(const std::exception& e);

}  // namespace topostir
