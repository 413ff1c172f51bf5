#include "topostir/experiment.h"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "topostir/errors.h"
#include "topostir/version.h"

namespace topostir {

namespace {

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    if(!j.is_object())
        throw ConfigError(where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for(const auto& item : j.items())
        if(!ok.count(item.key()))
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where)
{
    if(!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch(const nlohmann::json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

Vec2 get_point(const Json& j, const std::string& where)
{
    if(!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(where + " must be [x, y]");
    return Vec2(j[0].get<double>(), j[1].get<double>());
}

Json point_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Handedness parse_hand(const std::string& s)
{
    if(s == "ccw")
        return Handedness::Ccw;
    if(s == "cw")
        return Handedness::Cw;
    throw ConfigError("hand must be \"ccw\" or \"cw\", got \"" + s + "\"");
}

DiagnosticKind parse_kind(const std::string& s)
{
    if(s == "none")
        return DiagnosticKind::None;
    if(s == "curve")
        return DiagnosticKind::Curve;
    if(s == "gradient")
        return DiagnosticKind::Gradient;
    if(s == "circulation")
        return DiagnosticKind::Circulation;
    throw ConfigError("unknown diagnostic kind \"" + s + "\"");
}

void parse_protocol(const Json& j, ExperimentConfig& c)
{
    const std::string w = "protocol";
    check_keys(j, w, {"word", "moves", "epsilon", "centers", "move_duration", "hold_duration", "margin"});
    if(j.contains("word") == j.contains("moves"))
        throw ConfigError("protocol needs exactly one of 'word' and 'moves'");
    if(j.contains("word")) {
        const auto text = get_or<std::string>(j, "word", "", w);
        try {
            parse_braid(text);
        } catch(const ParseError& e) {
            throw ConfigError(std::string("protocol.word: ") + e.what());
        }
        c.word = text;
    } else {
        const Json& moves = j.at("moves");
        if(!moves.is_array() || moves.empty())
            throw ConfigError("protocol.moves must be a non-empty array");
        for(const auto& m : moves) {
            if(m.contains("hold")) {
                check_keys(m, "hold move", {"hold"});
                c.moves.emplace_back(Hold{get_or<double>(m, "hold", 1.0, "hold move")});
            } else if(m.contains("swap")) {
                check_keys(m, "swap move", {"swap", "hand", "duration"});
                Swap s;
                s.slot = get_or<int>(m, "swap", 1, "swap move");
                s.hand = parse_hand(get_or<std::string>(m, "hand", "ccw", "swap move"));
                s.duration = get_or<double>(m, "duration", 1.0, "swap move");
                if(s.slot != 1 && s.slot != 2)
                    throw ConfigError("swap slot must be 1 or 2");
                c.moves.emplace_back(s);
            } else {
                throw ConfigError("each move needs 'swap' or 'hold'");
            }
            if(!(duration_of(c.moves.back()) > 0))
                throw ConfigError("move durations must be positive");
        }
    }
    c.stirrers.epsilon = get_or<double>(j, "epsilon", c.stirrers.epsilon, w);
    c.stirrers.margin = get_or<double>(j, "margin", c.stirrers.margin, w);
    if(j.contains("centers")) {
        const Json& cs = j.at("centers");
        if(!cs.is_array() || cs.size() != 3)
            throw ConfigError("protocol.centers must list three points");
        for(std::size_t i = 0; i < 3; ++i)
            c.stirrers.centers[i] = get_point(cs[i], "protocol.centers[" + std::to_string(i) + "]");
    }
    c.move_duration = get_or<double>(j, "move_duration", c.move_duration, w);
    c.hold_duration = get_or<double>(j, "hold_duration", c.hold_duration, w);
    if(!(c.move_duration > 0) || !(c.hold_duration > 0))
        throw ConfigError("protocol durations must be positive");
}

void parse_diagnostic(const Json& j, ExperimentConfig& c)
{
    const std::string w = "diagnostic";
    check_keys(j, w, {"kind", "periods", "curve", "refinement", "grid", "grid_margin", "vorticity",
                      "samples_per_period", "subdivisions"});
    c.kind = parse_kind(get_or<std::string>(j, "kind", "none", w));
    c.periods = get_or<int>(j, "periods", c.periods, w);
    if(j.contains("curve")) {
        const Json& cj = j.at("curve");
        check_keys(cj, "diagnostic.curve", {"type", "from", "to", "center", "radius", "segments"});
        const auto type = get_or<std::string>(cj, "type", "segment", "diagnostic.curve");
        if(type == "segment") {
            c.curve.kind = CurveSpec::Kind::Segment;
            if(!cj.contains("from") || !cj.contains("to"))
                throw ConfigError("segment curves need 'from' and 'to'");
            c.curve.from = get_point(cj.at("from"), "diagnostic.curve.from");
            c.curve.to = get_point(cj.at("to"), "diagnostic.curve.to");
        } else if(type == "circle") {
            c.curve.kind = CurveSpec::Kind::Circle;
            if(!cj.contains("center") || !cj.contains("radius"))
                throw ConfigError("circle curves need 'center' and 'radius'");
            c.curve.center = get_point(cj.at("center"), "diagnostic.curve.center");
            c.curve.radius = get_or<double>(cj, "radius", 0.0, "diagnostic.curve");
        } else {
            throw ConfigError("unknown curve type \"" + type + "\"");
        }
        c.curve.segments = get_or<int>(cj, "segments", c.curve.segments, "diagnostic.curve");
    }
    if(j.contains("refinement")) {
        const Json& r = j.at("refinement");
        const std::string rw = "diagnostic.refinement";
        check_keys(r, rw, {"max_segment", "max_turn", "min_segment", "min_preimage_gap", "vertex_budget"});
        auto& o = c.refinement;
        o.max_segment = get_or<double>(r, "max_segment", o.max_segment, rw);
        o.max_turn = get_or<double>(r, "max_turn", o.max_turn, rw);
        o.min_segment = get_or<double>(r, "min_segment", o.min_segment, rw);
        o.min_preimage_gap = get_or<double>(r, "min_preimage_gap", o.min_preimage_gap, rw);
        o.vertex_budget = get_or<std::size_t>(r, "vertex_budget", o.vertex_budget, rw);
    }
    c.grid = get_or<int>(j, "grid", c.grid, w);
    if(j.contains("grid_margin"))
        c.grid_margin = get_or<double>(j, "grid_margin", 0.0, w);
    if(j.contains("vorticity")) {
        const Json& v = j.at("vorticity");
        const std::string vw = "diagnostic.vorticity";
        check_keys(v, vw, {"type", "value", "center", "width", "amplitude"});
        const auto type = get_or<std::string>(v, "type", "linear_x", vw);
        if(type == "linear_x") {
            c.vorticity.kind = VorticityField::Kind::LinearX;
        } else if(type == "constant") {
            c.vorticity.kind = VorticityField::Kind::Constant;
            c.vorticity.value = get_or<double>(v, "value", 0.0, vw);
        } else if(type == "gaussian") {
            c.vorticity.kind = VorticityField::Kind::GaussianBump;
            if(v.contains("center"))
                c.vorticity.center = get_point(v.at("center"), vw + ".center");
            c.vorticity.width = get_or<double>(v, "width", c.vorticity.width, vw);
            c.vorticity.amplitude = get_or<double>(v, "amplitude", c.vorticity.amplitude, vw);
        } else {
            throw ConfigError("unknown vorticity type \"" + type + "\"");
        }
    }
    c.samples_per_period = get_or<int>(j, "samples_per_period", c.samples_per_period, w);
    c.subdivisions = get_or<int>(j, "subdivisions", c.subdivisions, w);
}

// Cross-field checks that need the assembled protocol.
void validate(const ExperimentConfig& c)
{
    const StirringProtocol p = c.protocol();
    c.conditions();  // throws on inconsistent circulations
    c.solver.validate();

    const IntegratorOptions io = c.integrator();
    if(c.steps_per_period < 0 || c.dt < 0)
        throw ConfigError("integrator step must be positive");
    if(io.dt > 0)
        for(const auto& m : p.moves()) {
            const double ratio = duration_of(m) / io.dt;
            if(std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
                throw ConfigError("integrator step does not divide move duration " + std::to_string(duration_of(m)));
        }

    if(c.kind == DiagnosticKind::None)
        return;
    if(c.periods < 0)
        throw ConfigError("diagnostic.periods must be non-negative");
    if((c.kind == DiagnosticKind::Curve || c.kind == DiagnosticKind::Gradient) && c.periods < 3)
        throw ConfigError("growth fits need at least 3 periods");
    if(c.kind == DiagnosticKind::Curve || c.kind == DiagnosticKind::Circulation) {
        const auto& r = c.refinement;
        if(!(r.max_segment > 0) || !(r.max_turn > 0) || !(r.min_segment >= 0) || !(r.min_preimage_gap > 0) ||
           r.vertex_budget < 2)
            throw ConfigError("refinement parameters must be positive");
        if(c.curve.segments < 1)
            throw ConfigError("curve needs at least one segment");
        const MaterialCurve curve = c.curve.build();
        const DomainSnapshot dom = snapshot_at(p, 0.0);
        for(const auto& v : curve.vertices)
            if(dom.clearance(v) < -kDomainTolerance)
                throw ConfigError("initial curve leaves the fluid domain");
        if(c.kind == DiagnosticKind::Circulation && c.curve.kind != CurveSpec::Kind::Circle)
            throw ConfigError("circulation needs a closed (circle) curve");
    }
    if(c.kind == DiagnosticKind::Gradient) {
        if(c.grid < 1)
            throw ConfigError("grid size must be positive");
        if(c.grid_margin && *c.grid_margin < 0)
            throw ConfigError("grid margin must be non-negative");
        if(c.vorticity.kind == VorticityField::Kind::GaussianBump && !(c.vorticity.width > 0))
            throw ConfigError("bump width must be positive");
    }
    if(c.samples_per_period < 1 || c.subdivisions < 1)
        throw ConfigError("samples_per_period and subdivisions must be positive");
}

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if(!out)
        throw ConfigError("cannot write " + p.string());
    out << text;
}

Json braid_report(const BraidWord& w)
{
    const TNClass tn = classify(w);
    const IntMatrix2 m = burau_at_minus_one(w);
    Json j;
    j["word"] = w.to_string();
    j["reduced"] = w.reduced().to_string();
    j["matrix"] = Json::array({Json::array({m.a, m.b}), Json::array({m.c, m.d})});
    j["trace"] = tn.trace;
    j["type"] = to_string(tn.type);
    j["identity_matrix"] = tn.identity_matrix;
    j["expansion"] = tn.expansion;
    j["log_lambda"] = std::log(tn.expansion);
    return j;
}

// Residuals at eight instants per move.
std::string residual_csv(const ProtocolFlow& flow)
{
    std::ostringstream os;
    os << "t,max_normal_residual,max_circulation_error,condition_estimate\n";
    const auto& p = flow.protocol();
    const auto& cond = flow.conditions();
    for(std::size_t k = 0; k < p.moves().size(); ++k)
        for(int s = 0; s < 8; ++s) {
            const double t = p.move_start(k) + duration_of(p.moves()[k]) * s / 8.0;
            const StreamModel m = flow.solve_at(t);
            const auto v = p.velocities(t);
            const std::vector<Vec2> bv{Vec2::Zero(), v[0], v[1], v[2]};
            const ResidualReport r = residual_report(m, cond, bv, flow.solver().nodes_per_boundary);
            double circ = 0;
            for(double e : r.circulation_error)
                circ = std::max(circ, e);
            os << format_double(t) << ',' << format_double(r.max_normal_residual) << ',' << format_double(circ)
               << ',' << format_double(r.condition_estimate) << '\n';
        }
    return os.str();
}

}  // namespace

std::string to_string(DiagnosticKind k)
{
    switch(k) {
    case DiagnosticKind::None: return "none";
    case DiagnosticKind::Curve: return "curve";
    case DiagnosticKind::Gradient: return "gradient";
    case DiagnosticKind::Circulation: return "circulation";
    }
    return "none";
}

MaterialCurve CurveSpec::build() const
{
    if(kind == Kind::Circle) {
        if(!(radius > 0))
            throw ConfigError("circle radius must be positive");
        return MaterialCurve::circle(center, radius, segments);
    }
    if(from == to)
        throw ConfigError("segment endpoints must differ");
    return MaterialCurve::segment(from, to, segments);
}

VorticityField VorticitySpec::build() const
{
    switch(kind) {
    case VorticityField::Kind::Constant: return VorticityField::constant(value);
    case VorticityField::Kind::LinearX: return VorticityField::linear_x();
    case VorticityField::Kind::GaussianBump: return VorticityField::gaussian_bump(center, width, amplitude);
    }
    return VorticityField::linear_x();
}

StirringProtocol ExperimentConfig::protocol() const
{
    stirrers.validate();
    if(word)
        return build_protocol(parse_braid(*word), stirrers, 1.0 / move_duration, hold_duration);
    if(moves.empty())
        throw ConfigError("protocol has no moves");
    return StirringProtocol(stirrers, moves);
}

BraidWord ExperimentConfig::braid() const
{
    if(word)
        return parse_braid(*word);
    std::vector<BraidLetter> letters;
    for(const auto& m : moves)
        if(const auto* s = std::get_if<Swap>(&m))
            letters.push_back(BraidLetter{s->slot, s->hand == Handedness::Ccw ? 1 : -1});
    return BraidWord(std::move(letters));
}

FlowConditions ExperimentConfig::conditions() const
{
    if(circulations.size() != 4)
        throw ConfigError("flow.circulations needs 4 entries (outer, then stirrers 1-3)");
    DomainSnapshot dom{0, stirrers.epsilon, {stirrers.centers[0], stirrers.centers[1], stirrers.centers[2]}};
    return FlowConditions(omega, circulations, dom);
}

IntegratorOptions ExperimentConfig::integrator() const
{
    IntegratorOptions io;
    if(steps_per_period > 0)
        io.dt = protocol().period() / static_cast<double>(steps_per_period);
    else
        io.dt = dt;
    return io;
}

ExperimentConfig parse_config(const Json& j)
{
    check_keys(j, "config", {"name", "protocol", "flow", "solver", "integrator", "diagnostic", "thresholds", "output"});
    ExperimentConfig c;
    c.name = get_or<std::string>(j, "name", c.name, "config");
    if(!j.contains("protocol"))
        throw ConfigError("config needs a 'protocol' section");
    parse_protocol(j.at("protocol"), c);
    if(j.contains("flow")) {
        const Json& f = j.at("flow");
        check_keys(f, "flow", {"omega", "circulations"});
        c.omega = get_or<double>(f, "omega", 0.0, "flow");
        c.circulations = get_or<std::vector<double>>(f, "circulations", c.circulations, "flow");
    }
    if(j.contains("solver")) {
        const Json& s = j.at("solver");
        check_keys(s, "solver", {"order", "nodes", "residual_tolerance"});
        c.solver.order = get_or<int>(s, "order", c.solver.order, "solver");
        c.solver.nodes_per_boundary = get_or<int>(s, "nodes", c.solver.nodes_per_boundary, "solver");
        c.solver.residual_tolerance = get_or<double>(s, "residual_tolerance", c.solver.residual_tolerance, "solver");
    }
    if(j.contains("integrator")) {
        const Json& i = j.at("integrator");
        check_keys(i, "integrator", {"steps_per_period", "dt"});
        if(i.contains("steps_per_period") && i.contains("dt"))
            throw ConfigError("integrator takes 'steps_per_period' or 'dt', not both");
        c.steps_per_period = get_or<long>(i, "steps_per_period", 0, "integrator");
        c.dt = get_or<double>(i, "dt", 0.0, "integrator");
        if(i.contains("steps_per_period") && c.steps_per_period <= 0)
            throw ConfigError("integrator.steps_per_period must be positive");
        if(i.contains("dt") && !(c.dt > 0))
            throw ConfigError("integrator.dt must be positive");
    }
    if(j.contains("diagnostic"))
        parse_diagnostic(j.at("diagnostic"), c);
    if(j.contains("thresholds")) {
        const Json& t = j.at("thresholds");
        check_keys(t, "thresholds", {"min_rate", "max_rate", "max_drift"});
        if(t.contains("min_rate"))
            c.thresholds.min_rate = get_or<double>(t, "min_rate", 0.0, "thresholds");
        if(t.contains("max_rate"))
            c.thresholds.max_rate = get_or<double>(t, "max_rate", 0.0, "thresholds");
        if(t.contains("max_drift"))
            c.thresholds.max_drift = get_or<double>(t, "max_drift", 0.0, "thresholds");
    }
    c.output = get_or<std::string>(j, "output", "", "config");
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if(!in)
        throw ConfigError("cannot read config " + file.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch(const nlohmann::json::exception& e) {
        throw ConfigError("config " + file.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

Json to_json(const ExperimentConfig& c)
{
    Json j;
    j["name"] = c.name;

    Json p;
    if(c.word) {
        p["word"] = *c.word;
    } else {
        Json moves = Json::array();
        for(const auto& m : c.moves) {
            if(const auto* s = std::get_if<Swap>(&m))
                moves.push_back({{"swap", s->slot}, {"hand", s->hand == Handedness::Ccw ? "ccw" : "cw"},
                                 {"duration", s->duration}});
            else
                moves.push_back({{"hold", duration_of(m)}});
        }
        p["moves"] = moves;
    }
    p["epsilon"] = c.stirrers.epsilon;
    p["margin"] = c.stirrers.margin;
    p["centers"] = Json::array(
        {point_json(c.stirrers.centers[0]), point_json(c.stirrers.centers[1]), point_json(c.stirrers.centers[2])});
    p["move_duration"] = c.move_duration;
    p["hold_duration"] = c.hold_duration;
    j["protocol"] = p;

    j["flow"] = {{"omega", c.omega}, {"circulations", c.circulations}};
    j["solver"] = {{"order", c.solver.order},
                   {"nodes", c.solver.nodes_per_boundary},
                   {"residual_tolerance", c.solver.residual_tolerance}};
    if(c.steps_per_period > 0)
        j["integrator"] = {{"steps_per_period", c.steps_per_period}};
    else
        j["integrator"] = {{"dt", c.dt}};

    Json d;
    d["kind"] = to_string(c.kind);
    d["periods"] = c.periods;
    if(c.curve.kind == CurveSpec::Kind::Segment)
        d["curve"] = {{"type", "segment"},
                      {"from", point_json(c.curve.from)},
                      {"to", point_json(c.curve.to)},
                      {"segments", c.curve.segments}};
    else
        d["curve"] = {{"type", "circle"},
                      {"center", point_json(c.curve.center)},
                      {"radius", c.curve.radius},
                      {"segments", c.curve.segments}};
    d["refinement"] = {{"max_segment", c.refinement.max_segment},
                       {"max_turn", c.refinement.max_turn},
                       {"min_segment", c.refinement.min_segment},
                       {"min_preimage_gap", c.refinement.min_preimage_gap},
                       {"vertex_budget", c.refinement.vertex_budget}};
    d["grid"] = c.grid;
    d["grid_margin"] = c.grid_margin.value_or(c.stirrers.epsilon / 2);
    switch(c.vorticity.kind) {
    case VorticityField::Kind::LinearX: d["vorticity"] = {{"type", "linear_x"}}; break;
    case VorticityField::Kind::Constant: d["vorticity"] = {{"type", "constant"}, {"value", c.vorticity.value}}; break;
    case VorticityField::Kind::GaussianBump:
        d["vorticity"] = {{"type", "gaussian"},
                          {"center", point_json(c.vorticity.center)},
                          {"width", c.vorticity.width},
                          {"amplitude", c.vorticity.amplitude}};
        break;
    }
    d["samples_per_period"] = c.samples_per_period;
    d["subdivisions"] = c.subdivisions;
    j["diagnostic"] = d;

    Json t = Json::object();
    if(c.thresholds.min_rate)
        t["min_rate"] = *c.thresholds.min_rate;
    if(c.thresholds.max_rate)
        t["max_rate"] = *c.thresholds.max_rate;
    if(c.thresholds.max_drift)
        t["max_drift"] = *c.thresholds.max_drift;
    j["thresholds"] = t;
    j["output"] = c.output;
    return j;
}

std::string config_hash(const ExperimentConfig& c)
{
    const std::string text = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for(unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json provenance(const ExperimentConfig& c)
{
    Json j;
    j["version"] = kVersion;
    j["config_hash"] = config_hash(c);
    j["tolerances"] = {{"solver_residual", c.solver.residual_tolerance},
                       {"solver_min_singular_ratio", c.solver.min_singular_ratio},
                       {"domain", kDomainTolerance},
                       {"graze_distance", kGrazeDistance},
                       {"leave_tolerance", kLeaveTolerance},
                       {"min_preimage_gap", c.refinement.min_preimage_gap},
                       {"max_segment", c.refinement.max_segment},
                       {"max_turn", c.refinement.max_turn}};
    return j;
}

std::string series_csv(const std::vector<double>& values, const std::vector<std::size_t>& counts)
{
    std::ostringstream os;
    os << (counts.empty() ? "n,value\n" : "n,value,vertices\n");
    for(std::size_t n = 0; n < values.size(); ++n) {
        os << n << ',' << format_double(values[n]);
        if(!counts.empty())
            os << ',' << (n < counts.size() ? counts[n] : 0);
        os << '\n';
    }
    return os.str();
}

int exit_code_for(const std::exception& e)
{
    if(dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e))
        return 2;
    return 3;
}

ExperimentResult run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir)
{
    const StirringProtocol p = c.protocol();
    ProtocolFlow flow(p, c.conditions(), c.solver);
    const IntegratorOptions io = c.integrator();
    flow.prepare(io.step_for(flow));

    const BraidWord w = c.braid();
    const Json braid = braid_report(w);
    const bool pa = classify(w).pseudo_anosov();

    ExperimentResult res;
    Json s;
    s["name"] = c.name;
    s["kind"] = to_string(c.kind);
    s["braid"] = braid;
    s["provenance"] = provenance(c);
    s["config"] = to_json(c);
    s["period"] = p.period();
    s["dt"] = io.step_for(flow);

    bool pass = true;
    Json checks = Json::array();
    auto check = [&](const std::string& what, double value, double limit, bool upper) {
        const bool ok = upper ? value <= limit : value >= limit;
        pass = pass && ok;
        checks.push_back({{"quantity", what},
                          {"value", value},
                          {"limit", limit},
                          {"bound", upper ? "max" : "min"},
                          {"margin", upper ? limit - value : value - limit},
                          {"pass", ok}});
    };

    switch(c.kind) {
    case DiagnosticKind::None: break;
    case DiagnosticKind::Curve:
    case DiagnosticKind::Gradient: {
        GrowthSeries series;
        if(c.kind == DiagnosticKind::Curve) {
            CurveEvolution ev = evolve_curve(c.curve.build(), flow, c.periods, io, c.refinement);
            series = std::move(ev.series);
            res.counts = series.vertex_counts;
            s["wraps"] = ev.wrap_counts;
        } else {
            const auto grid = interior_grid(flow.domain(0), c.grid, c.grid_margin.value_or(c.stirrers.epsilon / 2));
            s["grid_points"] = grid.size();
            series = vorticity_gradient_growth(c.vorticity.build(), flow, grid, c.periods, io);
        }
        res.values = series.values;
        s["values"] = series.values;
        s["budget_exceeded"] = series.budget_exceeded;
        s["degenerate"] = series.degenerate;
        if(series.degenerate) {
            s["rate"] = 0.0;
        } else if(series.values.size() >= 4) {
            const GrowthFit fit = estimate_growth_rate(series);
            s["rate"] = fit.slope;
            s["fit"] = {{"slope", fit.slope},
                        {"intercept", fit.intercept},
                        {"max_residual", fit.max_residual},
                        {"window", Json::array({fit.window_begin, fit.window_end})}};
        } else {
            s["rate"] = nullptr;
        }
        if(pa && s["rate"].is_number())
            s["rate_over_log_lambda"] = s["rate"].get<double>() / std::log(classify(w).expansion);
        if(series.budget_exceeded)
            pass = false;
        if(s["rate"].is_number()) {
            const double rate = s["rate"].get<double>();
            if(c.thresholds.min_rate)
                check("rate", rate, *c.thresholds.min_rate, false);
            if(c.thresholds.max_rate)
                check("rate", rate, *c.thresholds.max_rate, true);
        } else if(c.thresholds.min_rate || c.thresholds.max_rate) {
            pass = false;
        }
        break;
    }
    case DiagnosticKind::Circulation: {
        const CirculationSeries cs =
            circulation_drift(flow, c.curve.build(), c.periods, io, c.refinement, c.samples_per_period, c.subdivisions);
        res.values = cs.values;
        s["times"] = cs.times;
        s["values"] = cs.values;
        s["drift"] = cs.drift;
        s["budget_exceeded"] = cs.budget_exceeded;
        if(cs.budget_exceeded)
            pass = false;
        if(c.thresholds.max_drift)
            check("drift", cs.drift, *c.thresholds.max_drift, true);
        break;
    }
    }
    s["checks"] = checks;
    s["pass"] = pass;
    res.exit_code = pass ? 0 : 1;
    res.csv = series_csv(res.values, res.counts);
    res.summary = s;

    if(!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_file(out_dir / "braid.json", braid.dump(2) + "\n");
        write_file(out_dir / "residuals.csv", residual_csv(flow));
        write_file(out_dir / "series.csv", res.csv);
        write_file(out_dir / "summary.json", s.dump(2) + "\n");
    }
    return res;
}

}  // namespace topostir
