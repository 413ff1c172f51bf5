// topostir command-line front end.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "acceptance.h"
#include "topostir/errors.h"
#include "topostir/experiment.h"
#include "topostir/parallel.h"
#include "topostir/version.h"

using namespace topostir;

namespace {

struct Globals {
    int threads = 1;
    bool json = false;
    std::string out;
};

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void emit(const std::string& text, const std::string& path)
{
    if(path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if(!f)
        throw ConfigError("cannot write " + path);
    f << text;
}

int cmd_classify(const std::string& word_text, const Globals& g)
{
    const BraidWord w = parse_braid(word_text);
    const TNClass tn = classify(w);
    const IntMatrix2 m = burau_at_minus_one(w);
    if(g.json) {
        Json j;
        j["word"] = w.to_string();
        j["letters"] = w.to_letters();
        j["reduced"] = w.reduced().to_string();
        j["matrix"] = Json::array({Json::array({m.a, m.b}), Json::array({m.c, m.d})});
        j["trace"] = tn.trace;
        j["type"] = to_string(tn.type);
        j["identity_matrix"] = tn.identity_matrix;
        j["expansion"] = tn.expansion;
        j["entropy_bound"] = tn.pseudo_anosov() ? Json(std::log(tn.expansion)) : Json(nullptr);
        std::cout << j.dump(2) << '\n';
        return 0;
    }
    std::cout << "word      " << (w.empty() ? "(empty)" : w.to_string()) << '\n'
              << "reduced   " << (w.reduced().empty() ? "(empty)" : w.reduced().to_string()) << '\n'
              << "matrix    [[" << m.a << ", " << m.b << "], [" << m.c << ", " << m.d << "]]\n"
              << "trace     " << tn.trace << '\n'
              << "type      " << to_string(tn.type) << (tn.identity_matrix ? " (identity matrix)" : "") << '\n'
              << "lambda    " << fmt(tn.expansion) << '\n';
    if(tn.pseudo_anosov())
        std::cout << "log(lambda) " << fmt(std::log(tn.expansion)) << '\n';
    return 0;
}

ExperimentConfig config_or_word(const std::string& config, const std::string& word)
{
    if(!config.empty())
        return load_config(config);
    if(word.empty())
        throw ConfigError("give --config or --word");
    ExperimentConfig c;
    c.word = word;
    c.protocol();
    return c;
}

int cmd_protocol_validate(const std::string& config, const std::string& word, int samples, const Globals& g)
{
    const ExperimentConfig c = config_or_word(config, word);
    const StirringProtocol p = c.protocol();
    const AdmissibilityReport r = validate(p, samples);
    Json j{{"period", p.period()},
           {"moves", p.moves().size()},
           {"min_gap", r.min_gap},
           {"min_clearance", r.min_clearance},
           {"max_velocity_jump", r.max_velocity_jump},
           {"closure_error", r.closure_error},
           {"permutation", p.permutation()},
           {"passed", r.passed}};
    if(g.json)
        emit(j.dump(2) + "\n", g.out);
    else
        emit("period " + fmt(p.period()) + "\nmin_gap " + fmt(r.min_gap) + "\nmin_clearance " +
                 fmt(r.min_clearance) + "\nmax_velocity_jump " + fmt(r.max_velocity_jump) + "\nclosure_error " +
                 fmt(r.closure_error) + "\n" + (r.passed ? "admissible\n" : "NOT admissible\n"),
             g.out);
    return r.passed ? 0 : 1;
}

int cmd_protocol_extract(const std::string& config, const std::string& word, int samples, double angle,
                         const Globals& g)
{
    const ExperimentConfig c = config_or_word(config, word);
    const BraidWord w = extract_braid(c.protocol(), samples, angle);
    const TNClass tn = classify(w);
    if(g.json)
        emit(Json{{"word", w.to_string()}, {"trace", tn.trace}, {"type", to_string(tn.type)}}.dump(2) + "\n", g.out);
    else
        emit((w.empty() ? std::string("(empty)") : w.to_string()) + "\n", g.out);
    return 0;
}

int cmd_field_solve(const std::string& config, double t, int grid, const Globals& g)
{
    const ExperimentConfig c = load_config(config);
    ProtocolFlow flow(c.protocol(), c.conditions(), c.solver);
    const StreamModel m = flow.solve_at(t);
    const auto v = flow.protocol().velocities(t);
    const std::vector<Vec2> bv{Vec2::Zero(), v[0], v[1], v[2]};
    const ResidualReport r = residual_report(m, flow.conditions(), bv, c.solver.nodes_per_boundary);
    Json j{{"time", t},
           {"order", m.order()},
           {"max_normal_residual", r.max_normal_residual},
           {"normal_residual", r.normal_residual},
           {"circulation", r.circulation},
           {"circulation_error", r.circulation_error},
           {"condition_estimate", r.condition_estimate},
           {"log_strengths", m.log_strengths()},
           {"stream_constants", m.stream_constants()}};
    if(grid > 0) {
        std::ostringstream os;
        os << "x,y,psi,u,v\n";
        const DomainSnapshot& dom = m.domain();
        for(int jy = 0; jy < grid; ++jy)
            for(int ix = 0; ix < grid; ++ix) {
                const Vec2 z(-1 + (ix + 0.5) * 2.0 / grid, -1 + (jy + 0.5) * 2.0 / grid);
                if(dom.clearance(z) < 0)
                    continue;
                const Vec2 u = m.velocity_unchecked(z);
                os << fmt(z.x()) << ',' << fmt(z.y()) << ',' << fmt(m.stream_unchecked(z)) << ',' << fmt(u.x())
                   << ',' << fmt(u.y()) << '\n';
            }
        if(g.out.empty())
            throw ConfigError("--grid needs --out for the CSV");
        emit(os.str(), g.out);
        std::cout << j.dump(2) << '\n';
    } else {
        emit(j.dump(2) + "\n", g.out);
    }
    return 0;
}

std::vector<Vec2> read_tracers(const std::string& path)
{
    std::ifstream in(path);
    if(!in)
        throw ConfigError("cannot read tracers " + path);
    std::vector<Vec2> pts;
    std::string line;
    while(std::getline(in, line)) {
        if(line.empty() || line[0] == '#')
            continue;
        for(char& ch : line)
            if(ch == ',')
                ch = ' ';
        std::istringstream ls(line);
        double x, y;
        if(!(ls >> x >> y)) {
            if(pts.empty())
                continue;  // header
            throw ConfigError("bad tracer line: " + line);
        }
        pts.emplace_back(x, y);
    }
    return pts;
}

int cmd_advect(const std::string& config, const std::string& tracers, int periods, bool jacobian, const Globals& g)
{
    const ExperimentConfig c = load_config(config);
    ProtocolFlow flow(c.protocol(), c.conditions(), c.solver);
    const auto pts = read_tracers(tracers);
    const IntegratorOptions io = c.integrator();
    const auto out = advect_with_jacobian(pts, 0.0, periods * flow.period(), flow, io);
    std::ostringstream os;
    os << (jacobian ? "x0,y0,x,y,j11,j12,j21,j22\n" : "x0,y0,x,y\n");
    for(std::size_t i = 0; i < pts.size(); ++i) {
        os << fmt(pts[i].x()) << ',' << fmt(pts[i].y()) << ',' << fmt(out[i].point.x()) << ','
           << fmt(out[i].point.y());
        if(jacobian) {
            const Mat2& J = out[i].jacobian;
            os << ',' << fmt(J(0, 0)) << ',' << fmt(J(0, 1)) << ',' << fmt(J(1, 0)) << ',' << fmt(J(1, 1));
        }
        os << '\n';
    }
    emit(os.str(), g.out);
    return 0;
}

int cmd_run(ExperimentConfig c, std::optional<DiagnosticKind> kind, const Globals& g)
{
    if(kind) {
        c.kind = *kind;
        // Re-run cross-field validation for the selected diagnostic.
        c = parse_config(to_json(c));
    }
    const std::string dir = !g.out.empty() ? g.out : c.output;
    const ExperimentResult r = run_experiment(c, dir);
    if(g.json || !dir.empty())
        std::cout << r.summary.dump(2) << '\n';
    else
        std::cout << r.csv;
    if(!g.json) {
        const auto& s = r.summary;
        if(s.contains("rate") && s["rate"].is_number())
            std::cerr << "rate " << fmt(s["rate"].get<double>()) << " per period";
        if(s.contains("braid") && s["braid"]["type"] == "PseudoAnosov")
            std::cerr << ", log(lambda) " << fmt(s["braid"]["log_lambda"].get<double>());
        if(s.contains("drift"))
            std::cerr << "drift " << fmt(s["drift"].get<double>());
        std::cerr << (r.exit_code == 0 ? "\npass\n" : "\nFAIL\n");
    }
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Topological stirring: braid classification, constant-vorticity flows, growth diagnostics"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    Globals g;
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--json", g.json, "JSON output");
    app.add_option("--out", g.out, "Output file (or directory for run/measure)");

    std::string word;
    auto* classify_cmd = app.add_subcommand("classify", "Burau matrix, trace and Thurston-Nielsen type of a braid");
    classify_cmd->add_option("word", word, "Braid word, e.g. \"1 -2\" or \"aB\"")->required();

    std::string config;
    int validate_samples = 100;
    int extract_samples = 10000;
    double angle = 0;
    auto* protocol_cmd = app.add_subcommand("protocol", "Stirring protocols");
    protocol_cmd->require_subcommand(1);
    auto* validate_cmd = protocol_cmd->add_subcommand("validate", "Admissibility of a protocol");
    auto* extract_cmd = protocol_cmd->add_subcommand("extract", "Braid traced by the stirrers");
    for(auto* sub : {validate_cmd, extract_cmd}) {
        sub->add_option("config,--config", config, "Experiment config (JSON)");
        sub->add_option("--word", word, "Braid word (instead of a config)");
    }
    validate_cmd->add_option("--samples", validate_samples, "Samples per move")->check(CLI::PositiveNumber);
    extract_cmd->add_option("--samples", extract_samples, "Samples per period")->check(CLI::PositiveNumber);
    extract_cmd->add_option("--angle", angle, "Projection axis angle in radians");

    double time = 0;
    int grid = 0;
    auto* field_cmd = app.add_subcommand("field", "Stream-function solves");
    field_cmd->require_subcommand(1);
    auto* solve_cmd = field_cmd->add_subcommand("solve", "Solve one snapshot and report residuals");
    solve_cmd->add_option("--config", config, "Experiment config (JSON)")->required();
    solve_cmd->add_option("--time", time, "Snapshot time");
    solve_cmd->add_option("--grid", grid, "Write an n x n velocity grid CSV to --out");

    std::string tracers;
    int periods = 1;
    bool jacobian = false;
    auto* advect_cmd = app.add_subcommand("advect", "Advect tracers over whole periods");
    advect_cmd->add_option("--config", config, "Experiment config (JSON)")->required();
    advect_cmd->add_option("--tracers", tracers, "CSV of x,y")->required();
    advect_cmd->add_option("--periods", periods, "Periods")->check(CLI::NonNegativeNumber);
    advect_cmd->add_flag("--jacobian", jacobian, "Append flow-map Jacobians");

    auto* measure_cmd = app.add_subcommand("measure", "Growth and circulation diagnostics");
    measure_cmd->require_subcommand(1);
    std::map<CLI::App*, DiagnosticKind> kinds;
    kinds[measure_cmd->add_subcommand("curve", "Material-curve length growth")] = DiagnosticKind::Curve;
    kinds[measure_cmd->add_subcommand("gradient", "Vorticity-gradient growth")] = DiagnosticKind::Gradient;
    kinds[measure_cmd->add_subcommand("circulation", "Circulation drift")] = DiagnosticKind::Circulation;
    for(auto& [sub, kind] : kinds)
        sub->add_option("--config", config, "Experiment config (JSON)")->required();

    auto* run_cmd = app.add_subcommand("run", "Run the diagnostic selected in a config");
    run_cmd->add_option("--config", config, "Experiment config (JSON)")->required();

    std::vector<int> only;
    auto* accept_cmd = app.add_subcommand("accept", "Run the acceptance suite");
    accept_cmd->add_option("--only", only, "Criterion numbers to run");

    CLI11_PARSE(app, argc, argv);
    set_thread_count(static_cast<unsigned>(g.threads));

    try {
        if(*classify_cmd)
            return cmd_classify(word, g);
        if(*validate_cmd)
            return cmd_protocol_validate(config, word, validate_samples, g);
        if(*extract_cmd)
            return cmd_protocol_extract(config, word, extract_samples, angle, g);
        if(*solve_cmd)
            return cmd_field_solve(config, time, grid, g);
        if(*advect_cmd)
            return cmd_advect(config, tracers, periods, jacobian, g);
        for(auto& [sub, kind] : kinds)
            if(*sub)
                return cmd_run(load_config(config), kind, g);
        if(*run_cmd)
            return cmd_run(load_config(config), std::nullopt, g);
        if(*accept_cmd)
            return run_acceptance(std::cout, std::set<int>(only.begin(), only.end())) ? 0 : 1;
    } catch(const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}
