#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "topostir/errors.h"
#include "topostir/experiment.h"

using namespace topostir;

namespace {

Json hold_config()
{
    return Json::parse(R"({
      "name": "hold",
      "protocol": {"word": ""},
      "integrator": {"steps_per_period": 50},
      "diagnostic": {
        "kind": "curve", "periods": 4,
        "curve": {"type": "segment", "from": [-0.25, -0.5], "to": [-0.25, 0.5], "segments": 10}
      },
      "thresholds": {"max_rate": 0.05}
    })");
}

Json gradient_config()
{
    return Json::parse(R"({
      "name": "small_gradient",
      "protocol": {"word": "1 -2"},
      "integrator": {"steps_per_period": 400},
      "diagnostic": {"kind": "gradient", "periods": 3, "grid": 6, "vorticity": {"type": "linear_x"}}
    })");
}

int exit_code_of(const Json& j)
{
    try {
        return run_experiment(parse_config(j)).exit_code;
    } catch(const std::exception& e) {
        return exit_code_for(e);
    }
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("config canonical form round trips")
{
    const ExperimentConfig c = parse_config(gradient_config());
    const Json canon = to_json(c);
    const ExperimentConfig d = parse_config(canon);
    CHECK(to_json(d) == canon);
    CHECK(config_hash(c) == config_hash(d));
    CHECK(config_hash(c).size() == 16);

    Json changed = gradient_config();
    changed["integrator"]["steps_per_period"] = 800;
    CHECK(config_hash(parse_config(changed)) != config_hash(c));

    const Json prov = provenance(c);
    CHECK(prov.at("config_hash") == config_hash(c));
    CHECK(prov.contains("version"));
}

TEST_CASE("config errors map to exit code 2")
{
    Json j = hold_config();
    j["bogus"] = 1;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    CHECK(exit_code_of(j) == 2);

    j = hold_config();
    j["protocol"]["word"] = "1 x";
    CHECK(exit_code_of(j) == 2);

    j = hold_config();
    j["protocol"]["moves"] = Json::array({Json{{"hold", 1.0}}});
    CHECK_THROWS_AS(parse_config(j), ConfigError);

    j = hold_config();
    j["flow"] = {{"circulations", {1.0, 0.0, 0.0, 0.0}}};
    CHECK(exit_code_of(j) == 2);

    j = gradient_config();
    j["integrator"] = {{"dt", 0.3}};
    CHECK(exit_code_of(j) == 2);

    j = hold_config();
    j["diagnostic"]["curve"] = {{"type", "segment"}, {"from", {-0.9, 0.0}}, {"to", {0.9, 0.0}}};
    CHECK(exit_code_of(j) == 2);

    j = hold_config();
    j["diagnostic"]["kind"] = "circulation";
    CHECK(exit_code_of(j) == 2);

    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
    CHECK(exit_code_for(LeftDomain("x")) == 3);
}

TEST_CASE("hold protocol run passes its threshold")
{
    const ExperimentResult r = run_experiment(parse_config(hold_config()));
    CHECK(r.exit_code == 0);
    CHECK(r.summary.at("rate").get<double>() <= 0.05);
    CHECK(r.summary.at("pass") == true);
    CHECK(r.values.size() == 5);
    CHECK(r.summary.at("braid").at("type") == "parabolic");
}

TEST_CASE("failed threshold gives exit code 1")
{
    Json j = hold_config();
    j["thresholds"] = {{"min_rate", 0.5}};
    const ExperimentResult r = run_experiment(parse_config(j));
    CHECK(r.exit_code == 1);
    const Json& check = r.summary.at("checks").at(0);
    CHECK(check.at("pass") == false);
    CHECK(check.at("margin").get<double>() < 0);
}

TEST_CASE("runs are reproducible and write their outputs")
{
    const auto dir = std::filesystem::temp_directory_path() / "topostir_experiment_test";
    std::filesystem::remove_all(dir);
    const ExperimentConfig c = parse_config(gradient_config());
    const ExperimentResult a = run_experiment(c, dir / "a");
    const ExperimentResult b = run_experiment(c, dir / "b");
    CHECK(a.csv == b.csv);
    for(const char* f : {"braid.json", "residuals.csv", "series.csv", "summary.json"}) {
        CHECK(std::filesystem::exists(dir / "a" / f));
        CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
    }
    CHECK(read_file(dir / "a" / "series.csv") == a.csv);
    CHECK(a.csv.rfind("n,value\n0,", 0) == 0);
    const Json summary = Json::parse(read_file(dir / "a" / "summary.json"));
    CHECK(summary.at("provenance").at("config_hash") == config_hash(c));
    std::filesystem::remove_all(dir);
}

TEST_CASE("series CSV format")
{
    CHECK(series_csv({1.0, 0.1}, {}) == "n,value\n0,1\n1,0.10000000000000001\n");
    CHECK(series_csv({2.5}, {7}) == "n,value,vertices\n0,2.5,7\n");
}

TEST_CASE("shipped configs load")
{
    const std::filesystem::path dir = std::filesystem::path(TOPOSTIR_SOURCE_DIR) / "configs";
    int count = 0;
    for(const auto& e : std::filesystem::directory_iterator(dir)) {
        if(e.path().extension() != ".json")
            continue;
        CAPTURE(e.path().string());
        CHECK_NOTHROW(load_config(e.path()));
        ++count;
    }
    CHECK(count >= 5);
}
