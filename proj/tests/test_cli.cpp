#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "nlfb/cli.hpp"

using namespace nlfb;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("nlfb_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

nlohmann::json read_json(const fs::path& p)
{
    return nlohmann::json::parse(slurp(p));
}

int exec(const std::string& command, const ScenarioConfig& cfg, const fs::path& dir, std::string* err = nullptr)
{
    std::ostringstream out;
    std::ostringstream e;
    const int rc = execute(command, cfg, dir, 2, out, e);
    if (err)
        *err = e.str();
    return rc;
}

} // namespace

TEST_CASE("dotted overrides")
{
    nlohmann::json j = {{"problem", {{"mu", 1.0}}}};
    apply_override(j, "problem.mu=0.25");
    apply_override(j, "problem.kernel.family=algebraic");
    apply_override(j, "analysis.sweep.values=[1,2]");
    CHECK(j["problem"]["mu"] == 0.25);
    CHECK(j["problem"]["kernel"]["family"] == "algebraic");
    CHECK(j["analysis"]["sweep"]["values"].size() == 2);
    CHECK_THROWS_AS(apply_override(j, "problem.mu"), ValidationError);
    CHECK_THROWS_AS(apply_override(j, "problem..mu=1"), ValidationError);
    CHECK_THROWS_AS(apply_override(j, "problem.mu.x=1"), ValidationError);
}

TEST_CASE("minimal config gets every default")
{
    nlohmann::json raw = {{"problem", {{"kernel", {{"family", "compact-cosine"}}}, {"reaction", {{"kind", "logistic"}}}}}};
    const auto c = resolve_config(raw, {});
    const auto j = c.to_json();
    for (const char* k : {"problem", "solver", "semiwave", "stationary", "analysis", "output"})
        CHECK(j.contains(k));
    CHECK(j["problem"]["kernel"]["r"] == 1.0);
    CHECK(j["solver"]["dx"] == 0.05);
    CHECK(j["problem"]["h0"] == 10.0);
    CHECK(j["analysis"]["verify"]["checks"].size() == 1);
    // the resolved form is a fixed point
    CHECK(ScenarioConfig::from_json(j).to_json() == j);
}

TEST_CASE("config validation")
{
    try {
        resolve_config({{"problem", {{"foo", 1}, {"bar", 2}}}}, {});
        FAIL("accepted unknown keys");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("foo") != std::string::npos);
        CHECK(msg.find("bar") != std::string::npos);
    }
    CHECK_THROWS_AS(resolve_config({{"colour", 1}}, {}), ValidationError);
    CHECK_THROWS_AS(resolve_config({}, {"analysis.verify.checks=[\"nope\"]"}), ValidationError);
    CHECK_THROWS_AS(resolve_config({}, {"solver.dt=1e9"}), ConfigError);
    CHECK_THROWS_AS(resolve_config({}, {"analysis.rates.window_fraction=0"}), ValidationError);
    CHECK_THROWS_AS(resolve_config({}, {"analysis.verify.fixture.against_run=true", "analysis.verify.fixture.t1=100"}), ValidationError);
    CHECK_THROWS_AS(resolve_config_file("/nonexistent/config.json", {}), ValidationError);

    const auto c = resolve_config({}, {"problem.kernel={\"family\":\"algebraic\",\"gamma\":2}", "problem.kernel.gamma=1.5"});
    CHECK(c.to_json()["problem"]["kernel"]["gamma"] == 1.5);
}

TEST_CASE("simulate with t_end 0 writes one trajectory row")
{
    const auto dir = fresh("t0");
    const auto c = resolve_config({}, {"solver.t_end=0"});
    REQUIRE(exec("simulate", c, dir) == 0);
    std::istringstream is(slurp(dir / "trajectory.csv"));
    std::string line;
    int rows = 0;
    std::getline(is, line);
    CHECK(line == "t,h,g,mass,sup_u,flux");
    while (std::getline(is, line))
        ++rows;
    CHECK(rows == 1);
    CHECK(fs::exists(dir / "resolved_config.json"));
    CHECK(fs::exists(dir / "snapshot_0.csv"));
    CHECK(read_json(dir / "resolved_config.json") == c.to_json());
}

TEST_CASE("exit statuses")
{
    std::string err;
    const auto heavy = resolve_config({}, {"problem.kernel={\"family\":\"algebraic\",\"gamma\":1.5}"});
    const auto d1 = fresh("j1");
    CHECK(exec("semiwave", heavy, d1, &err) == 1);
    CHECK(err.find("(J1)") != std::string::npos);
    CHECK(read_json(d1 / "error.json")["status"] == 1);

    const auto capped = resolve_config({}, {"solver.max_nodes=300", "solver.t_end=50"});
    const auto d2 = fresh("cap");
    CHECK(exec("simulate", capped, d2, &err) == 2);
    CHECK(fs::exists(d2 / "trajectory.csv"));
    CHECK(read_json(d2 / "error.json")["status"] == 2);

    CHECK(exec("dance", capped, fresh("bad"), &err) == 1);
}

TEST_CASE("reruns are bit-identical")
{
    const auto c = resolve_config({}, {"solver.t_end=5", "solver.snapshot_every=1", "problem.h0=3"});
    const auto a = fresh("det_a");
    const auto b = fresh("det_b");
    REQUIRE(exec("simulate", c, a) == 0);
    REQUIRE(exec("simulate", c, b) == 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename();
        CHECK(slurp(a / name) == slurp(b / name));
        ++files;
    }
    CHECK(files == 9);
    CHECK(fs::exists(a / "snapshot_2.csv"));
}

TEST_CASE("mu sweep then report shows a monotone speed column")
{
    const auto dir = fresh("sweep");
    const auto c = resolve_config({}, {"analysis.sweep.values=[1,0.01,0.1]"});
    REQUIRE(exec("sweep", c, dir) == 0);
    const auto summary = read_json(dir / "summary.json");
    REQUIRE(summary["points"].size() == 3);
    CHECK(summary["points"][0]["dir"] == "point_000");
    CHECK(read_json(dir / "point_001" / "resolved_config.json")["problem"]["mu"] == 0.01);
    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(report(dir, out, err) == 0);
    const auto r = read_json(dir / "report.json");
    CHECK(r["pass"] == true);
    CHECK(r["sweep"]["metric"] == "c0");
    CHECK(r["sweep"]["increasing"] == true);
    CHECK(r["sweep"]["column"][0][0] == 0.01);
    CHECK(out.str().find("monotone: increasing") != std::string::npos);

    const auto empty = fresh("empty");
    fs::create_directories(empty);
    CHECK(report(empty, out, err) == 1);
    CHECK(err.str().find("resolved_config.json") != std::string::npos);
}

TEST_CASE("verify and rates artifacts")
{
    const auto dir = fresh("verify");
    const auto c = resolve_config({}, {"analysis.verify.checks=[\"mass_flux\",\"psi\",\"fixture\"]", "analysis.verify.fixture.kind=SubTLogTFront",
                                       "problem.kernel={\"family\":\"algebraic\",\"gamma\":2}", "problem.h0=2", "solver.t_end=2",
                                       "solver.dt=0.002", "analysis.verify.fixture.margins_csv=true"});
    REQUIRE(exec("verify", c, dir) == 0);
    const auto v = read_json(dir / "verify.json");
    CHECK(v["checks"]["mass_flux"]["residual"].get<double>() <= 1e-3);
    CHECK(v["checks"]["psi"]["holds"] == true);
    CHECK(v["checks"]["fixture"]["pass"] == true);
    CHECK(v["pass"] == true);
    CHECK(fs::exists(dir / "margins.csv"));

    const auto bad = resolve_config({}, {"analysis.verify.checks=[\"fixture\"]", "analysis.verify.fixture.kind=SubPowerFront"});
    CHECK(exec("verify", bad, fresh("verify_bad")) == 1);

    const auto rd = fresh("rates");
    const auto rc = resolve_config({}, {"solver.t_end=40", "solver.dt=0.02", "analysis.rates.models=[\"linear\"]"});
    REQUIRE(exec("rates", rc, rd) == 0);
    const auto rates = read_json(rd / "rates.json");
    CHECK(rates["linear"]["c"].get<double>() > 0);
    CHECK(fs::exists(rd / "trajectory.csv"));
    std::ostringstream out;
    std::ostringstream err;
    CHECK(report(rd, out, err) == 0);
}
