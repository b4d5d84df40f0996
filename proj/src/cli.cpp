#include "nlfb/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "nlfb/asymptotics.hpp"
#include "nlfb/validation.hpp"

namespace nlfb {

namespace fs = std::filesystem;
using detail::reject_unknown;

namespace {

nlohmann::json section(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key))
        return nlohmann::json::object();
    if (!j.at(key).is_object())
        throw ValidationError(std::string(key) + ": must be an object");
    return j.at(key);
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback)
{
    if (!j.contains(key) || j.at(key).is_null())
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("config: bad value for \"") + key + "\"");
    }
}

std::vector<std::string> check_names(const std::vector<std::string>& names, const std::set<std::string>& known, const std::string& where)
{
    std::string bad;
    for (const auto& n : names)
        if (!known.count(n))
            bad += (bad.empty() ? "" : ", ") + n;
    if (!bad.empty())
        throw ValidationError(where + ": unknown entries: " + bad);
    return names;
}

RatesOptions rates_from_json(const nlohmann::json& j)
{
    reject_unknown(j, {"models", "window_fraction", "max_variation"}, "analysis.rates");
    RatesOptions o;
    o.models = check_names(get_or(j, "models", o.models), {"linear", "power", "tlogt", "drift"}, "analysis.rates.models");
    o.window_fraction = get_or(j, "window_fraction", o.window_fraction);
    o.max_variation = get_or(j, "max_variation", o.max_variation);
    if (!(o.window_fraction > 0 && o.window_fraction <= 1))
        throw ValidationError("analysis.rates: window_fraction must lie in (0, 1]");
    return o;
}

VerifyOptions verify_from_json(const nlohmann::json& j)
{
    reject_unknown(j,
                   {"checks", "mass_flux_tol", "comparison_scale", "comparison_tol", "refinement_levels", "fixture", "psi"},
                   "analysis.verify");
    VerifyOptions o;
    o.checks = check_names(get_or(j, "checks", o.checks), {"fixture", "psi", "mass_flux", "comparison", "refinement"},
                           "analysis.verify.checks");
    o.mass_flux_tol = get_or(j, "mass_flux_tol", o.mass_flux_tol);
    o.comparison_scale = get_or(j, "comparison_scale", o.comparison_scale);
    o.comparison_tol = get_or(j, "comparison_tol", o.comparison_tol);
    o.refinement_levels = get_or(j, "refinement_levels", o.refinement_levels);
    if (!(o.comparison_scale >= 0 && o.comparison_scale <= 1))
        throw ValidationError("analysis.verify: comparison_scale must lie in [0, 1]");

    const auto f = section(j, "fixture");
    reject_unknown(f, {"kind", "params", "t0", "t1", "nt", "nx", "against_run", "margins_csv"}, "analysis.verify.fixture");
    auto& fx = o.fixture;
    fx.kind = get_or(f, "kind", fx.kind);
    fx.params = get_or(f, "params", fx.params);
    fx.t0 = get_or(f, "t0", fx.t0);
    fx.t1 = get_or(f, "t1", fx.t1);
    fx.nt = get_or(f, "nt", fx.nt);
    fx.nx = get_or(f, "nx", fx.nx);
    fx.against_run = get_or(f, "against_run", fx.against_run);
    fx.margins_csv = get_or(f, "margins_csv", fx.margins_csv);

    const auto p = section(j, "psi");
    reject_unknown(p, {"kappa1", "kappa2", "eps", "dx"}, "analysis.verify.psi");
    o.psi.kappa1 = get_or(p, "kappa1", o.psi.kappa1);
    o.psi.kappa2 = get_or(p, "kappa2", o.psi.kappa2);
    o.psi.eps = get_or(p, "eps", o.psi.eps);
    o.psi.dx = get_or(p, "dx", o.psi.dx);
    return o;
}

FixtureKind fixture_kind(const FixtureOptions& o)
{
    const auto& p = o.params;
    if (!p.is_object())
        throw ValidationError("analysis.verify.fixture.params: must be an object");
    auto num = [&](const char* key, double fallback) { return get_or(p, key, fallback); };
    if (o.kind == "SuperSemiwave") {
        reject_unknown(p, {"theta", "beta", "l"}, "fixture params");
        SuperSemiwave s;
        return SuperSemiwave{num("theta", s.theta), num("beta", s.beta), num("l", s.l)};
    }
    if (o.kind == "SubPlateau") {
        reject_unknown(p, {"theta", "eta1", "rho1"}, "fixture params");
        SubPlateau s;
        return SubPlateau{num("theta", s.theta), num("eta1", s.eta1), num("rho1", s.rho1)};
    }
    if (o.kind == "SubSemiwave") {
        reject_unknown(p, {"theta", "l1", "l2", "eta0"}, "fixture params");
        SubSemiwave s;
        return SubSemiwave{num("theta", s.theta), num("l1", s.l1), num("l2", s.l2), num("eta0", s.eta0)};
    }
    if (o.kind == "SubPowerFront") {
        reject_unknown(p, {"theta", "l1", "eps"}, "fixture params");
        SubPowerFront s;
        return SubPowerFront{num("theta", s.theta), num("l1", s.l1), num("eps", s.eps)};
    }
    if (o.kind == "SubTLogTFront") {
        reject_unknown(p, {"theta", "l1", "alpha", "eps"}, "fixture params");
        SubTLogTFront s;
        return SubTLogTFront{num("theta", s.theta), num("l1", s.l1), num("alpha", s.alpha), num("eps", s.eps)};
    }
    throw ValidationError("analysis.verify.fixture: unknown kind \"" + o.kind + "\"");
}

bool needs_semiwave(const FixtureKind& k)
{
    return std::holds_alternative<SuperSemiwave>(k) || std::holds_alternative<SubSemiwave>(k) ||
           std::holds_alternative<SubPlateau>(k);
}

std::string number_label(double v)
{
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream os(p, std::ios::binary);
    if (!os)
        throw ResourceError("cannot write " + p.string());
    os << text;
}

void write_json(const fs::path& p, const nlohmann::json& j)
{
    write_file(p, j.dump(2) + "\n");
}

template <class F>
void write_stream(const fs::path& p, F&& body)
{
    std::ostringstream os;
    body(os);
    write_file(p, os.str());
}

void write_trajectory(const fs::path& dir, const TrajectoryLog& log, bool snapshots)
{
    write_stream(dir / "trajectory.csv", [&](std::ostream& os) { log.write_csv(os); });
    if (!snapshots)
        return;
    for (const auto& s : log.snapshots)
        write_stream(dir / ("snapshot_" + number_label(s.t) + ".csv"), [&](std::ostream& os) { write_snapshot_csv(os, s.field); });
}

nlohmann::json simulate(const ScenarioConfig& cfg, const fs::path& dir, TrajectoryLog& log)
{
    try {
        log = run(cfg.problem, cfg.solver);
    } catch (const PartialRunError& e) {
        write_trajectory(dir, e.partial, cfg.output.snapshots);
        throw;
    }
    write_trajectory(dir, log, cfg.output.snapshots);
    nlohmann::json j = {{"t_end", log.t.back()},
                        {"h_end", log.h.back()},
                        {"rows", log.size()},
                        {"snapshots", log.snapshots.size()},
                        {"outcome", to_string(classify(log, cfg.problem, cfg.solver.classify))}};
    if (std::isfinite(log.g.back()))
        j["g_end"] = log.g.back();
    write_json(dir / "simulate.json", j);
    return j;
}

nlohmann::json simulate(const ScenarioConfig& cfg, const fs::path& dir)
{
    TrajectoryLog log;
    return simulate(cfg, dir, log);
}

nlohmann::json semiwave_cmd(const ScenarioConfig& cfg, const fs::path& dir)
{
    const auto& p = cfg.problem;
    nlohmann::json j;
    const auto sw = solve_semiwave(p.kernel, p.reaction, p.d, p.mu, cfg.semiwave);
    j["semiwave"] = sw.to_json();
    write_stream(dir / "profile.csv", [&](std::ostream& os) { sw.write_profile_csv(os); });
    if (cfg.semiwave_targets.minimal_speed) {
        const auto w = minimal_speed(p.kernel, p.reaction, p.d);
        j["minimal_speed"] = w.to_json();
        j["c0_over_c_star"] = sw.c0 / w.c_star;
    }
    if (cfg.semiwave_targets.stationary) {
        const auto st = stationary_profile(p.kernel, p.reaction, p.d, cfg.stationary);
        j["stationary"] = st.to_json();
        write_stream(dir / "stationary_profile.csv", [&](std::ostream& os) { st.write_profile_csv(os); });
    }
    j["c0"] = sw.c0;
    write_json(dir / "semiwave.json", j);
    return j;
}

nlohmann::json rates_cmd(const ScenarioConfig& cfg, const fs::path& dir)
{
    TrajectoryLog log;
    simulate(cfg, dir, log);
    const auto& r = cfg.rates;
    nlohmann::json j = nlohmann::json::object();
    bool pass = true;
    for (const auto& m : r.models) {
        if (m == "linear")
            j["linear"] = estimate_linear_speed(log, r.window_fraction).to_json();
        else if (m == "power")
            j["power"] = fit_power_exponent(log, r.window_fraction).to_json();
        else if (m == "tlogt")
            j["tlogt"] = fit_tlogt_coefficient(log, r.window_fraction).to_json();
        else if (m == "drift") {
            const auto sw = solve_semiwave(cfg.problem.kernel, cfg.problem.reaction, cfg.problem.d, cfg.problem.mu, cfg.semiwave);
            const auto d = log_drift_check(log, sw.c0, r.window_fraction, r.max_variation);
            j["drift"] = d.to_json();
            pass = pass && d.pass;
        }
    }
    j["pass"] = pass;
    write_json(dir / "rates.json", j);
    return j;
}

ProblemSpec scaled_initial(const ProblemSpec& p, double s)
{
    ProblemSpec q = p;
    if (q.u0.shape == "sampled") {
        for (auto& u : q.u0.us)
            u *= s;
    } else {
        q.u0.amplitude = s * (q.u0.amplitude ? *q.u0.amplitude : q.reaction.u_star());
    }
    return q;
}

nlohmann::json verify_cmd(const ScenarioConfig& cfg, const fs::path& dir, int jobs)
{
    const auto& v = cfg.verify;
    const auto& p = cfg.problem;
    nlohmann::json checks = nlohmann::json::object();
    bool pass = true;
    for (const auto& name : v.checks) {
        if (name == "fixture") {
            const auto kind = fixture_kind(v.fixture);
            std::optional<SemiWaveSolution> sw;
            if (needs_semiwave(kind))
                sw = solve_semiwave(p.kernel, p.reaction, p.d, p.mu, cfg.semiwave);
            const FixtureCandidate fc(kind, p.kernel, p.reaction, p.d, p.mu, sw);
            FixtureLattice lat;
            lat.t0 = v.fixture.t0;
            lat.t1 = v.fixture.t1;
            lat.nt = v.fixture.nt;
            lat.nx = v.fixture.nx;
            lat.jobs = jobs;
            lat.keep_samples = v.fixture.margins_csv;
            TrajectoryLog log;
            if (v.fixture.against_run) {
                log = run(p, cfg.solver);
                lat.run = &log;
            }
            const auto rep = verify_fixture(fc, lat);
            if (v.fixture.margins_csv)
                write_stream(dir / "margins.csv", [&](std::ostream& os) { rep.write_margin_csv(os); });
            auto j = rep.to_json();
            j["fixture"] = fc.to_json();
            checks["fixture"] = j;
            pass = pass && rep.pass;
        } else if (name == "psi") {
            const auto rep = psi_inequality_check(p.kernel, v.psi.kappa1, v.psi.kappa2, v.psi.eps, v.psi.dx);
            checks["psi"] = rep.to_json();
            pass = pass && rep.found && rep.holds;
        } else if (name == "mass_flux") {
            const double r = mass_flux_residual(run(p, cfg.solver), p);
            const bool ok = r <= v.mass_flux_tol;
            checks["mass_flux"] = {{"residual", r}, {"tol", v.mass_flux_tol}, {"pass", ok}};
            pass = pass && ok;
        } else if (name == "comparison") {
            const auto rep = comparison_order_check(scaled_initial(p, v.comparison_scale), p, cfg.solver, v.comparison_tol);
            checks["comparison"] = rep.to_json();
            pass = pass && rep.pass;
        } else if (name == "refinement") {
            const auto rep = refinement_order(p, cfg.solver, v.refinement_levels, jobs);
            checks["refinement"] = rep.to_json();
            checks["refinement"]["pass"] = !rep.inconclusive;
            pass = pass && !rep.inconclusive;
        }
    }
    nlohmann::json j = {{"checks", checks}, {"pass", pass}};
    write_json(dir / "verify.json", j);
    return j;
}

/// Headline number of a command's result, for sweep summaries.
nlohmann::json headline(const std::string& command, const nlohmann::json& r)
{
    if (command == "semiwave")
        return {{"c0", r.at("c0")}};
    if (command == "simulate")
        return {{"h_end", r.at("h_end")}, {"outcome", r.at("outcome")}};
    if (command == "rates") {
        nlohmann::json h = {{"pass", r.at("pass")}};
        if (r.contains("linear"))
            h["c"] = r["linear"]["c"];
        if (r.contains("power"))
            h["exponent"] = r["power"]["exponent"];
        if (r.contains("tlogt"))
            h["coefficient"] = r["tlogt"]["coefficient"];
        return h;
    }
    return {{"pass", r.at("pass")}};
}

int exit_status(const std::exception_ptr& e, std::string& message)
{
    try {
        std::rethrow_exception(e);
    } catch (const ValidationError& x) {
        message = x.what();
        return 1;
    } catch (const nlohmann::json::exception& x) {
        message = std::string("config: ") + x.what();
        return 1;
    } catch (const std::exception& x) {
        message = x.what();
        return 2;
    }
}

nlohmann::json dispatch(const std::string& command, const ScenarioConfig& cfg, const fs::path& dir, int jobs, std::ostream& out,
                        std::ostream& err);

nlohmann::json sweep_cmd(const ScenarioConfig& cfg, const fs::path& dir, int jobs, std::ostream& err)
{
    const auto& s = cfg.sweep;
    if (s.values.empty())
        throw ValidationError("analysis.sweep: values must not be empty");
    if (s.command == "sweep")
        throw ValidationError("analysis.sweep: command cannot be sweep");
    const nlohmann::json base = cfg.to_json();
    std::vector<ScenarioConfig> points;
    for (double v : s.values)
        points.push_back(resolve_config(base, {s.parameter + "=" + number_label(v)}));

    std::vector<nlohmann::json> rows(points.size());
    std::mutex log_mutex;
    const std::size_t workers = static_cast<std::size_t>(std::max(1, std::min<int>(jobs, static_cast<int>(points.size()))));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < points.size(); i += workers) {
                std::ostringstream name;
                name << "point_" << std::setw(3) << std::setfill('0') << i;
                const fs::path sub = dir / name.str();
                std::ostringstream sink;
                std::ostringstream errs;
                nlohmann::json row = {{"value", s.values[i]}, {"dir", name.str()}};
                fs::create_directories(sub);
                write_json(sub / "resolved_config.json", points[i].to_json());
                try {
                    row["result"] = headline(s.command, dispatch(s.command, points[i], sub, 1, sink, errs));
                    row["status"] = 0;
                } catch (...) {
                    std::string msg;
                    row["status"] = exit_status(std::current_exception(), msg);
                    row["error"] = msg;
                    write_json(sub / "error.json", {{"status", row["status"]}, {"message", msg}});
                    std::lock_guard<std::mutex> lock(log_mutex);
                    err << name.str() << ": " << msg << "\n";
                }
                rows[i] = row;
            }
        });
    for (auto& t : pool)
        t.join();
    nlohmann::json j = {{"parameter", s.parameter}, {"command", s.command}, {"points", rows}};
    write_json(dir / "summary.json", j);
    return j;
}

nlohmann::json dispatch(const std::string& command, const ScenarioConfig& cfg, const fs::path& dir, int jobs, std::ostream& out,
                        std::ostream& err)
{
    nlohmann::json r;
    if (command == "simulate")
        r = simulate(cfg, dir);
    else if (command == "semiwave")
        r = semiwave_cmd(cfg, dir);
    else if (command == "rates")
        r = rates_cmd(cfg, dir);
    else if (command == "verify")
        r = verify_cmd(cfg, dir, jobs);
    else if (command == "sweep")
        r = sweep_cmd(cfg, dir, jobs, err);
    else
        throw ValidationError("unknown command \"" + command + "\"");
    out << r.dump(2) << "\n";
    return r;
}

} // namespace

nlohmann::json ScenarioConfig::to_json() const
{
    const auto& fx = verify.fixture;
    return {
        {"problem", problem.to_json()},
        {"solver", solver.to_json()},
        {"semiwave", semiwave.to_json()},
        {"stationary", stationary.to_json()},
        {"analysis",
         {{"rates", {{"models", rates.models}, {"window_fraction", rates.window_fraction}, {"max_variation", rates.max_variation}}},
          {"semiwave", {{"minimal_speed", semiwave_targets.minimal_speed}, {"stationary", semiwave_targets.stationary}}},
          {"verify",
           {{"checks", verify.checks},
            {"mass_flux_tol", verify.mass_flux_tol},
            {"comparison_scale", verify.comparison_scale},
            {"comparison_tol", verify.comparison_tol},
            {"refinement_levels", verify.refinement_levels},
            {"fixture",
             {{"kind", fx.kind},
              {"params", fx.params},
              {"t0", fx.t0},
              {"t1", fx.t1},
              {"nt", fx.nt},
              {"nx", fx.nx},
              {"against_run", fx.against_run},
              {"margins_csv", fx.margins_csv}}},
            {"psi", {{"kappa1", verify.psi.kappa1}, {"kappa2", verify.psi.kappa2}, {"eps", verify.psi.eps}, {"dx", verify.psi.dx}}}}},
          {"sweep", {{"parameter", sweep.parameter}, {"values", sweep.values}, {"command", sweep.command}}}}},
        {"output", {{"dir", output.dir}, {"snapshots", output.snapshots}}},
    };
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ValidationError("config: top level must be an object");
    reject_unknown(j, {"problem", "solver", "semiwave", "stationary", "analysis", "output"}, "config");
    ScenarioConfig c;
    c.problem = ProblemSpec::from_json(section(j, "problem"));
    c.solver = SolverConfig::from_json(section(j, "solver"));
    c.semiwave = SemiWaveConfig::from_json(section(j, "semiwave"));
    c.stationary = StationaryConfig::from_json(section(j, "stationary"));

    const auto a = section(j, "analysis");
    reject_unknown(a, {"rates", "semiwave", "verify", "sweep"}, "analysis");
    c.rates = rates_from_json(section(a, "rates"));
    const auto sw = section(a, "semiwave");
    reject_unknown(sw, {"minimal_speed", "stationary"}, "analysis.semiwave");
    c.semiwave_targets.minimal_speed = get_or(sw, "minimal_speed", false);
    c.semiwave_targets.stationary = get_or(sw, "stationary", false);
    c.verify = verify_from_json(section(a, "verify"));
    const auto s = section(a, "sweep");
    reject_unknown(s, {"parameter", "values", "command"}, "analysis.sweep");
    c.sweep.parameter = get_or(s, "parameter", c.sweep.parameter);
    c.sweep.values = get_or(s, "values", c.sweep.values);
    c.sweep.command = get_or(s, "command", c.sweep.command);
    if (!std::set<std::string>{"simulate", "semiwave", "rates", "verify"}.count(c.sweep.command))
        throw ValidationError("analysis.sweep: command must be simulate, semiwave, rates or verify");

    const auto o = section(j, "output");
    reject_unknown(o, {"dir", "snapshots"}, "output");
    c.output.dir = get_or(o, "dir", c.output.dir);
    c.output.snapshots = get_or(o, "snapshots", c.output.snapshots);
    return c;
}

void apply_override(nlohmann::json& j, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ValidationError("override \"" + assignment + "\" is not of the form key=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded())
        value = text;
    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty())
            throw ValidationError("override \"" + assignment + "\" has an empty path component");
        if (!node->is_object()) {
            if (!node->is_null())
                throw ValidationError("override \"" + assignment + "\": " + key + " is not inside an object");
            *node = nlohmann::json::object();
        }
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

ScenarioConfig resolve_config(nlohmann::json raw, const std::vector<std::string>& overrides)
{
    if (raw.is_null())
        raw = nlohmann::json::object();
    for (const auto& o : overrides)
        apply_override(raw, o);
    ScenarioConfig c = ScenarioConfig::from_json(raw);
    check_config(c.problem, c.solver);
    const auto& fx = c.verify.fixture;
    if (!(fx.t1 >= fx.t0 && fx.t0 >= 0) || fx.nt < 1 || fx.nx < 2)
        throw ValidationError("analysis.verify.fixture: need 0 <= t0 <= t1, nt >= 1, nx >= 2");
    if (fx.against_run && fx.t1 > c.solver.t_end)
        throw ValidationError("analysis.verify.fixture: t1 lies beyond the run's t_end");
    return c;
}

ScenarioConfig resolve_config_file(const fs::path& path, const std::vector<std::string>& overrides)
{
    std::ifstream is(path);
    if (!is)
        throw ValidationError("config: cannot open " + path.string());
    nlohmann::json raw;
    try {
        raw = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config: " + path.string() + ": " + e.what());
    }
    return resolve_config(std::move(raw), overrides);
}

int execute(const std::string& command, const ScenarioConfig& cfg, const fs::path& dir, int jobs, std::ostream& out, std::ostream& err)
{
    try {
        fs::create_directories(dir);
        write_json(dir / "resolved_config.json", cfg.to_json());
        dispatch(command, cfg, dir, std::max(1, jobs), out, err);
        return 0;
    } catch (...) {
        std::string msg;
        const int status = exit_status(std::current_exception(), msg);
        err << "error: " << msg << "\n";
        std::error_code ec;
        if (fs::is_directory(dir, ec))
            write_json(dir / "error.json", {{"command", command}, {"status", status}, {"message", msg}});
        return status;
    }
}

namespace {

bool file_pass(const fs::path& p, std::string& what)
{
    std::ifstream is(p);
    const auto j = nlohmann::json::parse(is);
    what = p.filename().string();
    return j.value("pass", true);
}

} // namespace

int report(const fs::path& dir, std::ostream& out, std::ostream& err)
{
    try {
        if (!fs::is_regular_file(dir / "resolved_config.json")) {
            err << "error: " << dir.string() << " has no resolved_config.json; not an output directory\n";
            return 1;
        }
        nlohmann::json rows = nlohmann::json::array();
        bool all = true;
        auto scan = [&](const fs::path& d, const std::string& label) {
            if (fs::exists(d / "error.json")) {
                std::ifstream is(d / "error.json");
                const auto e = nlohmann::json::parse(is);
                rows.push_back({{"entry", label}, {"artifact", "error.json"}, {"pass", false}, {"message", e.value("message", "")}});
                all = false;
                return;
            }
            for (const char* name : {"verify.json", "rates.json"}) {
                if (!fs::exists(d / name))
                    continue;
                std::string what;
                const bool ok = file_pass(d / name, what);
                rows.push_back({{"entry", label}, {"artifact", what}, {"pass", ok}});
                all = all && ok;
            }
            if (fs::exists(d / "semiwave.json")) {
                std::ifstream is(d / "semiwave.json");
                const auto j = nlohmann::json::parse(is);
                rows.push_back({{"entry", label}, {"artifact", "semiwave.json"}, {"pass", true}, {"c0", j.at("c0")}});
            }
            if (fs::exists(d / "simulate.json") && !fs::exists(d / "rates.json")) {
                std::ifstream is(d / "simulate.json");
                const auto j = nlohmann::json::parse(is);
                rows.push_back({{"entry", label}, {"artifact", "simulate.json"}, {"pass", true}, {"outcome", j.at("outcome")}});
            }
        };
        scan(dir, ".");
        nlohmann::json result = {{"rows", nullptr}};
        if (fs::exists(dir / "summary.json")) {
            std::ifstream is(dir / "summary.json");
            const auto s = nlohmann::json::parse(is);
            std::vector<std::pair<double, double>> column;
            std::string metric;
            for (const auto& p : s.at("points")) {
                const fs::path sub = dir / p.at("dir").get<std::string>();
                if (!fs::is_regular_file(sub / "resolved_config.json")) {
                    err << "error: " << sub.string() << " has no resolved_config.json\n";
                    return 1;
                }
                scan(sub, p.at("dir").get<std::string>());
                if (!p.contains("result"))
                    continue;
                for (const char* m : {"c0", "c", "h_end", "exponent", "coefficient"})
                    if (p["result"].contains(m)) {
                        metric = m;
                        column.emplace_back(p.at("value").get<double>(), p["result"][m].get<double>());
                        break;
                    }
            }
            if (!metric.empty() && column.size() >= 2) {
                std::sort(column.begin(), column.end());
                bool inc = true;
                bool dec = true;
                nlohmann::json col = nlohmann::json::array();
                for (std::size_t i = 0; i < column.size(); ++i) {
                    col.push_back({column[i].first, column[i].second});
                    if (i > 0) {
                        inc = inc && column[i].second > column[i - 1].second;
                        dec = dec && column[i].second < column[i - 1].second;
                    }
                }
                result["sweep"] = {{"parameter", s.at("parameter")},
                                   {"metric", metric},
                                   {"column", col},
                                   {"increasing", inc},
                                   {"decreasing", dec}};
            }
        }
        result["rows"] = rows;
        result["pass"] = all;
        write_json(dir / "report.json", result);

        out << std::left << std::setw(14) << "entry" << std::setw(18) << "artifact" << "pass\n";
        for (const auto& r : rows)
            out << std::setw(14) << r["entry"].get<std::string>() << std::setw(18) << r["artifact"].get<std::string>()
                << (r["pass"].get<bool>() ? "PASS" : "FAIL") << "\n";
        if (result.contains("sweep")) {
            const auto& sw = result["sweep"];
            out << "\n" << sw["parameter"].get<std::string>() << "  " << sw["metric"].get<std::string>() << "\n";
            for (const auto& c : sw["column"])
                out << std::setw(14) << number_label(c[0].get<double>()) << number_label(c[1].get<double>()) << "\n";
            out << "monotone: " << (sw["increasing"].get<bool>() ? "increasing" : sw["decreasing"].get<bool>() ? "decreasing" : "no") << "\n";
        }
        out << "overall: " << (all ? "PASS" : "FAIL") << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace nlfb
