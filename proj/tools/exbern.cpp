// exbern: solve, analyze and verify exterior problems on annular grids.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acceptance.hpp"
#include "scenario.hpp"

namespace fs = std::filesystem;
using namespace exbern;
using cli::json;

namespace {

constexpr int exit_pass = 0;
constexpr int exit_fail = 1;
constexpr int exit_usage = 2;

struct Common {
    std::string grid;
    std::string windows;
    std::vector<std::string> tol;
    std::string out;
    std::string format = "json";
};

std::pair<std::string, double> split_tol(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorCode::config_error, "--tol expects key=value, got '" + kv + "'");
    try {
        return {kv.substr(0, eq), std::stod(kv.substr(eq + 1))};
    } catch (const std::exception&) {
        fail(ErrorCode::config_error, "--tol value is not a number: '" + kv + "'");
    }
}

void apply_common(cli::Scenario& s, const Common& c) {
    if (!c.grid.empty()) s.grid = cli::parse_grid_string(c.grid);
    if (!c.windows.empty()) s.windows = cli::parse_windows_string(c.windows);
    for (const auto& kv : c.tol) {
        const auto [k, v] = split_tol(kv);
        cli::apply_tolerance(s, k, v);
    }
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) fail(ErrorCode::config_error, "cannot write '" + p.string() + "'");
    os << text;
}

std::string fmt_value(const json& v) {
    if (v.is_number()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
        return buf;
    }
    if (v.is_array()) {
        std::string s = "[";
        for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt_value(v[k]);
        return s + "]";
    }
    return v.dump();
}

void print_summary(const json& rep) {
    std::cout << "scenario " << rep.value("scenario", "?") << "\n";
    if (rep.contains("solve"))
        std::cout << "  solve: " << rep["solve"].value("method", "") << " " << rep["solve"].value("status", "") << "\n";
    const auto& ex = rep["expansion"];
    std::cout << "  A = " << fmt_value(ex["A"]) << "  b = " << fmt_value(ex["b"]) << "  d = " << fmt_value(ex["d"])
              << "  c = " << fmt_value(ex["c"]) << "  e = " << fmt_value(ex["e"]) << "\n";
    for (const auto& a : rep.value("assertions", json::array())) {
        if (a.value("skipped", false)) {
            std::cout << "  SKIP " << a.value("metric", "") << "\n";
            continue;
        }
        std::cout << "  " << (a.value("passed", false) ? "PASS " : "FAIL ") << a.value("metric", "") << " = "
                  << fmt_value(a.value("value", json())) << "\n";
    }
}

void emit(const cli::RunOutput& r, const Common& c, const fs::path& dir) {
    if (!dir.empty()) {
        fs::create_directories(dir);
        write_file(dir / "report.json", r.report.dump(2) + "\n");
        write_file(dir / "profile.csv", r.profile_csv);
        write_file(dir / "decay.svg", r.decay_svg);
        if (r.field) {
            std::ofstream os(dir / "field.txt");
            write_snapshot(os, *r.field);
        }
    }
    if (c.format == "json") std::cout << r.report.dump(2) << "\n";
    else if (c.format == "csv") std::cout << r.profile_csv;
    else if (c.format == "svg") std::cout << r.decay_svg;
    else print_summary(r.report);
}

int run_solve(const std::vector<std::string>& configs, const Common& c, int jobs) {
    std::vector<cli::Scenario> scenarios;
    for (const auto& path : configs) {
        auto s = cli::load_scenario(path);
        apply_common(s, c);
        cli::validate(s);
        scenarios.push_back(std::move(s));
    }
    std::vector<std::string> names;
    for (const auto& s : scenarios) {
        if (std::find(names.begin(), names.end(), s.name) != names.end())
            fail(ErrorCode::config_error, "duplicate scenario name '" + s.name + "'");
        names.push_back(s.name);
    }
    // independent scenarios; outputs are collected and written in input order
    std::vector<cli::RunOutput> results(scenarios.size());
    std::vector<std::string> errors(scenarios.size());
    auto run_one = [&](std::size_t k) {
        try {
            results[k] = cli::run_scenario(scenarios[k]);
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    };
    const std::size_t width = static_cast<std::size_t>(std::max(1, jobs));
    for (std::size_t start = 0; start < scenarios.size(); start += width) {
        std::vector<std::future<void>> batch;
        for (std::size_t k = start; k < std::min(scenarios.size(), start + width); ++k)
            batch.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred, run_one, k));
        for (auto& f : batch) f.get();
    }
    bool ok = true;
    for (std::size_t k = 0; k < scenarios.size(); ++k) {
        if (!errors[k].empty()) {
            std::cerr << "scenario '" << scenarios[k].name << "': " << errors[k] << "\n";
            ok = false;
            continue;
        }
        fs::path dir;
        if (!c.out.empty()) dir = scenarios.size() == 1 ? fs::path(c.out) : fs::path(c.out) / scenarios[k].name;
        emit(results[k], c, dir);
        if (!results[k].passed) {
            std::cerr << "scenario '" << scenarios[k].name << "': assertion failure\n";
            ok = false;
        }
    }
    return ok ? exit_pass : exit_fail;
}

int run_analyze(const std::string& field_path, const std::string& config, const Common& c) {
    auto s = cli::load_scenario(config);
    apply_common(s, c);
    std::ifstream in(field_path);
    if (!in) fail(ErrorCode::config_error, "cannot open field file '" + field_path + "'");
    auto u = read_scalar_snapshot(in);
    auto r = cli::run_scenario(s, std::move(u));
    r.field.reset();  // the input is not copied into the run directory
    emit(r, c, c.out.empty() ? fs::path() : fs::path(c.out));
    return r.passed ? exit_pass : exit_fail;
}

std::vector<acceptance::Check> select_checks(const std::vector<std::string>& only) {
    auto all = acceptance::registry();
    if (only.empty()) return all;
    std::vector<acceptance::Check> out;
    for (const auto& c : all)
        for (const auto& o : only)
            if (o == c.name || o == std::to_string(c.id)) {
                out.push_back(c);
                break;
            }
    return out;
}

int run_verify(const std::vector<std::string>& only, const Common& c, bool list) {
    if (list) {
        for (const auto& ch : acceptance::registry()) std::cout << ch.id << "\t" << ch.name << "\n";
        return exit_pass;
    }
    auto tol = acceptance::default_tolerances();
    for (const auto& kv : c.tol) {
        const auto [k, v] = split_tol(kv);
        if (!tol.count(k)) fail(ErrorCode::config_error, "unknown acceptance tolerance '" + k + "'");
        tol[k] = v;
    }
    const auto checks = select_checks(only);
    if (checks.empty()) fail(ErrorCode::config_error, "no scenarios selected");
    const auto results = acceptance::run_checks(checks, tol);
    json rep = json::array();
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << ": " << r.summary << "\n";
        rep.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"summary", r.summary}, {"details", r.details}});
        ok = ok && r.passed;
    }
    const auto npass = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.passed; });
    std::cout << npass << "/" << results.size() << " checks passed\n";
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        write_file(fs::path(c.out) / "verify.json", json{{"checks", rep}, {"passed", ok}}.dump(2) + "\n");
    }
    return ok ? exit_pass : exit_fail;
}

int run_report(const std::string& dir, const Common& c) {
    const fs::path p = fs::path(dir) / "report.json";
    std::ifstream in(p);
    if (!in) fail(ErrorCode::config_error, "no report.json in '" + dir + "'");
    json rep;
    try {
        rep = json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::parse_error, "report.json is not valid JSON: " + std::string(e.what()));
    }
    if (c.format == "json") {
        std::cout << rep.dump(2) << "\n";
    } else if (c.format == "csv") {
        std::cout << "metric,value,passed\n";
        for (const auto& a : rep.value("assertions", json::array()))
            std::cout << a.value("metric", "") << ",\"" << fmt_value(a.value("value", json())) << "\","
                      << (a.value("passed", false) ? "true" : "false") << "\n";
    } else if (c.format == "svg") {
        std::ifstream svg(fs::path(dir) / "decay.svg");
        if (!svg) fail(ErrorCode::config_error, "no decay.svg in '" + dir + "'");
        std::cout << svg.rdbuf();
    } else {
        print_summary(rep);
    }
    return rep.value("passed", false) ? exit_pass : exit_fail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exterior solutions of fully nonlinear elliptic equations on annular grids"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub, bool field_flags) {
        if (field_flags) {
            sub->add_option("--grid", common.grid, "grid override: rin,rout,nr,nt[,spacing]");
            sub->add_option("--windows", common.windows, "window override: lo:hi,lo:hi,...");
        }
        sub->add_option("--tol", common.tol, "tolerance override key=value (repeatable)");
        sub->add_option("--out", common.out, "output directory");
        sub->add_option("--format", common.format, "stdout format")->check(CLI::IsMember({"json", "csv", "svg", "text"}));
    };

    std::vector<std::string> configs;
    int jobs = 1;
    auto* solve = app.add_subcommand("solve", "solve and analyze configured scenarios");
    solve->add_option("config", configs, "scenario config files")->required();
    solve->add_option("--jobs", jobs, "independent scenarios to run concurrently")->check(CLI::PositiveNumber);
    add_common(solve, true);

    std::string field_file, config;
    auto* analyze = app.add_subcommand("analyze", "analyze a stored field snapshot");
    analyze->add_option("field", field_file, "field snapshot")->required();
    analyze->add_option("config", config, "scenario config")->required();
    add_common(analyze, true);

    std::vector<std::string> only;
    bool list = false;
    auto* verify = app.add_subcommand("verify", "run the built-in acceptance checks");
    verify->add_option("--only", only, "check ids or names to run");
    verify->add_flag("--list", list, "list the checks and exit");
    add_common(verify, false);

    std::string run_dir;
    auto* report = app.add_subcommand("report", "summarize a run directory");
    report->add_option("run-dir", run_dir, "directory holding report.json")->required();
    report->add_option("--format", common.format, "output format")->check(CLI::IsMember({"json", "csv", "svg", "text"}));
    common.format = "json";

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_pass : exit_usage;
    }
    if (report->parsed() && report->count("--format") == 0) common.format = "text";

    try {
        if (solve->parsed()) return run_solve(configs, common, jobs);
        if (analyze->parsed()) return run_analyze(field_file, config, common);
        if (verify->parsed()) return run_verify(only, common, list);
        return run_report(run_dir, common);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const bool usage = e.code() == ErrorCode::config_error || e.code() == ErrorCode::parse_error;
        return usage ? exit_usage : exit_fail;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_fail;
    }
}
