#include "cli.hpp"

#include "d2oc/config.hpp"
#include "d2oc/error.hpp"
#include "d2oc/export.hpp"
#include "d2oc/lti_dynamics.hpp"
#include "d2oc/simulation.hpp"
#include "d2oc/transport.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>

namespace d2oc::cli {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::ConfigError:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::EmptyMap:
        case ErrorCode::LengthMismatch:
        case ErrorCode::NoRelativeDegree: return kConfig;
        default: return kRuntime;
    }
}

int cmd_run(const std::string& config_path, bool no_connectivity, std::optional<std::uint64_t> seed,
            std::optional<std::string> out_dir, std::ostream& out) {
    SimConfig config = load_config(config_path);
    if (no_connectivity) config.connectivity_enabled = false;
    if (seed) config.seed = *seed;
    if (out_dir) config.output_dir = *out_dir;
    else if (const char* env = std::getenv("D2OC_OUT_DIR"); env && *env) config.output_dir = env;

    const RunRecord record = run(config);
    export_run(record, config, config.output_dir);
    out << "steps=" << record.steps << '\n';
    out << "completed=" << (record.steps_to_completion ? "yes" : "no") << '\n';
    if (record.steps_to_completion) out << "steps_to_completion=" << *record.steps_to_completion << '\n';
    out << "final_swd=" << (record.final_swd ? num(*record.final_swd) : std::string("none")) << '\n';
    out << "solver_warnings=" << record.solver_warnings << '\n';
    out << "output=" << config.output_dir << '\n';
    return kOk;
}

int cmd_metrics(const std::string& traj, const std::string& map_path, std::optional<std::uint64_t> seed,
                std::optional<int> projections, const std::string& metrics_path, std::ostream& out) {
    if (!metrics_path.empty()) {
        std::ifstream in(metrics_path);
        if (!in) throw Error(ErrorCode::IoError, "cannot open " + metrics_path);
        const auto doc = nlohmann::json::parse(in, nullptr, false);
        if (doc.is_discarded()) throw Error(ErrorCode::ConfigError, "cannot parse " + metrics_path);
        if (!seed) seed = doc.at("swd_seed").get<std::uint64_t>();
        if (!projections) projections = doc.at("swd_projections").get<int>();
    }
    if (!seed) throw Error(ErrorCode::ConfigError, "metrics needs --seed or --metrics");
    const ReferenceMap map = load_map(map_path);
    const auto steps = read_trajectories(traj, map.dim());
    if (steps.empty()) throw Error(ErrorCode::EmptySet, "trajectory file has no rows");
    Eigen::Index rows = 0;
    for (const auto& P : steps) rows += P.rows();
    Matrix points(rows, map.dim());
    Eigen::Index at = 0;
    for (const auto& P : steps) {
        points.middleRows(at, P.rows()) = P;
        at += P.rows();
    }
    const double swd = sliced_wasserstein(points, map.samples(), projections.value_or(100), *seed);
    out << "points=" << rows << '\n';
    out << "swd=" << num(swd) << '\n';
    return kOk;
}

int cmd_check_model(const std::string& path, int r_max, std::ostream& out) {
    const AgentModel model = load_model(path);
    const ModelDiagnostics diag = diagnose(model, r_max);
    out << "n=" << diag.n << " m=" << diag.m << " d=" << diag.d << '\n';
    if (diag.rel_degree > 0) out << "r=" << diag.rel_degree << '\n';
    else out << "r=none (no output response within " << r_max << " steps)\n";
    out << "controllability_rank=" << diag.controllability_rank << '\n';
    out << "controllable=" << (diag.controllable ? "yes" : "no") << '\n';
    out << "spectral_radius=" << num(diag.spectral_radius) << '\n';
    out << "marginally_stable=" << (diag.marginally_stable ? "yes" : "no")
        << " (eigenvalue moduli only)\n";
    out << "input_bounds=" << (model.bounded() ? "finite" : "unbounded") << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Connectivity-preserving density-driven coverage simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    bool no_connectivity = false;
    std::uint64_t seed = 0;
    auto* run_cmd = app.add_subcommand("run", "Run a coverage simulation and export the results");
    run_cmd->add_option("--config", config_path, "JSON config file")->required();
    run_cmd->add_flag("--no-connectivity", no_connectivity, "Disable the connectivity penalty");
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Override the config seed");
    auto* out_opt = run_cmd->add_option("--out", out_dir, "Output directory");

    std::string traj_path, map_path, metrics_path;
    std::uint64_t metrics_seed = 0;
    int projections = 100;
    auto* metrics_cmd = app.add_subcommand("metrics", "Recompute the sliced Wasserstein distance offline");
    metrics_cmd->add_option("--traj", traj_path, "trajectories.csv from a run")->required();
    metrics_cmd->add_option("--map", map_path, "Reference map (CSV or JSON)")->required();
    auto* metrics_seed_opt = metrics_cmd->add_option("--seed", metrics_seed, "Projection seed");
    auto* proj_opt = metrics_cmd->add_option("--projections", projections, "Number of projections");
    metrics_cmd->add_option("--metrics", metrics_path, "metrics.json supplying seed and projection count");

    std::string model_path;
    int r_max = 10;
    auto* check_cmd = app.add_subcommand("check-model", "Report relative degree, controllability and stability");
    check_cmd->add_option("--model", model_path, "Model JSON file")->required();
    check_cmd->add_option("--r-max", r_max, "Largest relative degree to search")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(reversed.begin(), reversed.end());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kOk;
        }
        err << "error: " << e.what() << "\n" << app.help();
        return kUsage;
    }

    try {
        if (*run_cmd)
            return cmd_run(config_path, no_connectivity,
                           *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt,
                           *out_opt ? std::optional<std::string>(out_dir) : std::nullopt, out);
        if (*metrics_cmd)
            return cmd_metrics(traj_path, map_path,
                               *metrics_seed_opt ? std::optional<std::uint64_t>(metrics_seed) : std::nullopt,
                               *proj_opt ? std::optional<int>(projections) : std::nullopt, metrics_path, out);
        if (*check_cmd) return cmd_check_model(model_path, r_max, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}

}  // namespace d2oc::cli
