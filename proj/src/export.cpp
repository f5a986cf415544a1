#include "d2oc/export.hpp"

#include "d2oc/error.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace d2oc {

using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    return out;
}

// Pads to three coordinates for the fixed x,y,z columns.
double coord(const Matrix& P, Eigen::Index row, Eigen::Index k) { return k < P.cols() ? P(row, k) : 0.0; }

}  // namespace

void export_run(const RunRecord& record, const SimConfig& config, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
    const fs::path base(dir);

    {
        auto out = open_out(base / "trajectories.csv");
        out << "step,agent_id,x,y,z\n";
        for (std::size_t s = 0; s < record.positions.size(); ++s)
            for (Eigen::Index a = 0; a < record.positions[s].rows(); ++a) {
                const Matrix& P = record.positions[s];
                out << s + 1 << ',' << a << ',' << num(coord(P, a, 0)) << ',' << num(coord(P, a, 1)) << ','
                    << num(coord(P, a, 2)) << '\n';
            }
    }
    {
        auto out = open_out(base / "links.csv");
        out << "step,i,j,distance\n";
        for (std::size_t s = 0; s < record.links.size(); ++s)
            for (const auto& l : record.links[s]) out << s + 1 << ',' << l.i << ',' << l.j << ',' << num(l.distance) << '\n';
    }
    {
        auto out = open_out(base / "map.csv");
        static const char* names[] = {"x", "y", "z"};
        for (Eigen::Index k = 0; k < record.map_samples.cols(); ++k) out << names[k] << ',';
        out << "weight\n";
        for (Eigen::Index j = 0; j < record.map_samples.rows(); ++j) {
            for (Eigen::Index k = 0; k < record.map_samples.cols(); ++k) out << num(record.map_samples(j, k)) << ',';
            out << num(record.map_weights(j)) << '\n';
        }
    }
    {
        json metrics;
        metrics["config"] = config_to_json(config);
        metrics["steps"] = record.steps;
        metrics["completed"] = record.steps_to_completion.has_value();
        metrics["steps_to_completion"] = record.steps_to_completion ? json(*record.steps_to_completion) : json(nullptr);
        metrics["final_swd"] = record.final_swd ? json(*record.final_swd) : json(nullptr);
        metrics["swd_seed"] = record.swd_seed;
        metrics["swd_projections"] = record.swd_projections;
        metrics["initial_mass"] = record.initial_mass;
        metrics["residual_mass"] = record.residual_mass;
        metrics["max_designated_distance"] = record.max_designated_distance;
        metrics["solver_warnings"] = record.solver_warnings;
        metrics["warnings"] = record.warnings;
        auto out = open_out(base / "metrics.json");
        out << metrics.dump(2) << '\n';
    }
    {
        // One block per agent, separated by two blank lines so gnuplot's `index` selects an agent.
        auto out = open_out(base / "trajectories.dat");
        for (int a = 0; a < record.n_agents; ++a) {
            out << "# agent " << a << "\n";
            if (record.initial_positions.rows() > a) {
                const Matrix& P = record.initial_positions;
                out << num(coord(P, a, 0)) << ' ' << num(coord(P, a, 1)) << ' ' << num(coord(P, a, 2)) << '\n';
            }
            for (const auto& P : record.positions)
                out << num(coord(P, a, 0)) << ' ' << num(coord(P, a, 1)) << ' ' << num(coord(P, a, 2)) << '\n';
            out << "\n\n";
        }
    }
    {
        auto out = open_out(base / "distances.dat");
        out << "# step max_designated_distance residual_mass\n";
        for (std::size_t s = 0; s < record.max_designated_distance.size(); ++s)
            out << s + 1 << ' ' << num(record.max_designated_distance[s]) << ' ' << num(record.residual_mass[s]) << '\n';
    }
    {
        auto out = open_out(base / "plot.gp");
        out << "set terminal pngcairo size 1200,500\n"
               "set output 'run.png'\n"
               "set multiplot layout 1,2\n"
               "set title 'trajectories'\n"
               "set size ratio -1\n"
               "set datafile separator ','\n"
               "plot 'map.csv' every ::1 using 1:2 with points pt 7 ps 0.4 lc rgb 'forest-green' title 'samples', \\\n"
               "     for [a=0:"
            << record.n_agents - 1
            << "] 'trajectories.dat' index a using 1:2 with lines notitle datafile separator whitespace\n"
               "set datafile separator whitespace\n"
               "set size noratio\n"
               "set title 'designated-pair distance'\n"
               "set xlabel 'step'\n"
               "plot 'distances.dat' using 1:2 with lines title 'max distance', "
            << num(config.r_comm) << " dt 2 lc rgb 'red' title 'r_comm', " << num(config.d_min)
            << " dt 2 lc rgb 'black' title 'd_min'\n"
               "unset multiplot\n";
    }
}

std::vector<Matrix> read_trajectories(const std::string& path, int dim) {
    if (dim < 1 || dim > 3) throw Error(ErrorCode::DimensionMismatch, "trajectory dimension must be 1 to 3");
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("step,agent_id", 0) != 0)
        throw Error(ErrorCode::IoError, path + " is not a trajectories file");

    std::map<long, std::map<long, Vector>> by_step;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        if (cols.size() != 5) throw Error(ErrorCode::IoError, "malformed trajectory row: " + line);
        try {
            Vector p(dim);
            for (int k = 0; k < dim; ++k) p(k) = std::stod(cols[2 + k]);
            by_step[std::stol(cols[0])][std::stol(cols[1])] = p;
        } catch (const std::exception&) {
            throw Error(ErrorCode::IoError, "malformed trajectory row: " + line);
        }
    }
    std::vector<Matrix> steps;
    for (const auto& [s, agents] : by_step) {
        Matrix P(static_cast<Eigen::Index>(agents.size()), dim);
        Eigen::Index row = 0;
        for (const auto& [a, p] : agents) P.row(row++) = p.transpose();
        steps.push_back(std::move(P));
    }
    return steps;
}

}  // namespace d2oc
