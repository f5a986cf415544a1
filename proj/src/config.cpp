#include "d2oc/config.hpp"

#include "d2oc/error.hpp"
#include "d2oc/quadrotor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace d2oc {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

void reject_unknown_keys(const json& doc, const std::set<std::string>& known, const std::string& where) {
    for (const auto& item : doc.items())
        if (!known.count(item.key())) config_error("unknown key '" + item.key() + "' in " + where);
}

double bound_value(const json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    config_error("bounds must be numbers or the strings \"inf\" / \"-inf\"");
}

json bound_json(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    return v;
}

Matrix read_matrix(const json& doc, const char* key, int rows, int cols) {
    if (!doc.contains(key)) config_error(std::string("model is missing '") + key + "'");
    const auto& arr = doc.at(key);
    std::vector<double> flat;
    if (arr.is_array() && !arr.empty() && arr.front().is_array()) {
        for (const auto& row : arr)
            for (const auto& v : row) flat.push_back(v.get<double>());
    } else {
        flat = arr.get<std::vector<double>>();
    }
    if (static_cast<int>(flat.size()) != rows * cols)
        config_error(std::string("matrix '") + key + "' needs " + std::to_string(rows * cols) + " entries");
    Matrix M(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) M(r, c) = flat[static_cast<std::size_t>(r) * cols + c];
    return M;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool parse_double(const std::string& token, double& out) {
    std::istringstream in(token);
    in >> out;
    return !in.fail() && in.eof();
}

std::string resolve(const std::string& path, const std::string& base_dir) {
    if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (std::filesystem::path(base_dir) / path).string();
}

ModelSpec model_spec_from_json(const json& doc, const std::string& base_dir) {
    ModelSpec spec;
    if (doc.contains("file")) {
        spec.kind = ModelKind::Matrices;
        spec.matrices = load_model(resolve(doc.at("file").get<std::string>(), base_dir));
        return spec;
    }
    const auto kind = doc.value("kind", std::string("integrator"));
    if (kind == "integrator") {
        reject_unknown_keys(doc, {"kind", "dim"}, "model");
        spec.kind = ModelKind::Integrator;
        spec.dim = doc.value("dim", 2);
    } else if (kind == "double_integrator") {
        reject_unknown_keys(doc, {"kind", "dim", "a_max"}, "model");
        spec.kind = ModelKind::DoubleIntegrator;
        spec.dim = doc.value("dim", 2);
        spec.a_max = doc.value("a_max", 5.0);
    } else if (kind == "quadrotor") {
        reject_unknown_keys(doc, {"kind"}, "model");
        spec.kind = ModelKind::Quadrotor;
        spec.dim = 3;
    } else if (kind == "matrices") {
        spec.kind = ModelKind::Matrices;
        spec.matrices = model_from_json(doc);
    } else {
        config_error("unknown model kind '" + kind + "'");
    }
    if (spec.dim < 1 || spec.dim > 3) config_error("model dimension must be 1, 2 or 3");
    return spec;
}

json model_spec_to_json(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::Integrator: return {{"kind", "integrator"}, {"dim", spec.dim}};
        case ModelKind::DoubleIntegrator:
            return {{"kind", "double_integrator"}, {"dim", spec.dim}, {"a_max", spec.a_max}};
        case ModelKind::Quadrotor: return {{"kind", "quadrotor"}};
        case ModelKind::Matrices: {
            json out = model_to_json(*spec.matrices);
            out["kind"] = "matrices";
            return out;
        }
    }
    return {};
}

}  // namespace

void validate(const SimConfig& c) {
    if (c.n_agents < 1) config_error("n_agents must be positive");
    if (c.map.kind == MapSpec::Kind::Mixture && (c.n_samples < 1 || c.map.clusters < 1))
        config_error("n_samples and clusters must be positive");
    if (!(c.T > 0.0) || c.horizon < 1) config_error("T and horizon must be positive");
    if (!(c.r_comm > 0.0) || !(c.kappa >= 0.0) || !(c.eta > 0.0) || !(c.d_min >= 0.0) || !(c.v_max > 0.0))
        config_error("r_comm, eta, v_max must be positive; kappa and d_min non-negative");
    if (!(c.gamma > 0.0 && c.gamma <= 1.0)) config_error("gamma must lie in (0, 1]");
    if (c.max_steps < 0) config_error("max_steps must be non-negative");
    if (!(c.completion_threshold > 0.0 && c.completion_threshold < 1.0))
        config_error("completion_threshold must lie in (0, 1)");
    if (c.models.empty() || (c.models.size() != 1 && static_cast<int>(c.models.size()) != c.n_agents))
        config_error("give one shared model or one model per agent");
    if (c.selection_size < 1 || !(c.weight_floor >= 0.0)) config_error("invalid selection parameters");
    if (c.selection_length && !(*c.selection_length > 0.0)) config_error("selection length scale must be positive");
    if (!(c.r_cov > 0.0) || !(c.decay > 0.0 && c.decay <= 1.0)) config_error("invalid coverage parameters");
    if (!(c.rho > 0.0)) config_error("rho must be positive so that R is positive definite");
    if (!(c.collision_kappa >= 0.0) || !(c.collision_eta > 0.0)) config_error("invalid collision penalty");
    if (c.max_age < 0 || c.swd_projections < 1 || !(c.jitter_radius >= 0.0)) config_error("invalid run parameters");
    if (c.map.kind == MapSpec::Kind::File && c.map.path.empty()) config_error("map file path is empty");
}

SimConfig config_from_json(const json& doc, const std::string& base_dir) {
    if (!doc.is_object()) config_error("config must be a JSON object");
    reject_unknown_keys(doc,
                        {"n_agents", "n_samples", "T", "horizon", "r_comm", "gamma", "kappa", "eta", "d_min",
                         "v_max", "seed", "max_steps", "completion_threshold", "model", "models", "map",
                         "topology", "connectivity_enabled", "exchange", "selection", "coverage", "rho",
                         "collision", "radius_bound", "margin_mode", "enforce_speed", "max_age",
                         "swd_projections", "jitter_radius", "output_dir"},
                        "config");
    SimConfig c;
    try {
        c.n_agents = doc.value("n_agents", c.n_agents);
        c.n_samples = doc.value("n_samples", c.n_samples);
        c.T = doc.value("T", c.T);
        c.horizon = doc.value("horizon", c.horizon);
        c.r_comm = doc.value("r_comm", c.r_comm);
        c.gamma = doc.value("gamma", c.gamma);
        c.kappa = doc.value("kappa", c.kappa);
        c.eta = doc.value("eta", c.eta);
        c.d_min = doc.value("d_min", c.d_min);
        c.v_max = doc.value("v_max", c.v_max);
        c.seed = doc.value("seed", c.seed);
        c.max_steps = doc.value("max_steps", c.max_steps);
        c.completion_threshold = doc.value("completion_threshold", c.completion_threshold);
        c.connectivity_enabled = doc.value("connectivity_enabled", c.connectivity_enabled);
        c.rho = doc.value("rho", c.rho);
        c.enforce_speed = doc.value("enforce_speed", c.enforce_speed);
        c.max_age = doc.value("max_age", c.max_age);
        c.swd_projections = doc.value("swd_projections", c.swd_projections);
        c.jitter_radius = doc.value("jitter_radius", c.jitter_radius);
        c.output_dir = doc.value("output_dir", c.output_dir);

        if (doc.contains("model") && doc.contains("models")) config_error("give either 'model' or 'models'");
        if (doc.contains("model")) c.models = {model_spec_from_json(doc.at("model"), base_dir)};
        if (doc.contains("models")) {
            c.models.clear();
            for (const auto& m : doc.at("models")) c.models.push_back(model_spec_from_json(m, base_dir));
        }

        if (doc.contains("map")) {
            const auto& m = doc.at("map");
            if (m.contains("file")) {
                reject_unknown_keys(m, {"file"}, "map");
                c.map.kind = MapSpec::Kind::File;
                c.map.path = resolve(m.at("file").get<std::string>(), base_dir);
            } else {
                reject_unknown_keys(m, {"kind", "clusters", "extent", "spread"}, "map");
                if (m.value("kind", std::string("mixture")) != "mixture") config_error("map kind must be 'mixture'");
                c.map.clusters = m.value("clusters", c.map.clusters);
                c.map.extent = m.value("extent", c.map.extent);
                c.map.spread = m.value("spread", c.map.spread);
            }
        }

        if (doc.contains("topology")) {
            const auto& t = doc.at("topology");
            const std::string kind = t.is_string() ? t.get<std::string>() : t.value("kind", std::string("chain"));
            if (kind == "chain") {
                c.topology.kind = TopologyKind::Chain;
            } else if (kind == "tree") {
                c.topology.kind = TopologyKind::Tree;
                c.topology.parents = t.at("parents").get<std::vector<int>>();
            } else if (kind == "edges") {
                c.topology.kind = TopologyKind::EdgeList;
                for (const auto& e : t.at("edges")) c.topology.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
            } else {
                config_error("topology must be 'chain', 'tree' or 'edges'");
            }
        }

        if (doc.contains("exchange")) {
            const auto mode = doc.at("exchange").get<std::string>();
            if (mode == "range-gated") c.exchange = ExchangeMode::RangeGated;
            else if (mode == "topology-only") c.exchange = ExchangeMode::TopologyOnly;
            else config_error("exchange must be 'range-gated' or 'topology-only'");
        }
        if (doc.contains("selection")) {
            const auto& s = doc.at("selection");
            reject_unknown_keys(s, {"K", "w_floor", "length_scale"}, "selection");
            c.selection_size = s.value("K", c.selection_size);
            c.weight_floor = s.value("w_floor", c.weight_floor);
            if (s.contains("length_scale")) c.selection_length = s.at("length_scale").get<double>();
        }
        if (doc.contains("coverage")) {
            const auto& s = doc.at("coverage");
            reject_unknown_keys(s, {"r_cov", "decay"}, "coverage");
            c.r_cov = s.value("r_cov", c.r_cov);
            c.decay = s.value("decay", c.decay);
        }
        if (doc.contains("collision")) {
            const auto& s = doc.at("collision");
            reject_unknown_keys(s, {"enabled", "kappa", "eta"}, "collision");
            c.collision_avoidance = s.value("enabled", c.collision_avoidance);
            c.collision_kappa = s.value("kappa", c.collision_kappa);
            c.collision_eta = s.value("eta", c.collision_eta);
        }
        if (doc.contains("radius_bound")) {
            const auto v = doc.at("radius_bound").get<std::string>();
            if (v == "max-column") c.radius_bound = RadiusBound::MaxColumn;
            else if (v == "sum-columns") c.radius_bound = RadiusBound::SumColumns;
            else config_error("radius_bound must be 'max-column' or 'sum-columns'");
        }
        if (doc.contains("margin_mode")) {
            const auto v = doc.at("margin_mode").get<std::string>();
            if (v == "scale-range") c.margin_mode = MarginMode::ScaleRange;
            else if (v == "scale-threshold") c.margin_mode = MarginMode::ScaleThreshold;
            else if (v == "none") c.margin_mode = MarginMode::None;
            else config_error("margin_mode must be 'scale-range', 'scale-threshold' or 'none'");
        }
    } catch (const json::exception& e) {
        config_error(std::string("malformed config: ") + e.what());
    }
    validate(c);
    return c;
}

json config_to_json(const SimConfig& c) {
    json doc;
    doc["n_agents"] = c.n_agents;
    doc["n_samples"] = c.n_samples;
    doc["T"] = c.T;
    doc["horizon"] = c.horizon;
    doc["r_comm"] = c.r_comm;
    doc["gamma"] = c.gamma;
    doc["kappa"] = c.kappa;
    doc["eta"] = c.eta;
    doc["d_min"] = c.d_min;
    doc["v_max"] = c.v_max;
    doc["seed"] = c.seed;
    doc["max_steps"] = c.max_steps;
    doc["completion_threshold"] = c.completion_threshold;
    if (c.models.size() == 1) {
        doc["model"] = model_spec_to_json(c.models.front());
    } else {
        doc["models"] = json::array();
        for (const auto& m : c.models) doc["models"].push_back(model_spec_to_json(m));
    }
    if (c.map.kind == MapSpec::Kind::File) doc["map"] = {{"file", c.map.path}};
    else doc["map"] = {{"kind", "mixture"}, {"clusters", c.map.clusters}, {"extent", c.map.extent}, {"spread", c.map.spread}};
    switch (c.topology.kind) {
        case TopologyKind::Chain: doc["topology"] = "chain"; break;
        case TopologyKind::Tree: doc["topology"] = {{"kind", "tree"}, {"parents", c.topology.parents}}; break;
        case TopologyKind::EdgeList: {
            json edges = json::array();
            for (auto [a, b] : c.topology.edges) edges.push_back({a, b});
            doc["topology"] = {{"kind", "edges"}, {"edges", edges}};
            break;
        }
    }
    doc["connectivity_enabled"] = c.connectivity_enabled;
    doc["exchange"] = c.exchange == ExchangeMode::RangeGated ? "range-gated" : "topology-only";
    doc["selection"] = {{"K", c.selection_size}, {"w_floor", c.weight_floor},
                        {"length_scale", c.selection_length.value_or(0.5 * c.r_comm)}};
    doc["coverage"] = {{"r_cov", c.r_cov}, {"decay", c.decay}};
    doc["rho"] = c.rho;
    doc["collision"] = {{"enabled", c.collision_avoidance}, {"kappa", c.collision_kappa}, {"eta", c.collision_eta}};
    doc["radius_bound"] = c.radius_bound == RadiusBound::MaxColumn ? "max-column" : "sum-columns";
    doc["margin_mode"] = c.margin_mode == MarginMode::ScaleRange       ? "scale-range"
                         : c.margin_mode == MarginMode::ScaleThreshold ? "scale-threshold"
                                                                       : "none";
    doc["enforce_speed"] = c.enforce_speed;
    doc["max_age"] = c.max_age;
    doc["swd_projections"] = c.swd_projections;
    doc["jitter_radius"] = c.jitter_radius;
    doc["output_dir"] = c.output_dir;
    return doc;
}

SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        config_error("cannot parse " + path + ": " + e.what());
    }
    return config_from_json(doc, std::filesystem::path(path).parent_path().string());
}

AgentModel model_from_json(const json& doc) {
    try {
        if (doc.value("kind", std::string("matrices")) == "quadrotor") return build_quadrotor_model(doc.value("T", 0.1));
        const int n = doc.at("n").get<int>();
        const int m = doc.at("m").get<int>();
        const int d = doc.at("d").get<int>();
        if (n < 1 || m < 1 || d < 1) config_error("model dimensions must be positive");
        Matrix A = read_matrix(doc, "A", n, n);
        Matrix B = read_matrix(doc, "B", n, m);
        Matrix C = read_matrix(doc, "C", d, n);
        Vector lo = Vector::Constant(m, -kInf), hi = Vector::Constant(m, kInf);
        for (auto [key, vec] : {std::pair{"u_min", &lo}, std::pair{"u_max", &hi}}) {
            if (!doc.contains(key)) continue;
            const auto& v = doc.at(key);
            if (v.is_array()) {
                if (static_cast<int>(v.size()) != m) config_error(std::string(key) + " needs m entries");
                for (int i = 0; i < m; ++i) (*vec)(i) = bound_value(v.at(i));
            } else {
                vec->setConstant(bound_value(v));
            }
        }
        try {
            return AgentModel(A, B, C, lo, hi);
        } catch (const Error& e) {
            config_error(e.what());
        }
    } catch (const json::exception& e) {
        config_error(std::string("malformed model: ") + e.what());
    }
}

json model_to_json(const AgentModel& model) {
    auto flat = [](const Matrix& M) {
        std::vector<double> v;
        for (Eigen::Index r = 0; r < M.rows(); ++r)
            for (Eigen::Index c = 0; c < M.cols(); ++c) v.push_back(M(r, c));
        return v;
    };
    json lo = json::array(), hi = json::array();
    for (int i = 0; i < model.m(); ++i) {
        lo.push_back(bound_json(model.u_min()(i)));
        hi.push_back(bound_json(model.u_max()(i)));
    }
    return {{"n", model.n()}, {"m", model.m()}, {"d", model.d()}, {"A", flat(model.A())}, {"B", flat(model.B())},
            {"C", flat(model.C())}, {"u_min", lo}, {"u_max", hi}};
}

AgentModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open model " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        config_error("cannot parse " + path + ": " + e.what());
    }
    return model_from_json(doc);
}

AgentModel build_model(const ModelSpec& spec, const SimConfig& config) {
    const double T = config.T;
    switch (spec.kind) {
        case ModelKind::Integrator: {
            const int d = spec.dim;
            // Per-axis box sized so the step length never exceeds v_max T.
            const double vmax = config.enforce_speed ? config.v_max / std::sqrt(static_cast<double>(d)) : config.v_max;
            return AgentModel(Matrix::Identity(d, d), T * Matrix::Identity(d, d), Matrix::Identity(d, d),
                              Vector::Constant(d, -vmax), Vector::Constant(d, vmax));
        }
        case ModelKind::DoubleIntegrator: {
            const int d = spec.dim;
            Matrix A = Matrix::Identity(2 * d, 2 * d);
            A.topRightCorner(d, d) = T * Matrix::Identity(d, d);
            Matrix B = Matrix::Zero(2 * d, d);
            B.bottomRows(d) = T * Matrix::Identity(d, d);
            Matrix C = Matrix::Zero(d, 2 * d);
            C.leftCols(d).setIdentity();
            return AgentModel(A, B, C, Vector::Constant(d, -spec.a_max), Vector::Constant(d, spec.a_max));
        }
        case ModelKind::Quadrotor: return build_quadrotor_model(T);
        case ModelKind::Matrices:
            if (!spec.matrices) config_error("matrix model has no matrices");
            return *spec.matrices;
    }
    config_error("unknown model kind");
}

ReferenceMap load_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open map " + path);
    const auto ext = lower(std::filesystem::path(path).extension().string());
    if (ext == ".json") {
        try {
            const json doc = json::parse(in);
            const auto pts = doc.at("samples").get<std::vector<std::vector<double>>>();
            if (pts.empty()) throw Error(ErrorCode::EmptyMap, "map file has no samples");
            Matrix S(pts.size(), pts.front().size());
            for (std::size_t r = 0; r < pts.size(); ++r) {
                if (pts[r].size() != pts.front().size()) config_error("map rows differ in dimension");
                for (std::size_t c = 0; c < pts[r].size(); ++c) S(r, c) = pts[r][c];
            }
            if (doc.contains("weights")) {
                const auto w = doc.at("weights").get<std::vector<double>>();
                return ReferenceMap(S, Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())));
            }
            return ReferenceMap(S);
        } catch (const json::exception& e) {
            config_error("malformed map " + path + ": " + e.what());
        }
    }

    std::vector<std::vector<double>> rows;
    std::vector<std::string> header;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> tokens;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) tokens.push_back(trim(tok));
        std::vector<double> values(tokens.size());
        bool numeric = true;
        for (std::size_t i = 0; i < tokens.size(); ++i) numeric = numeric && parse_double(tokens[i], values[i]);
        if (first && !numeric) {
            for (auto& t : tokens) header.push_back(lower(t));
            first = false;
            continue;
        }
        first = false;
        if (!numeric) config_error("non-numeric row in map " + path + ": " + line);
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw Error(ErrorCode::EmptyMap, "map " + path + " has no samples");
    const std::size_t cols = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != cols) config_error("map rows differ in length");

    int weight_col = -1;
    if (!header.empty()) {
        if (header.size() != cols) config_error("map header does not match row length");
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == "weight" || header[i] == "w") weight_col = static_cast<int>(i);
    } else if (cols == 4) {
        weight_col = 3;
    }
    const int dim = static_cast<int>(cols) - (weight_col >= 0 ? 1 : 0);
    if (dim < 1 || dim > 3) config_error("map points must have 1 to 3 coordinates");
    Matrix S(rows.size(), dim);
    Vector w = Vector::Ones(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        int c_out = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (static_cast<int>(c) == weight_col) w(r) = rows[r][c];
            else S(r, c_out++) = rows[r][c];
        }
    }
    return ReferenceMap(S, w);
}

}  // namespace d2oc
