#pragma once

#include "d2oc/connectivity.hpp"
#include "d2oc/lti_dynamics.hpp"
#include "d2oc/protocol.hpp"
#include "d2oc/transport.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace d2oc {

enum class ModelKind { Integrator, DoubleIntegrator, Quadrotor, Matrices };

struct ModelSpec {
    ModelKind kind = ModelKind::Integrator;
    int dim = 2;                      // output dimension for the integrator families
    double a_max = 5.0;               // double integrator acceleration bound
    std::optional<AgentModel> matrices;  // ModelKind::Matrices
};

struct MapSpec {
    enum class Kind { Mixture, File } kind = Kind::Mixture;
    int clusters = 4;
    double extent = 30.0;  // cluster centers uniform in [-extent, extent]^d
    double spread = 3.0;   // per-axis standard deviation inside a cluster
    std::string path;
};

struct TopologySpec {
    TopologyKind kind = TopologyKind::Chain;
    std::vector<int> parents;
    std::vector<std::pair<int, int>> edges;
};

/// Everything a run needs. Defaults are the desk-scale scenario.
struct SimConfig {
    int n_agents = 5;
    int n_samples = 100;
    double T = 0.1;
    int horizon = 1;
    double r_comm = 15.0;
    double gamma = 0.8;
    double kappa = 750.0;
    double eta = 0.25;
    double d_min = 1.0;
    double v_max = 10.0;
    std::uint64_t seed = 1;
    int max_steps = 3000;
    double completion_threshold = 0.02;

    std::vector<ModelSpec> models{ModelSpec{}};  // one shared entry or one per agent
    MapSpec map;
    TopologySpec topology;
    bool connectivity_enabled = true;
    ExchangeMode exchange = ExchangeMode::RangeGated;

    int selection_size = 10;
    double weight_floor = 1e-4;
    std::optional<double> selection_length;  // defaults to r_comm / 2
    double r_cov = 2.0;
    double decay = 0.5;
    double rho = 0.1;
    bool collision_avoidance = true;
    double collision_kappa = 750.0;
    double collision_eta = 5.0;
    RadiusBound radius_bound = RadiusBound::MaxColumn;
    MarginMode margin_mode = MarginMode::ScaleRange;
    bool enforce_speed = true;  // integrator boxes chosen so ||step|| <= v_max T
    int max_age = 50;
    int swd_projections = 100;
    double jitter_radius = 1.0;

    std::string output_dir = "out";
};

/// Throws ConfigError on invalid values.
void validate(const SimConfig& config);

/// Relative model/map paths are resolved against base_dir.
SimConfig config_from_json(const nlohmann::json& doc, const std::string& base_dir = "");
nlohmann::json config_to_json(const SimConfig& config);
SimConfig load_config(const std::string& path);

/// Dense row-major matrices with explicit n, m, d; bounds optional with "inf"/"-inf" sentinels.
/// A document of the form {"kind": "quadrotor", "T": 0.1} is also accepted.
AgentModel model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const AgentModel& model);
AgentModel load_model(const std::string& path);

/// Builds the plant for one model spec.
AgentModel build_model(const ModelSpec& spec, const SimConfig& config);

/// Reference map from a JSON ({"samples": [[..]], "weights": [..]}) or CSV file.
ReferenceMap load_map(const std::string& path);

}  // namespace d2oc
