#include "d2oc/simulation.hpp"

#include "d2oc/error.hpp"

#include <algorithm>
#include <cmath>

namespace d2oc {

namespace {

constexpr std::size_t kMaxStoredWarnings = 20;

double collective_mass(const std::vector<Agent>& agents) {
    Vector known = agents.front().ledger.residual;
    for (const auto& a : agents) known = known.cwiseMin(a.ledger.residual);
    return known.sum();
}

Matrix current_positions(const std::vector<Agent>& agents, int dim) {
    Matrix P(static_cast<Eigen::Index>(agents.size()), dim);
    for (std::size_t i = 0; i < agents.size(); ++i) P.row(static_cast<Eigen::Index>(i)) = agents[i].position().transpose();
    return P;
}

}  // namespace

Matrix RunRecord::trajectory_points() const {
    Matrix pts(static_cast<Eigen::Index>(positions.size()) * n_agents, dim);
    for (std::size_t s = 0; s < positions.size(); ++s)
        pts.middleRows(static_cast<Eigen::Index>(s) * n_agents, n_agents) = positions[s];
    return pts;
}

ReferenceMap generate_mixture_map(int n_samples, int dim, int clusters, double extent, double spread,
                                  std::mt19937_64& rng) {
    if (n_samples < 1 || dim < 1 || clusters < 1) throw Error(ErrorCode::ConfigError, "invalid mixture map");
    std::uniform_real_distribution<double> uniform(-extent, extent);
    std::normal_distribution<double> normal(0.0, spread);
    Matrix centers(clusters, dim);
    for (int c = 0; c < clusters; ++c)
        for (int k = 0; k < dim; ++k) centers(c, k) = uniform(rng);
    Matrix samples(n_samples, dim);
    for (int j = 0; j < n_samples; ++j) {
        const int c = j % clusters;
        for (int k = 0; k < dim; ++k) samples(j, k) = centers(c, k) + normal(rng);
    }
    return ReferenceMap(samples);
}

Topology make_topology(const SimConfig& config) {
    switch (config.topology.kind) {
        case TopologyKind::Chain: return Topology::chain(config.n_agents);
        case TopologyKind::Tree:
            if (static_cast<int>(config.topology.parents.size()) != config.n_agents)
                throw Error(ErrorCode::ConfigError, "tree topology needs one parent entry per agent");
            return Topology::tree(config.topology.parents);
        case TopologyKind::EdgeList: return Topology::from_edges(config.n_agents, config.topology.edges);
    }
    throw Error(ErrorCode::ConfigError, "unknown topology");
}

CycleConfig make_cycle_config(const SimConfig& config) {
    CycleConfig cycle;
    cycle.selection.max_samples = config.selection_size;
    cycle.selection.weight_floor = config.weight_floor;
    cycle.selection.length_scale = config.selection_length.value_or(0.5 * config.r_comm);
    cycle.rho = config.rho;
    cycle.connectivity = config.connectivity_enabled;
    cycle.collision_avoidance = config.connectivity_enabled && config.collision_avoidance;
    cycle.penalty.kappa = config.kappa;
    cycle.penalty.eta = config.eta;
    cycle.penalty.r_comm = config.r_comm;
    cycle.penalty.gamma = config.gamma;
    cycle.penalty.d_min = config.d_min;
    cycle.penalty.collision_kappa = config.collision_kappa;
    cycle.penalty.collision_eta = config.collision_eta;
    cycle.penalty.radius_bound = config.radius_bound;
    cycle.penalty.margin_mode = config.margin_mode;
    cycle.r_cov = config.r_cov;
    cycle.decay = config.decay;
    cycle.max_age = config.max_age;
    return cycle;
}

std::vector<Agent> make_agents(const SimConfig& config, const ReferenceMap& map, std::mt19937_64& rng) {
    std::vector<std::shared_ptr<const AgentModel>> models;
    for (const auto& spec : config.models) models.push_back(std::make_shared<const AgentModel>(build_model(spec, config)));

    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Agent> agents(config.n_agents);
    for (int i = 0; i < config.n_agents; ++i) {
        Agent& agent = agents[i];
        agent.id = i;
        agent.model = models.size() == 1 ? models.front() : models[i];
        const AgentModel& model = *agent.model;
        if (model.d() != map.dim())
            throw Error(ErrorCode::ConfigError, "agent " + std::to_string(i) + " outputs " + std::to_string(model.d()) +
                                                    "D positions but the map is " + std::to_string(map.dim()) + "D");
        const ModelDiagnostics diag = diagnose(model);
        if (!diag.controllable) throw Error(ErrorCode::ConfigError, "agent " + std::to_string(i) + " model is not controllable");
        if (diag.rel_degree == 0) throw Error(ErrorCode::ConfigError, "agent " + std::to_string(i) + " has no relative degree");
        if (config.connectivity_enabled && !model.bounded())
            throw Error(ErrorCode::ConfigError, "connectivity needs bounded inputs to size reachable sets");
        agent.rel_degree = diag.rel_degree;
        agent.predictor = build_predictor(model, agent.rel_degree, config.horizon);

        // Start inside a ball of radius jitter_radius around the origin.
        Vector dir(model.d());
        do {
            for (int k = 0; k < model.d(); ++k) dir(k) = normal(rng);
        } while (dir.norm() < 1e-12);
        const double radius = config.jitter_radius * std::pow(unit(rng), 1.0 / model.d());
        const Vector pos = radius * dir / dir.norm();
        agent.state.x = model.C().completeOrthogonalDecomposition().solve(pos);
        agent.state.k = 0;
        agent.ledger = AgentWeightLedger::from_map(map);
    }
    return agents;
}

double max_designated_distance(const std::vector<Agent>& agents, const Topology& topology) {
    double worst = 0.0;
    for (const auto& a : agents)
        for (int j : topology.designated(a.id)) worst = std::max(worst, (a.position() - agents[j].position()).norm());
    return worst;
}

RunRecord run(const SimConfig& config) {
    validate(config);
    std::mt19937_64 rng(config.seed);

    const int dim = [&] {
        const auto& spec = config.models.front();
        if (spec.kind == ModelKind::Matrices) return spec.matrices->d();
        return spec.kind == ModelKind::Quadrotor ? 3 : spec.dim;
    }();
    const ReferenceMap map = config.map.kind == MapSpec::Kind::File
                                 ? load_map(config.map.path)
                                 : generate_mixture_map(config.n_samples, dim, config.map.clusters, config.map.extent,
                                                        config.map.spread, rng);
    std::vector<Agent> agents = make_agents(config, map, rng);
    const Topology topology = make_topology(config);
    const CycleConfig cycle = make_cycle_config(config);

    RunRecord record;
    record.n_agents = config.n_agents;
    record.dim = map.dim();
    record.map_samples = map.samples();
    record.map_weights = map.weights();
    record.swd_projections = config.swd_projections;
    record.swd_seed = rng();

    auto note = [&](const std::vector<std::string>& warnings) {
        for (const auto& w : warnings) {
            ++record.solver_warnings;
            if (record.warnings.size() < kMaxStoredWarnings) record.warnings.push_back(w);
        }
    };

    record.initial_positions = current_positions(agents, record.dim);
    record.initial_mass = collective_mass(agents);
    // Agents start clustered, so the first exchange precedes the first move.
    exchange_round(agents, topology, config.exchange, config.r_comm);

    const double target = config.completion_threshold * record.initial_mass;
    for (int k = 0; k < config.max_steps; ++k) {
        for (auto& agent : agents) note(agent_cycle(agent, agents, topology, map, cycle).warnings);
        record.links.push_back(exchange_round(agents, topology, config.exchange, config.r_comm));
        record.positions.push_back(current_positions(agents, record.dim));
        record.max_designated_distance.push_back(max_designated_distance(agents, topology));
        record.residual_mass.push_back(collective_mass(agents));
        record.steps = k + 1;
        if (record.residual_mass.back() <= target) {
            record.steps_to_completion = k + 1;
            break;
        }
    }

    if (record.steps > 0)
        record.final_swd = sliced_wasserstein(record.trajectory_points(), map.samples(), config.swd_projections,
                                              record.swd_seed);
    return record;
}

}  // namespace d2oc
