#pragma once

#include "d2oc/config.hpp"
#include "d2oc/protocol.hpp"
#include "d2oc/transport.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace d2oc {

/// Everything recorded during one run. Per-step series hold the state after
/// each step, so a run of S steps has S entries; entry s is step s + 1.
struct RunRecord {
    int n_agents = 0;
    int dim = 0;
    Matrix initial_positions;
    std::vector<Matrix> positions;           // n_agents x dim per step
    std::vector<std::vector<Link>> links;    // realized exchanges per step
    std::vector<double> max_designated_distance;
    std::vector<double> residual_mass;       // collective: sum_j min_i residual_{i,j}
    double initial_mass = 0.0;
    int steps = 0;
    std::optional<int> steps_to_completion;
    std::optional<double> final_swd;         // empty when no step was taken
    std::uint64_t swd_seed = 0;
    int swd_projections = 0;
    int solver_warnings = 0;
    std::vector<std::string> warnings;       // first few, for the metrics file
    Matrix map_samples;
    Vector map_weights;

    /// Every recorded position stacked as rows (steps x agents order).
    Matrix trajectory_points() const;
};

/// Seeded Gaussian-mixture point cloud.
ReferenceMap generate_mixture_map(int n_samples, int dim, int clusters, double extent, double spread,
                                  std::mt19937_64& rng);

/// Builds the agents (models, predictors, initial states and ledgers) for a config.
std::vector<Agent> make_agents(const SimConfig& config, const ReferenceMap& map, std::mt19937_64& rng);

Topology make_topology(const SimConfig& config);

CycleConfig make_cycle_config(const SimConfig& config);

/// Largest distance over the topology's designated pairs at the current positions.
double max_designated_distance(const std::vector<Agent>& agents, const Topology& topology);

/// Runs until the collective residual mass drops to completion_threshold of the
/// initial mass, or max_steps. Deterministic for a fixed config.
RunRecord run(const SimConfig& config);

}  // namespace d2oc
