#pragma once

#include "d2oc/connectivity.hpp"
#include "d2oc/lti_dynamics.hpp"
#include "d2oc/qp.hpp"
#include "d2oc/transport.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace d2oc {

enum class TopologyKind { Chain, Tree, EdgeList };

/**
 * Undirected communication graph plus, for every agent, the neighbors whose
 * link that agent is responsible for keeping alive. Always connected.
 *
 *  - chain: agent i keeps agent i+1
 *  - tree:  every non-root agent keeps its parent
 *  - edges: the lower-numbered endpoint keeps each edge
 */
class Topology {
public:
    static Topology chain(int n_agents);
    static Topology tree(const std::vector<int>& parents);
    static Topology from_edges(int n_agents, const std::vector<std::pair<int, int>>& edges);

    TopologyKind kind() const { return kind_; }
    int size() const { return static_cast<int>(designated_.size()); }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& designated(int agent) const { return designated_.at(agent); }
    bool has_edge(int a, int b) const;

private:
    Topology(TopologyKind kind, int n_agents, std::vector<std::pair<int, int>> edges);

    TopologyKind kind_ = TopologyKind::Chain;
    std::vector<std::pair<int, int>> edges_;
    std::vector<std::vector<int>> designated_;
};

/// Snapshot sent to neighbors on contact: residual weights and the sender's state.
struct WeightMessage {
    int sender = -1;
    Vector residuals;
    std::int64_t timestamp = 0;
    AgentState state;
};

/**
 * Multiplicative Gaussian coverage decay around `pos`:
 *   residual_j *= 1 - decay * exp(-||pos - q_j||^2 / (2 (r_cov/2)^2)).
 * Returns the mass removed.
 */
double adjust_weights(AgentWeightLedger& ledger, const Vector& pos, const ReferenceMap& map,
                      double r_cov, double decay);

/// Elementwise min with the incoming snapshot.
void merge_weights(AgentWeightLedger& ledger, const WeightMessage& incoming);

enum class ExchangeMode { TopologyOnly, RangeGated };

struct Link {
    int i = 0;
    int j = 0;
    double distance = 0.0;
};

struct Agent {
    int id = 0;
    std::shared_ptr<const AgentModel> model;
    int rel_degree = 1;
    StackedPredictor predictor;
    AgentState state;
    AgentWeightLedger ledger;
    std::map<int, WeightMessage> inbox;  // latest message from each sender

    Vector position() const { return output(*model, state); }
    WeightMessage message() const { return {id, ledger.residual, state.k, state}; }
};

/**
 * One synchronous exchange: every message is snapshotted before any merge, so
 * information travels one hop per round. Range-gated links connect pairs within
 * r_comm; topology-only links are the topology edges.
 */
std::vector<Link> exchange_round(std::vector<Agent>& agents, const Topology& topology, ExchangeMode mode,
                                 double r_comm);

struct CycleConfig {
    SelectionParams selection;
    double rho = 0.1;  // R = rho I
    bool connectivity = true;
    bool collision_avoidance = false;
    PenaltySpec penalty;
    double r_cov = 2.0;
    double decay = 0.5;
    int max_age = 50;
    BoxQpOptions box;
    SoftSolveOptions soft;
};

struct CycleResult {
    Vector u_applied;
    SolveReport report;
    double mass_removed = 0.0;
    int penalty_terms = 0;
    std::vector<std::string> warnings;
};

/**
 * Select samples, solve for the input sequence, apply its first block, and
 * decay the ledger around the new position. `agents` supplies the neighbor
 * models by id; only `agent` is modified.
 */
CycleResult agent_cycle(Agent& agent, const std::vector<Agent>& agents, const Topology& topology,
                        const ReferenceMap& map, const CycleConfig& config);

}  // namespace d2oc
