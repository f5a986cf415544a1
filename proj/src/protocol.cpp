#include "d2oc/protocol.hpp"

#include "d2oc/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace d2oc {

Topology::Topology(TopologyKind kind, int n_agents, std::vector<std::pair<int, int>> edges)
    : kind_(kind), designated_(std::max(n_agents, 0)) {
    if (n_agents < 1) throw Error(ErrorCode::ConfigError, "topology needs at least one agent");
    std::vector<std::vector<int>> adjacency(n_agents);
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n_agents || b >= n_agents || a == b)
            throw Error(ErrorCode::ConfigError, "invalid topology edge");
        if (a > b) std::swap(a, b);
        if (std::find(edges_.begin(), edges_.end(), std::pair{a, b}) != edges_.end()) continue;
        edges_.emplace_back(a, b);
        adjacency[a].push_back(b);
        adjacency[b].push_back(a);
    }
    std::vector<bool> seen(n_agents, false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    int reached = 1;
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop();
        for (int w : adjacency[v]) {
            if (!seen[w]) {
                seen[w] = true;
                ++reached;
                frontier.push(w);
            }
        }
    }
    if (reached != n_agents) throw Error(ErrorCode::ConfigError, "communication topology is not connected");
}

Topology Topology::chain(int n_agents) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n_agents; ++i) edges.emplace_back(i, i + 1);
    Topology topo(TopologyKind::Chain, n_agents, edges);
    for (int i = 0; i + 1 < n_agents; ++i) topo.designated_[i] = {i + 1};
    return topo;
}

Topology Topology::tree(const std::vector<int>& parents) {
    const int n = static_cast<int>(parents.size());
    std::vector<std::pair<int, int>> edges;
    int roots = 0;
    for (int i = 0; i < n; ++i) {
        if (parents[i] < 0) ++roots;
        else edges.emplace_back(i, parents[i]);
    }
    if (roots != 1) throw Error(ErrorCode::ConfigError, "a tree topology needs exactly one root (parent -1)");
    Topology topo(TopologyKind::Tree, n, edges);
    for (int i = 0; i < n; ++i)
        if (parents[i] >= 0) topo.designated_[i] = {parents[i]};
    return topo;
}

Topology Topology::from_edges(int n_agents, const std::vector<std::pair<int, int>>& edges) {
    Topology topo(TopologyKind::EdgeList, n_agents, edges);
    for (auto [a, b] : topo.edges_) topo.designated_[a].push_back(b);
    return topo;
}

bool Topology::has_edge(int a, int b) const {
    if (a > b) std::swap(a, b);
    return std::find(edges_.begin(), edges_.end(), std::pair{a, b}) != edges_.end();
}

double adjust_weights(AgentWeightLedger& ledger, const Vector& pos, const ReferenceMap& map,
                      double r_cov, double decay) {
    if (!(r_cov > 0.0) || !(decay > 0.0) || decay > 1.0)
        throw Error(ErrorCode::ConfigError, "coverage radius must be positive and decay in (0, 1]");
    if (ledger.residual.size() != map.size()) throw Error(ErrorCode::LengthMismatch, "ledger does not match map");
    if (pos.size() != map.dim()) throw Error(ErrorCode::DimensionMismatch, "position dimension does not match map");
    const double sigma = 0.5 * r_cov;
    const double denom = 2.0 * sigma * sigma;
    double removed = 0.0;
    for (int j = 0; j < map.size(); ++j) {
        const double dist2 = (map.samples().row(j).transpose() - pos).squaredNorm();
        const double before = ledger.residual(j);
        const double after = before * (1.0 - decay * std::exp(-dist2 / denom));
        ledger.residual(j) = after;
        removed += before - after;
    }
    return removed;
}

void merge_weights(AgentWeightLedger& ledger, const WeightMessage& incoming) {
    if (incoming.residuals.size() != ledger.residual.size())
        throw Error(ErrorCode::LengthMismatch, "incoming residuals have a different length");
    ledger.residual = ledger.residual.cwiseMin(incoming.residuals);
}

std::vector<Link> exchange_round(std::vector<Agent>& agents, const Topology& topology, ExchangeMode mode,
                                 double r_comm) {
    const int n = static_cast<int>(agents.size());
    std::vector<WeightMessage> outbox;
    std::vector<Vector> positions;
    outbox.reserve(n);
    for (const auto& agent : agents) {
        outbox.push_back(agent.message());
        positions.push_back(agent.position());
    }

    std::vector<Link> links;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dist = (positions[i] - positions[j]).norm();
            const bool linked = mode == ExchangeMode::RangeGated ? dist <= r_comm : topology.has_edge(i, j);
            if (!linked) continue;
            links.push_back({i, j, dist});
            merge_weights(agents[i].ledger, outbox[j]);
            merge_weights(agents[j].ledger, outbox[i]);
            agents[i].inbox[j] = outbox[j];
            agents[j].inbox[i] = outbox[i];
        }
    }
    return links;
}

CycleResult agent_cycle(Agent& agent, const std::vector<Agent>& agents, const Topology& topology,
                        const ReferenceMap& map, const CycleConfig& config) {
    const AgentModel& model = *agent.model;
    const StackedPredictor& pred = agent.predictor;
    const int H = pred.horizon;
    const int mH = model.m() * H;

    CycleResult result;
    const Vector pos = agent.position();
    const LocalSelection selection = select_local_samples(pos, agent.ledger, map, config.selection, H);
    const BarycenterTrack track = barycenter(selection, map);
    const auto [lo, hi] = stacked_bounds(model, H);
    const QpProblem qp = assemble_qp(pred, agent.state.x, track, barycenter_spread(selection, map, track),
                                     config.rho * Matrix::Identity(mH, mH), lo, hi);

    SolveReport report = solve_box_qp(qp, std::nullopt, config.box);
    if (!report.converged()) result.warnings.push_back("box QP hit the iteration cap; using best iterate");

    if (config.connectivity || config.collision_avoidance) {
        SoftProblem soft{qp, {}};
        for (const auto& [sender, msg] : agent.inbox) {
            const Agent& other = agents.at(sender);
            NeighborForecast forecast;
            try {
                forecast = forecast_neighbor(*other.model, other.rel_degree, msg.state, agent.state.k,
                                             agent.rel_degree, H, config.max_age, config.penalty.radius_bound);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::StaleBeyondHorizon) throw;
                result.warnings.push_back("agent " + std::to_string(agent.id) + ": link to " +
                                          std::to_string(sender) + " considered lost");
                continue;
            }
            const auto& keep = topology.designated(agent.id);
            if (config.connectivity && std::find(keep.begin(), keep.end(), sender) != keep.end())
                add_connectivity_terms(soft, pred, agent.state.x, forecast, config.penalty, sender);
            if (config.collision_avoidance)
                add_collision_terms(soft, pred, agent.state.x, forecast, config.penalty, sender);
        }
        result.penalty_terms = static_cast<int>(soft.terms.size());
        if (!soft.terms.empty()) {
            report = solve_soft(soft, report.u_opt, config.soft);
            if (!report.converged())
                result.warnings.push_back("penalized solve stopped at kkt residual " +
                                          std::to_string(report.kkt_residual));
        }
    }

    result.u_applied = report.u_opt.head(model.m());
    const StepResult stepped = step(model, agent.state, result.u_applied);
    if (stepped.clamped) result.warnings.push_back("applied input was clipped into the box");
    agent.state = stepped.state;
    result.mass_removed = adjust_weights(agent.ledger, agent.position(), map, config.r_cov, config.decay);
    result.report = std::move(report);
    return result;
}

}  // namespace d2oc
