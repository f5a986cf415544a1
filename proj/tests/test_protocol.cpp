#include "d2oc/error.hpp"
#include "d2oc/protocol.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace d2oc;
using namespace testing;

namespace {

Agent make_agent(int id, std::shared_ptr<const AgentModel> model, const Vector& pos, const ReferenceMap& map,
                 int horizon = 1) {
    Agent a;
    a.id = id;
    a.model = model;
    a.rel_degree = relative_degree(*model);
    a.predictor = build_predictor(*model, a.rel_degree, horizon);
    a.state.x = model->C().completeOrthogonalDecomposition().solve(pos);
    a.ledger = AgentWeightLedger::from_map(map);
    return a;
}

WeightMessage carrying(const Vector& residuals) {
    WeightMessage m;
    m.residuals = residuals;
    return m;
}

Vector random_residuals(std::mt19937_64& rng, int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = uniform(rng, 0.0, 1.0);
    return v;
}

}  // namespace

TEST_CASE("topologies and designated neighbors") {
    const Topology c = Topology::chain(4);
    CHECK(c.edges().size() == 3);
    CHECK(c.designated(0) == std::vector<int>{1});
    CHECK(c.designated(3).empty());
    CHECK(c.has_edge(2, 1));
    CHECK_FALSE(c.has_edge(0, 2));

    const Topology t = Topology::tree({-1, 0, 0, 1});
    CHECK(t.designated(0).empty());
    CHECK(t.designated(3) == std::vector<int>{1});

    const Topology e = Topology::from_edges(3, {{2, 0}, {1, 2}});
    CHECK(e.designated(0) == std::vector<int>{2});
    CHECK(e.designated(1) == std::vector<int>{2});

    CHECK_THROWS_AS(Topology::from_edges(3, {{0, 1}}), Error);   // disconnected
    CHECK_THROWS_AS(Topology::tree({-1, -1}), Error);            // two roots
    CHECK_THROWS_AS(Topology::from_edges(2, {{0, 0}}), Error);   // self loop
    CHECK(Topology::chain(1).size() == 1);
}

TEST_CASE("coverage decay") {
    const ReferenceMap map(Matrix{{0.0, 0.0}, {3.0, 4.0}, {1.0, -1.0}, {-2.0, 0.5}, {0.0, 7.0}});
    AgentWeightLedger far = AgentWeightLedger::from_map(map);
    const Vector before = far.residual;
    CHECK(adjust_weights(far, Vector{{1e6, 1e6}}, map, 2.0, 0.5) < 1e-12);
    CHECK((far.residual - before).cwiseAbs().maxCoeff() < 1e-12);

    AgentWeightLedger at = AgentWeightLedger::from_map(map);
    adjust_weights(at, Vector{{3.0, 4.0}}, map, 2.0, 1.0);
    CHECK(at.residual(1) == 0.0);

    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        AgentWeightLedger l{random_residuals(rng, 5)};
        const Vector old = l.residual;
        const Vector pos = random_vector(rng, 2, 2.0);
        const double r_cov = uniform(rng, 0.5, 4.0), decay = uniform(rng, 0.1, 1.0);
        const double removed = adjust_weights(l, pos, map, r_cov, decay);
        for (int j = 0; j < 5; ++j) {
            const double sigma = r_cov / 2;
            const double expected =
                old(j) * (1 - decay * std::exp(-(map.point(j) - pos).squaredNorm() / (2 * sigma * sigma)));
            CHECK(l.residual(j) == doctest::Approx(expected).epsilon(1e-14));
            CHECK(l.residual(j) <= old(j));
            CHECK(l.residual(j) >= 0.0);
        }
        CHECK(removed == doctest::Approx(old.sum() - l.residual.sum()).epsilon(1e-12));
    }
    CHECK_THROWS_AS(adjust_weights(at, Vector::Zero(2), map, 2.0, 1.5), Error);
}

TEST_CASE("min-merge") {
    AgentWeightLedger own{Vector{{0.5, 0.2}}};
    merge_weights(own, carrying(own.residual));
    CHECK(own.residual == Vector{{0.5, 0.2}});
    merge_weights(own, carrying(Vector{{0.3, 0.4}}));
    CHECK(own.residual == Vector{{0.3, 0.2}});
    try {
        merge_weights(own, carrying(Vector::Zero(3)));
        FAIL("expected LengthMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LengthMismatch);
    }
}

TEST_CASE("min-merge lattice laws") {
    std::mt19937_64 rng(1000);
    auto merged = [](const Vector& a, const Vector& b) {
        AgentWeightLedger l{a};
        merge_weights(l, carrying(b));
        return l.residual;
    };
    for (int t = 0; t < 1000; ++t) {
        const Vector a = random_residuals(rng, 8), b = random_residuals(rng, 8), c = random_residuals(rng, 8);
        CHECK(merged(a, a) == a);
        CHECK(merged(a, b) == merged(b, a));
        CHECK(merged(merged(a, b), c) == merged(a, merged(b, c)));
        CHECK(merged(merged(a, b), c) == merged(merged(c, a), b));
    }
}

TEST_CASE("exchange is gated by range") {
    const ReferenceMap map(Matrix{{0.0}, {1.0}});
    auto model = std::make_shared<const AgentModel>(integrator(1, 0.1, 1.0));
    std::vector<Agent> agents{make_agent(0, model, Vector{{0.0}}, map), make_agent(1, model, Vector{{16.0}}, map)};
    agents[0].ledger.residual << 0.1, 0.5;
    agents[1].ledger.residual << 0.5, 0.1;
    const auto links = exchange_round(agents, Topology::chain(2), ExchangeMode::RangeGated, 15.0);
    CHECK(links.empty());
    CHECK(agents[0].ledger.residual == Vector{{0.1, 0.5}});
    CHECK(agents[1].ledger.residual == Vector{{0.5, 0.1}});
    CHECK(agents[0].inbox.empty());

    // Topology-only mode ignores range.
    const auto forced = exchange_round(agents, Topology::chain(2), ExchangeMode::TopologyOnly, 15.0);
    CHECK(forced.size() == 1);
    CHECK(agents[0].ledger.residual == Vector{{0.1, 0.1}});
}

TEST_CASE("information travels one hop per round") {
    const ReferenceMap map(Matrix{{0.0}, {1.0}, {2.0}});
    auto model = std::make_shared<const AgentModel>(integrator(1, 0.1, 1.0));
    std::vector<Agent> agents;
    for (int i = 0; i < 3; ++i) agents.push_back(make_agent(i, model, Vector{{10.0 * i}}, map));
    agents[0].ledger.residual << 0.1, 0.9, 0.9;
    agents[1].ledger.residual << 0.9, 0.2, 0.9;
    agents[2].ledger.residual << 0.9, 0.9, 0.3;
    const Vector global{{0.1, 0.2, 0.3}};
    // 0-1 and 1-2 are 10 apart, 0-2 are 20 apart: a chain under range gating.
    const Topology chain = Topology::chain(3);
    const auto first = exchange_round(agents, chain, ExchangeMode::RangeGated, 15.0);
    CHECK(first.size() == 2);
    CHECK(agents[1].ledger.residual == global);
    CHECK(agents[0].ledger.residual == Vector{{0.1, 0.2, 0.9}});
    CHECK(agents[2].ledger.residual == Vector{{0.9, 0.2, 0.3}});
    exchange_round(agents, chain, ExchangeMode::RangeGated, 15.0);
    for (const auto& a : agents) CHECK(a.ledger.residual == global);
}

TEST_CASE("a clique agrees after one round") {
    std::mt19937_64 rng(66);
    const ReferenceMap map(random_matrix(rng, 6, 2));
    auto model = std::make_shared<const AgentModel>(integrator(2, 0.1, 1.0));
    std::vector<Agent> agents;
    Vector global = Vector::Constant(6, 1.0);
    for (int i = 0; i < 5; ++i) {
        agents.push_back(make_agent(i, model, random_vector(rng, 2), map));
        agents.back().ledger.residual = random_residuals(rng, 6);
        global = global.cwiseMin(agents.back().ledger.residual);
    }
    std::vector<std::pair<int, int>> all;
    for (int i = 0; i < 5; ++i)
        for (int j = i + 1; j < 5; ++j) all.emplace_back(i, j);
    const auto links = exchange_round(agents, Topology::from_edges(5, all), ExchangeMode::RangeGated, 100.0);
    CHECK(links.size() == 10);
    for (const auto& a : agents) {
        CHECK(a.ledger.residual == global);
        CHECK(a.inbox.size() == 4);
    }
}

TEST_CASE("single agent drives to its only sample") {
    const ReferenceMap map(Matrix{{4.0, -3.0}});
    auto model = std::make_shared<const AgentModel>(integrator(2, 0.1, 10.0 / std::sqrt(2.0)));
    std::vector<Agent> agents{make_agent(0, model, Vector::Zero(2), map)};
    CycleConfig config;
    config.connectivity = false;
    const Topology solo = Topology::chain(1);
    double dist = (agents[0].position() - map.point(0)).norm();
    for (int k = 0; k < 200; ++k) {
        const CycleResult r = agent_cycle(agents[0], agents, solo, map, config);
        CHECK(r.warnings.empty());
        CHECK(r.mass_removed >= 0.0);
        const double next = (agents[0].position() - map.point(0)).norm();
        CHECK(next <= dist + 1e-12);
        dist = next;
    }
    CHECK(dist < 1e-6);
    CHECK(agents[0].ledger.mass() < 1e-6);
    CHECK(agents[0].state.k == 200);
}

TEST_CASE("disabled connectivity equals a zero-weight penalty") {
    std::mt19937_64 rng(8);
    const ReferenceMap map(random_matrix(rng, 30, 2, 10.0));
    auto model = std::make_shared<const AgentModel>(integrator(2, 0.1, 7.0));
    auto simulate = [&](CycleConfig config) {
        std::vector<Agent> agents;
        for (int i = 0; i < 3; ++i) agents.push_back(make_agent(i, model, Vector{{0.3 * i, 0.0}}, map));
        const Topology chain = Topology::chain(3);
        std::vector<Matrix> trace;
        exchange_round(agents, chain, ExchangeMode::RangeGated, 15.0);
        for (int k = 0; k < 60; ++k) {
            for (auto& a : agents) agent_cycle(a, agents, chain, map, config);
            exchange_round(agents, chain, ExchangeMode::RangeGated, 15.0);
            Matrix P(3, 2);
            for (int i = 0; i < 3; ++i) P.row(i) = agents[i].position().transpose();
            trace.push_back(P);
        }
        return trace;
    };
    CycleConfig off;
    off.connectivity = false;
    CycleConfig zero;
    zero.connectivity = true;
    zero.penalty.kappa = 0.0;
    const auto a = simulate(off), b = simulate(zero);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, (a[k] - b[k]).cwiseAbs().maxCoeff());
    CHECK(worst < 1e-9);
}

TEST_CASE("a designated pair stays connected while pulled apart") {
    // Two clusters 40 apart, far beyond gamma * r_comm = 12. Each agent is told the
    // other cluster is covered, so their goals diverge; agent 0 keeps the link to 1.
    Matrix samples(20, 2);
    for (int j = 0; j < 10; ++j) {
        samples.row(j) << -20.0 + 0.3 * j, 0.5 * (j % 3);
        samples.row(10 + j) << 20.0 - 0.3 * j, 0.5 * (j % 3);
    }
    const ReferenceMap map(samples);
    const double T = 0.1, v_max = 10.0;
    auto model = std::make_shared<const AgentModel>(integrator(2, T, v_max / std::sqrt(2.0)));
    std::vector<Agent> agents{make_agent(0, model, Vector{{-0.5, 0.0}}, map),
                              make_agent(1, model, Vector{{0.5, 0.0}}, map)};
    agents[0].ledger.residual.tail(10).setZero();
    agents[1].ledger.residual.head(10).setZero();
    CycleConfig config;
    config.connectivity = true;
    config.collision_avoidance = true;
    const Topology chain = Topology::chain(2);
    double worst = 0.0, free_worst = 0.0;
    for (int k = 0; k < 400; ++k) {
        for (auto& a : agents)
            for (auto& b : agents)
                if (a.id != b.id) a.inbox[b.id] = b.message();
        for (auto& a : agents) CHECK(agent_cycle(a, agents, chain, map, config).warnings.empty());
        worst = std::max(worst, (agents[0].position() - agents[1].position()).norm());
    }
    // The neighbor can move v_max T between forecasts, which the threshold cannot see.
    CHECK(worst <= config.penalty.gamma * config.penalty.r_comm + v_max * T);
    // Agent 1 is unconstrained and reaches its cluster; agent 0 is dragged along.
    CHECK(agents[1].position()(0) > 15.0);
    CHECK(agents[0].position()(0) > 0.0);

    // Without the penalty the same setup separates completely.
    std::vector<Agent> loose{make_agent(0, model, Vector{{-0.5, 0.0}}, map), make_agent(1, model, Vector{{0.5, 0.0}}, map)};
    loose[0].ledger.residual.tail(10).setZero();
    loose[1].ledger.residual.head(10).setZero();
    config.connectivity = false;
    config.collision_avoidance = false;
    for (int k = 0; k < 400; ++k) {
        for (auto& a : loose) agent_cycle(a, loose, chain, map, config);
        free_worst = std::max(free_worst, (loose[0].position() - loose[1].position()).norm());
    }
    CHECK(free_worst > config.penalty.r_comm);
}
