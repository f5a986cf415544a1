#pragma once

#include "d2oc/lti_dynamics.hpp"
#include "d2oc/qp.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace d2oc {

/// How the reachable-set generator matrix is reduced to a scalar radius.
enum class RadiusBound {
    MaxColumn,   // max_l ||G_l||, the default
    SumColumns,  // sum_l ||G_l||, a true upper bound on max ||G z|| over the unit box
};

/// Where the connectivity margin gamma enters the distance threshold.
enum class MarginMode {
    ScaleRange,      // gamma * r_comm - R_j   (default)
    ScaleThreshold,  // gamma * (r_comm - R_j)
    None,            // r_comm - R_j
};

struct PenaltySpec {
    double kappa = 750.0;
    double eta = 0.25;
    double r_comm = 15.0;
    double gamma = 0.8;
    double d_min = 1.0;
    double collision_kappa = 750.0;
    double collision_eta = 5.0;
    RadiusBound radius_bound = RadiusBound::MaxColumn;
    MarginMode margin_mode = MarginMode::ScaleRange;

    double threshold(double radius) const;
};

/// Softplus penalty (kappa/eta) log(1 + exp(eta z)).
double penalty(double z, double kappa, double eta);
/// d/dz of penalty(): kappa * sigmoid(eta z).
double penalty_slope(double z, double kappa, double eta);

/**
 * Radius of the output-space zonotope reachable by the neighbor after `elapsed`
 * steps of bounded input deviation. Columns of [C A^{elapsed-1} B ... C A^{r-1} B]
 * are scaled by the per-channel half-widths of the input box.
 */
double reachable_radius(const AgentModel& model, int rel_degree, int elapsed,
                        RadiusBound bound = RadiusBound::MaxColumn);

struct NeighborForecast {
    std::vector<Vector> yhat;  // nominal outputs at k_now + r .. k_now + r + H - 1
    Vector radius;             // R_j at the same steps
    std::int64_t age = 0;      // k_now - timestamp of the last received state
};

/**
 * Zero-input prediction of a neighbor from its last received state.
 * `offset` is the first predicted step relative to k_now (the predicting
 * agent's own relative degree). Throws StaleBeyondHorizon past max_age.
 */
NeighborForecast forecast_neighbor(const AgentModel& model, int rel_degree, const AgentState& last_state,
                                   std::int64_t k_now, int offset, int horizon, int max_age = 50,
                                   RadiusBound bound = RadiusBound::MaxColumn);

/// One scalar soft constraint on ||offset + F U||.
struct PenaltyTerm {
    enum class Sense { StayWithin, StayApart };
    Matrix F;        // d x mH
    Vector offset;   // d
    double threshold = 0.0;
    double kappa = 0.0;
    double eta = 1.0;
    Sense sense = Sense::StayWithin;
    int horizon_step = 0;
    int neighbor = -1;

    double distance(const Vector& U) const { return (offset + F * U).norm(); }
    // Argument passed to the softplus.
    double violation(const Vector& U) const {
        return sense == Sense::StayWithin ? distance(U) - threshold : threshold - distance(U);
    }
};

struct SoftProblem {
    QpProblem qp;
    std::vector<PenaltyTerm> terms;
};

/// Adds one StayWithin term per horizon step keeping the agent within reach of the neighbor.
void add_connectivity_terms(SoftProblem& problem, const StackedPredictor& pred, const Vector& x,
                            const NeighborForecast& neighbor, const PenaltySpec& spec, int neighbor_id = -1);

/// Adds StayApart terms for the steps where the nominal prediction comes within 2 d_min.
void add_collision_terms(SoftProblem& problem, const StackedPredictor& pred, const Vector& x,
                         const NeighborForecast& other, const PenaltySpec& spec, int other_id = -1);

/// J_soft and its gradient.
std::pair<double, Vector> soft_objective(const Vector& U, const SoftProblem& problem);

struct SoftSolveOptions {
    double tol = 1e-6;
    int max_iterations = 2000;
    double armijo_c = 1e-4;
    double shrink = 0.5;
};

/**
 * Projected Newton iteration with Armijo backtracking along the projection arc.
 * Coordinates pinned at a bound move along the negative gradient; the free ones
 * are scaled by a positive definite model of the soft Hessian, so the steep
 * penalty curvature does not stall progress. Stops on the projected-gradient norm.
 */
SolveReport solve_soft(const SoftProblem& problem, const Vector& u0, const SoftSolveOptions& options = {});

}  // namespace d2oc
