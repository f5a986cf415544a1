#pragma once

#include "d2oc/lti_dynamics.hpp"
#include "d2oc/transport.hpp"

#include <optional>
#include <vector>

namespace d2oc {

/// Convex box-constrained quadratic  1/2 U'HU + f'U + const  over lo <= U <= hi.
struct QpProblem {
    Matrix hessian;
    Vector linear;
    double constant = 0.0;  // not needed by the solver, kept so value() is the full local cost
    Vector lo, hi;

    int size() const { return static_cast<int>(linear.size()); }
    double value(const Vector& U) const { return 0.5 * U.dot(hessian * U) + linear.dot(U) + constant; }
    Vector gradient(const Vector& U) const { return hessian * U + linear; }
};

enum class SolveStatus { Converged, MaxIterations };

struct SolveReport {
    Vector u_opt;
    double kkt_residual = 0.0;
    int iterations = 0;
    std::vector<int> active_lo, active_hi;
    double objective = 0.0;
    SolveStatus status = SolveStatus::Converged;
    std::vector<double> objective_trace;  // objective after each accepted iterate

    bool converged() const { return status == SolveStatus::Converged; }
};

struct BoxQpOptions {
    double kkt_tol = 1e-8;
    int max_iterations = 500;
};

/// Stacks the per-step box H times.
std::pair<Vector, Vector> stacked_bounds(const AgentModel& model, int horizon);

/**
 * H = 2((Omega Theta)'(Omega Theta) + R),  f = 2 (Omega Theta)' Omega (Phi x - Qbar).
 * Throws NotSPD when R (or the assembled Hessian) fails Cholesky.
 */
QpProblem assemble_qp(const StackedPredictor& pred, const Vector& x, const BarycenterTrack& track,
                      double spread, const Matrix& R, const Vector& lo, const Vector& hi);

/// -H^{-1} f via Cholesky.
Vector unconstrained_optimum(const QpProblem& qp);

/// ||U - Proj_box(U - g)||_inf, zero exactly at a KKT point of the box problem.
double projected_gradient_norm(const Vector& U, const Vector& grad, const Vector& lo, const Vector& hi);

/**
 * Primal active-set Newton method on the box. Each iteration solves the Newton
 * system restricted to the free coordinates, steps to the first blocking bound,
 * and releases the bound with the most negative multiplier once the free
 * subproblem is optimal. Objective is non-increasing across iterations.
 */
SolveReport solve_box_qp(const QpProblem& qp, const std::optional<Vector>& start = std::nullopt,
                         const BoxQpOptions& options = {});

}  // namespace d2oc
