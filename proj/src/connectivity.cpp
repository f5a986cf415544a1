#include "d2oc/connectivity.hpp"

#include "d2oc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace d2oc {

namespace {

constexpr double kDistanceGuard = 1e-9;
constexpr double kRoundoff = 4.0 * std::numeric_limits<double>::epsilon();

}  // namespace

double PenaltySpec::threshold(double radius) const {
    switch (margin_mode) {
        case MarginMode::ScaleRange: return gamma * r_comm - radius;
        case MarginMode::ScaleThreshold: return gamma * (r_comm - radius);
        case MarginMode::None: return r_comm - radius;
    }
    return gamma * r_comm - radius;
}

double penalty(double z, double kappa, double eta) {
    const double t = eta * z;
    if (t > 30.0) return kappa * z + (kappa / eta) * std::log1p(std::exp(-t));
    return (kappa / eta) * std::log1p(std::exp(t));
}

double penalty_slope(double z, double kappa, double eta) {
    const double t = eta * z;
    if (t >= 0.0) return kappa / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return kappa * e / (1.0 + e);
}

double reachable_radius(const AgentModel& model, int rel_degree, int elapsed, RadiusBound bound) {
    if (rel_degree < 1) throw Error(ErrorCode::DimensionMismatch, "relative degree must be positive");
    if (elapsed < rel_degree) return 0.0;
    const Vector half_width = 0.5 * (model.u_max() - model.u_min());

    double result = 0.0;
    Matrix AkB = model.B();
    for (int p = 0; p < elapsed; ++p) {
        if (p >= rel_degree - 1) {
            const Matrix block = model.C() * AkB;
            for (int l = 0; l < model.m(); ++l) {
                const double norm = block.col(l).norm();
                // An unbounded channel that reaches the output makes the set unbounded.
                const double column = norm == 0.0 ? 0.0 : half_width(l) * norm;
                result = bound == RadiusBound::MaxColumn ? std::max(result, column) : result + column;
            }
        }
        AkB = model.A() * AkB;
    }
    return result;
}

NeighborForecast forecast_neighbor(const AgentModel& model, int rel_degree, const AgentState& last_state,
                                   std::int64_t k_now, int offset, int horizon, int max_age,
                                   RadiusBound bound) {
    if (last_state.x.size() != model.n())
        throw Error(ErrorCode::DimensionMismatch, "neighbor state does not match its model");
    if (horizon < 1 || offset < 0) throw Error(ErrorCode::DimensionMismatch, "horizon must be positive");
    const std::int64_t age = k_now - last_state.k;
    if (age < 0) throw Error(ErrorCode::ConfigError, "neighbor state is timestamped in the future");
    if (age > max_age)
        throw Error(ErrorCode::StaleBeyondHorizon,
                    "last neighbor state is " + std::to_string(age) + " steps old (limit " + std::to_string(max_age) + ")");

    NeighborForecast forecast;
    forecast.age = age;
    forecast.radius.resize(horizon);
    Vector x = last_state.x;
    const std::int64_t first = age + offset;
    for (std::int64_t s = 0; s < first; ++s) x = model.A() * x;
    for (int h = 0; h < horizon; ++h) {
        forecast.yhat.push_back(model.C() * x);
        forecast.radius(h) = reachable_radius(model, rel_degree, static_cast<int>(first + h), bound);
        x = model.A() * x;
    }
    return forecast;
}

void add_connectivity_terms(SoftProblem& problem, const StackedPredictor& pred, const Vector& x,
                            const NeighborForecast& neighbor, const PenaltySpec& spec, int neighbor_id) {
    const int d = pred.d;
    if (static_cast<int>(neighbor.yhat.size()) != pred.horizon)
        throw Error(ErrorCode::DimensionMismatch, "neighbor forecast length differs from the horizon");
    for (int h = 0; h < pred.horizon; ++h) {
        if (neighbor.yhat[h].size() != d) throw Error(ErrorCode::DimensionMismatch, "neighbor output dimension");
        PenaltyTerm term;
        term.F = pred.theta.middleRows(h * d, d);
        term.offset = pred.phi.middleRows(h * d, d) * x - neighbor.yhat[h];
        term.threshold = spec.threshold(neighbor.radius(h));
        term.kappa = spec.kappa;
        term.eta = spec.eta;
        term.sense = PenaltyTerm::Sense::StayWithin;
        term.horizon_step = h;
        term.neighbor = neighbor_id;
        problem.terms.push_back(std::move(term));
    }
}

void add_collision_terms(SoftProblem& problem, const StackedPredictor& pred, const Vector& x,
                         const NeighborForecast& other, const PenaltySpec& spec, int other_id) {
    const int d = pred.d;
    if (static_cast<int>(other.yhat.size()) != pred.horizon)
        throw Error(ErrorCode::DimensionMismatch, "forecast length differs from the horizon");
    for (int h = 0; h < pred.horizon; ++h) {
        const Vector offset = pred.phi.middleRows(h * d, d) * x - other.yhat[h];
        if (offset.norm() >= 2.0 * spec.d_min) continue;
        PenaltyTerm term;
        term.F = pred.theta.middleRows(h * d, d);
        term.offset = offset;
        term.threshold = spec.d_min;
        term.kappa = spec.collision_kappa;
        term.eta = spec.collision_eta;
        term.sense = PenaltyTerm::Sense::StayApart;
        term.horizon_step = h;
        term.neighbor = other_id;
        problem.terms.push_back(std::move(term));
    }
}

std::pair<double, Vector> soft_objective(const Vector& U, const SoftProblem& problem) {
    if (U.size() != problem.qp.size()) throw Error(ErrorCode::DimensionMismatch, "U has the wrong length");
    double value = problem.qp.value(U);
    Vector grad = problem.qp.gradient(U);
    for (const auto& term : problem.terms) {
        if (term.F.cols() != U.size()) throw Error(ErrorCode::DimensionMismatch, "penalty term width");
        const Vector residual = term.offset + term.F * U;
        const double dist = residual.norm();
        const double z = term.sense == PenaltyTerm::Sense::StayWithin ? dist - term.threshold : term.threshold - dist;
        value += penalty(z, term.kappa, term.eta);
        const double sign = term.sense == PenaltyTerm::Sense::StayWithin ? 1.0 : -1.0;
        const double slope = sign * penalty_slope(z, term.kappa, term.eta) / std::max(dist, kDistanceGuard);
        grad.noalias() += slope * (term.F.transpose() * residual);
    }
    return {value, grad};
}

namespace {

double penalty_curvature(double z, double kappa, double eta) {
    const double sig = penalty_slope(z, 1.0, eta);
    return kappa * eta * sig * (1.0 - sig);
}

// Hessian model of J_soft used to scale the search direction. StayWithin terms are
// convex and contribute their exact Hessian; for StayApart terms only the rank-one
// part is kept so the model stays positive definite. The curvature of the norm is
// capped near its kink, where it is unbounded.
Matrix soft_hessian_model(const Vector& U, const SoftProblem& problem) {
    Matrix hess = problem.qp.hessian;
    for (const auto& term : problem.terms) {
        const Vector residual = term.offset + term.F * U;
        const double dist = residual.norm();
        const double z = term.sense == PenaltyTerm::Sense::StayWithin ? dist - term.threshold : term.threshold - dist;
        const Vector grad_d = term.F.transpose() * residual / std::max(dist, kDistanceGuard);
        hess.noalias() += penalty_curvature(z, term.kappa, term.eta) * grad_d * grad_d.transpose();
        if (term.sense == PenaltyTerm::Sense::StayWithin) {
            const double scale = penalty_slope(z, term.kappa, term.eta) / std::max(dist, 1e-3);
            hess.noalias() += scale * (term.F.transpose() * term.F - grad_d * grad_d.transpose());
        }
    }
    return hess;
}

}  // namespace

SolveReport solve_soft(const SoftProblem& problem, const Vector& u0, const SoftSolveOptions& options) {
    const QpProblem& qp = problem.qp;
    if (u0.size() != qp.size()) throw Error(ErrorCode::DimensionMismatch, "start point has the wrong size");
    const int n = qp.size();
    auto project = [&](const Vector& v) -> Vector { return v.cwiseMax(qp.lo).cwiseMin(qp.hi); };

    SolveReport report;
    Vector u = project(u0);
    auto [value, grad] = soft_objective(u, problem);
    report.objective_trace.push_back(value);

    report.status = SolveStatus::MaxIterations;
    for (report.iterations = 0; report.iterations < options.max_iterations; ++report.iterations) {
        const double pg = projected_gradient_norm(u, grad, qp.lo, qp.hi);
        if (pg < options.tol) {
            report.status = SolveStatus::Converged;
            break;
        }

        // Coordinates near a bound with the gradient pushing outward are moved by
        // plain gradient; the rest get a Newton step on the reduced model.
        const double width = std::min(pg, 1e-3);
        std::vector<int> free;
        Vector direction = -grad;
        for (int i = 0; i < n; ++i) {
            const bool held = (u(i) <= qp.lo(i) + width && grad(i) > 0.0) || (u(i) >= qp.hi(i) - width && grad(i) < 0.0);
            if (!held) free.push_back(i);
        }
        if (!free.empty()) {
            const Matrix model = soft_hessian_model(u, problem);
            const int f = static_cast<int>(free.size());
            Matrix reduced(f, f);
            Vector rhs(f);
            for (int a = 0; a < f; ++a) {
                rhs(a) = -grad(free[a]);
                for (int b = 0; b < f; ++b) reduced(a, b) = model(free[a], free[b]);
            }
            const Eigen::LLT<Matrix> llt(reduced);
            if (llt.info() == Eigen::Success) {
                const Vector step = llt.solve(rhs);
                for (int a = 0; a < f; ++a) direction(free[a]) = step(a);
            }
        }

        bool accepted = false;
        double alpha = 1.0;
        for (int backtrack = 0; backtrack < 60 && !accepted; ++backtrack, alpha *= options.shrink) {
            const Vector trial = project(u + alpha * direction);
            auto [trial_value, trial_grad] = soft_objective(trial, problem);
            // Sufficient decrease along the projection arc: -grad . (trial - u) is positive
            // whenever direction is a descent direction for the reduced problem.
            const double predicted = grad.dot(trial - u);
            if (predicted < 0.0 &&
                trial_value <= value + options.armijo_c * predicted + kRoundoff * std::abs(value)) {
                u = trial;
                value = trial_value;
                grad = std::move(trial_grad);
                accepted = true;
            }
        }
        if (!accepted) break;
        report.objective_trace.push_back(value);
    }

    report.u_opt = u;
    report.objective = value;
    report.kkt_residual = projected_gradient_norm(u, grad, qp.lo, qp.hi);
    for (int i = 0; i < n; ++i) {
        if (u(i) <= qp.lo(i)) report.active_lo.push_back(i);
        else if (u(i) >= qp.hi(i)) report.active_hi.push_back(i);
    }
    return report;
}

}  // namespace d2oc
