#include "d2oc/qp.hpp"

#include "d2oc/error.hpp"

#include <algorithm>
#include <cmath>

namespace d2oc {

std::pair<Vector, Vector> stacked_bounds(const AgentModel& model, int horizon) {
    return {model.u_min().replicate(horizon, 1), model.u_max().replicate(horizon, 1)};
}

QpProblem assemble_qp(const StackedPredictor& pred, const Vector& x, const BarycenterTrack& track,
                      double spread, const Matrix& R, const Vector& lo, const Vector& hi) {
    const int dH = pred.d * pred.horizon;
    const int mH = pred.m * pred.horizon;
    if (x.size() != pred.phi.cols()) throw Error(ErrorCode::DimensionMismatch, "state does not match predictor");
    if (track.omega.size() != pred.horizon)
        throw Error(ErrorCode::DimensionMismatch, "barycenter track length differs from the horizon");
    if (R.rows() != mH || R.cols() != mH) throw Error(ErrorCode::DimensionMismatch, "R must be mH x mH");
    if (lo.size() != mH || hi.size() != mH) throw Error(ErrorCode::DimensionMismatch, "bounds must have mH entries");
    if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw Error(ErrorCode::NotSPD, "input weight R is not symmetric");
    if (Eigen::LLT<Matrix>(R).info() != Eigen::Success)
        throw Error(ErrorCode::NotSPD, "input weight R is not positive definite");

    const Vector qbar = track.stacked();
    if (qbar.size() != dH) throw Error(ErrorCode::DimensionMismatch, "barycenter dimension differs from output");
    const Vector omega = track.omega_diagonal();
    const Matrix weighted_theta = omega.asDiagonal() * pred.theta;
    const Vector weighted_offset = omega.asDiagonal() * (pred.phi * x - qbar);

    QpProblem qp;
    qp.hessian = 2.0 * (weighted_theta.transpose() * weighted_theta + R);
    qp.hessian = 0.5 * (qp.hessian + qp.hessian.transpose()).eval();
    qp.linear = 2.0 * weighted_theta.transpose() * weighted_offset;
    qp.constant = weighted_offset.squaredNorm() + spread;
    qp.lo = lo;
    qp.hi = hi;
    if (Eigen::LLT<Matrix>(qp.hessian).info() != Eigen::Success)
        throw Error(ErrorCode::NotSPD, "assembled Hessian is not positive definite");
    return qp;
}

Vector unconstrained_optimum(const QpProblem& qp) {
    Eigen::LLT<Matrix> llt(qp.hessian);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotSPD, "Hessian is not positive definite");
    return -llt.solve(qp.linear);
}

double projected_gradient_norm(const Vector& U, const Vector& grad, const Vector& lo, const Vector& hi) {
    if (U.size() == 0) return 0.0;
    const Vector projected = (U - grad).cwiseMax(lo).cwiseMin(hi);
    return (U - projected).cwiseAbs().maxCoeff();
}

namespace {

enum class Bound : signed char { Lower = -1, Free = 0, Upper = 1 };

void fill_active_sets(const std::vector<Bound>& state, SolveReport& report) {
    report.active_lo.clear();
    report.active_hi.clear();
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state[i] == Bound::Lower) report.active_lo.push_back(static_cast<int>(i));
        if (state[i] == Bound::Upper) report.active_hi.push_back(static_cast<int>(i));
    }
}

void finish(const QpProblem& qp, const Vector& u, const std::vector<Bound>& state, SolveReport& report) {
    report.u_opt = u;
    report.objective = qp.value(u);
    report.kkt_residual = projected_gradient_norm(u, qp.gradient(u), qp.lo, qp.hi);
    fill_active_sets(state, report);
}

}  // namespace

SolveReport solve_box_qp(const QpProblem& qp, const std::optional<Vector>& start, const BoxQpOptions& options) {
    const int n = qp.size();
    if (qp.hessian.rows() != n || qp.hessian.cols() != n || qp.lo.size() != n || qp.hi.size() != n)
        throw Error(ErrorCode::DimensionMismatch, "inconsistent QP dimensions");
    if ((qp.lo.array() > qp.hi.array()).any()) throw Error(ErrorCode::DimensionMismatch, "empty box");

    SolveReport report;
    std::vector<Bound> state(n, Bound::Free);

    Vector u;
    if (!start) {
        u = unconstrained_optimum(qp);
        if ((u.array() >= qp.lo.array()).all() && (u.array() <= qp.hi.array()).all()) {
            finish(qp, u, state, report);
            report.objective_trace.push_back(report.objective);
            return report;
        }
    } else {
        if (start->size() != n) throw Error(ErrorCode::DimensionMismatch, "start point has the wrong size");
        u = *start;
    }
    u = u.cwiseMax(qp.lo).cwiseMin(qp.hi);
    for (int i = 0; i < n; ++i) {
        if (u(i) == qp.lo(i)) state[i] = Bound::Lower;
        else if (u(i) == qp.hi(i)) state[i] = Bound::Upper;
    }
    report.objective_trace.push_back(qp.value(u));

    bool free_optimal = false;
    for (report.iterations = 0; report.iterations < options.max_iterations; ++report.iterations) {
        const Vector grad = qp.gradient(u);
        if (free_optimal) {
            // Multipliers of the working bounds: lambda = g at lower, -g at upper.
            int release = -1;
            double worst = -0.5 * options.kkt_tol;
            for (int i = 0; i < n; ++i) {
                const double lambda = state[i] == Bound::Lower ? grad(i)
                                      : state[i] == Bound::Upper ? -grad(i) : 0.0;
                if (lambda < worst) {
                    worst = lambda;
                    release = i;
                }
            }
            if (release < 0) {
                finish(qp, u, state, report);
                return report;
            }
            state[release] = Bound::Free;
            free_optimal = false;
            continue;
        }

        std::vector<int> free;
        for (int i = 0; i < n; ++i)
            if (state[i] == Bound::Free) free.push_back(i);
        if (free.empty()) {
            free_optimal = true;
            continue;
        }
        const auto nf = static_cast<Eigen::Index>(free.size());
        Matrix Hff(nf, nf);
        Vector gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
            gf(a) = grad(free[a]);
            for (Eigen::Index b = 0; b < nf; ++b) Hff(a, b) = qp.hessian(free[a], free[b]);
        }
        const Vector p = -Hff.llt().solve(gf);

        double alpha = 1.0;
        int blocking = -1;
        for (Eigen::Index a = 0; a < nf; ++a) {
            const int i = free[a];
            double limit = alpha;
            if (p(a) < 0.0) limit = (qp.lo(i) - u(i)) / p(a);
            else if (p(a) > 0.0) limit = (qp.hi(i) - u(i)) / p(a);
            if (limit < alpha) {
                alpha = std::max(limit, 0.0);
                blocking = i;
            }
        }
        for (Eigen::Index a = 0; a < nf; ++a) u(free[a]) += alpha * p(a);
        if (blocking >= 0) {
            const Eigen::Index a = std::find(free.begin(), free.end(), blocking) - free.begin();
            const bool upper = p(a) > 0.0;
            u(blocking) = upper ? qp.hi(blocking) : qp.lo(blocking);
            state[blocking] = upper ? Bound::Upper : Bound::Lower;
        } else {
            free_optimal = true;
        }
        u = u.cwiseMax(qp.lo).cwiseMin(qp.hi);
        report.objective_trace.push_back(qp.value(u));
    }

    report.status = SolveStatus::MaxIterations;
    finish(qp, u, state, report);
    return report;
}

}  // namespace d2oc
