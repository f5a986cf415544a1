#pragma once

#include "d2oc/connectivity.hpp"
#include "d2oc/lti_dynamics.hpp"
#include "d2oc/qp.hpp"
#include "d2oc/transport.hpp"

#include <random>

namespace testing {

using d2oc::Matrix;
using d2oc::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = normal(rng);
    return M;
}

inline Vector random_vector(std::mt19937_64& rng, int size, double scale = 1.0) {
    return random_matrix(rng, size, 1, scale);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// A random plant rescaled to spectral radius 0.9 so long propagations stay finite.
inline d2oc::AgentModel random_stable_model(std::mt19937_64& rng, int n, int m, int d, double bound = 1.0) {
    Matrix A = random_matrix(rng, n, n);
    const double rho = d2oc::spectral_radius(A);
    if (rho > 0) A *= 0.9 / rho;
    return d2oc::AgentModel(A, random_matrix(rng, n, m), random_matrix(rng, d, n), Vector::Constant(m, -bound),
                            Vector::Constant(m, bound));
}

inline d2oc::AgentModel integrator(int dim, double T, double bound) {
    return d2oc::AgentModel(Matrix::Identity(dim, dim), T * Matrix::Identity(dim, dim), Matrix::Identity(dim, dim),
                            Vector::Constant(dim, -bound), Vector::Constant(dim, bound));
}

inline d2oc::AgentModel double_integrator_1d(double T) {
    Matrix A(2, 2), B(2, 1), C(1, 2);
    A << 1, T, 0, 1;
    B << 0, T;
    C << 1, 0;
    return d2oc::AgentModel(A, B, C, Vector::Constant(1, -1.0), Vector::Constant(1, 1.0));
}

// SPD matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(std::mt19937_64& rng, int n, double lo = 0.5, double hi = 5.0) {
    const Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, n, n));
    const Matrix Q = qr.householderQ();
    Vector eig(n);
    for (int i = 0; i < n; ++i) eig(i) = uniform(rng, lo, hi);
    return Q * eig.asDiagonal() * Q.transpose();
}

inline d2oc::QpProblem random_box_qp(std::mt19937_64& rng, int n, double box = 1.0) {
    d2oc::QpProblem qp;
    qp.hessian = random_spd(rng, n);
    qp.linear = random_vector(rng, n, 3.0);
    qp.lo = Vector::Constant(n, -box);
    qp.hi = Vector::Constant(n, box);
    return qp;
}

// Random tracking problem with StayWithin terms, which keep the objective convex.
// The neighbor forecast is placed outside the set the agent can reach within the box
// (sum-of-columns bound around the zero-input output), so the norm's kink at zero
// distance is never attained and the objective is smooth on the feasible set.
inline d2oc::SoftProblem random_soft_problem(std::mt19937_64& rng, int m, int H, double kappa, double eta) {
    const int d = m;
    const d2oc::AgentModel model = random_stable_model(rng, 3 * m, m, d, 2.0);
    const int r = d2oc::relative_degree(model);
    const d2oc::StackedPredictor pred = d2oc::build_predictor(model, r, H);
    d2oc::BarycenterTrack track;
    for (int h = 0; h < H; ++h) track.qbar.push_back(random_vector(rng, d, 5.0));
    track.omega = Vector::Ones(H);
    const Vector x = random_vector(rng, 3 * m);
    const auto [lo, hi] = d2oc::stacked_bounds(model, H);
    d2oc::SoftProblem problem{d2oc::assemble_qp(pred, x, track, 0.0, 0.1 * Matrix::Identity(m * H, m * H), lo, hi), {}};
    d2oc::NeighborForecast neighbor;
    for (int h = 0; h < H; ++h) {
        const double reach = d2oc::reachable_radius(model, r, r + h, d2oc::RadiusBound::SumColumns);
        Vector dir = random_vector(rng, d);
        dir /= dir.norm();
        const Vector nominal = pred.phi.middleRows(h * d, d) * x;
        neighbor.yhat.push_back(nominal + (reach + uniform(rng, 0.2, 4.0)) * dir);
    }
    neighbor.radius = Vector::Constant(H, 0.5);
    d2oc::PenaltySpec spec;
    spec.kappa = kappa;
    spec.eta = eta;
    spec.r_comm = uniform(rng, 1.0, 10.0);
    d2oc::add_connectivity_terms(problem, pred, x, neighbor, spec);
    return problem;
}

}  // namespace testing
