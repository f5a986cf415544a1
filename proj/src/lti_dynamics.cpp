#include "d2oc/lti_dynamics.hpp"

#include "d2oc/error.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace d2oc {

namespace {

constexpr double kEigTolerance = 1e-9;

std::string shape(const Matrix& M) {
    return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

}  // namespace

AgentModel::AgentModel(Matrix A, Matrix B, Matrix C, Vector u_min, Vector u_max)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)),
      u_min_(std::move(u_min)), u_max_(std::move(u_max)) {
    if (A_.rows() == 0 || A_.rows() != A_.cols())
        throw Error(ErrorCode::DimensionMismatch, "A must be square and non-empty, got " + shape(A_));
    if (B_.rows() != A_.rows() || B_.cols() == 0)
        throw Error(ErrorCode::DimensionMismatch, "B must be n x m, got " + shape(B_));
    if (C_.cols() != A_.rows() || C_.rows() == 0)
        throw Error(ErrorCode::DimensionMismatch, "C must be d x n, got " + shape(C_));
    if (u_min_.size() != B_.cols() || u_max_.size() != B_.cols())
        throw Error(ErrorCode::DimensionMismatch, "input bounds must have m entries");
    for (Eigen::Index i = 0; i < u_min_.size(); ++i) {
        if (!(u_min_(i) < u_max_(i)))
            throw Error(ErrorCode::ConfigError,
                        "u_min must be strictly below u_max on channel " + std::to_string(i));
    }
    if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite())
        throw Error(ErrorCode::DimensionMismatch, "model matrices must be finite");
}

AgentModel::AgentModel(Matrix A, Matrix B, Matrix C)
    : AgentModel(A, B, C,
                 Vector::Constant(B.cols(), -std::numeric_limits<double>::infinity()),
                 Vector::Constant(B.cols(), std::numeric_limits<double>::infinity())) {}

Matrix AgentModel::markov(int power) const {
    Matrix M = B_;
    for (int i = 0; i < power; ++i) M = A_ * M;
    return C_ * M;
}

int relative_degree(const AgentModel& model, int r_max, double tol) {
    if (r_max < 1) throw Error(ErrorCode::DimensionMismatch, "r_max must be >= 1");
    Matrix AkB = model.B();
    for (int r = 1; r <= r_max; ++r) {
        const Matrix block = model.C() * AkB;
        // Induced infinity norm: max absolute row sum.
        if (block.cwiseAbs().rowwise().sum().maxCoeff() > tol) return r;
        AkB = model.A() * AkB;
    }
    throw Error(ErrorCode::NoRelativeDegree,
                "output does not respond to input within " + std::to_string(r_max) + " steps");
}

StepResult step(const AgentModel& model, const AgentState& state, const Vector& u) {
    if (state.x.size() != model.n())
        throw Error(ErrorCode::DimensionMismatch, "state has " + std::to_string(state.x.size()) +
                                                      " entries, model expects " + std::to_string(model.n()));
    if (u.size() != model.m())
        throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(u.size()) +
                                                      " entries, model expects " + std::to_string(model.m()));
    const Vector clipped = u.cwiseMax(model.u_min()).cwiseMin(model.u_max());
    StepResult result;
    result.clamped = (clipped - u).cwiseAbs().maxCoeff() > 0.0;
    result.state.x = model.A() * state.x + model.B() * clipped;
    result.state.k = state.k + 1;
    return result;
}

Vector output(const AgentModel& model, const AgentState& state) {
    if (state.x.size() != model.n())
        throw Error(ErrorCode::DimensionMismatch, "state dimension does not match model");
    return model.C() * state.x;
}

StackedPredictor build_predictor(const AgentModel& model, int rel_degree, int horizon) {
    if (rel_degree < 1 || horizon < 1)
        throw Error(ErrorCode::DimensionMismatch, "relative degree and horizon must be positive");
    const int d = model.d(), m = model.m(), n = model.n();

    StackedPredictor pred;
    pred.horizon = horizon;
    pred.rel_degree = rel_degree;
    pred.d = d;
    pred.m = m;
    pred.theta = Matrix::Zero(d * horizon, m * horizon);
    pred.phi = Matrix::Zero(d * horizon, n);

    // markov[s] = C A^{r-1+s} B for s = 0..H-1; block (a, b) of theta is markov[a-b].
    std::vector<Matrix> markov;
    markov.reserve(horizon);
    Matrix AkB = model.B();
    for (int i = 0; i < rel_degree - 1; ++i) AkB = model.A() * AkB;
    for (int s = 0; s < horizon; ++s) {
        markov.push_back(model.C() * AkB);
        AkB = model.A() * AkB;
    }
    for (int a = 0; a < horizon; ++a)
        for (int b = 0; b <= a; ++b) pred.theta.block(a * d, b * m, d, m) = markov[a - b];

    Matrix CAk = model.C();
    for (int i = 0; i < rel_degree; ++i) CAk = CAk * model.A();
    for (int h = 0; h < horizon; ++h) {
        pred.phi.block(h * d, 0, d, n) = CAk;
        CAk = CAk * model.A();
    }
    return pred;
}

int controllability_rank(const AgentModel& model, double tol) {
    const int n = model.n(), m = model.m();
    Matrix ctrb(n, n * m);
    Matrix AkB = model.B();
    for (int i = 0; i < n; ++i) {
        ctrb.block(0, i * m, n, m) = AkB;
        AkB = model.A() * AkB;
    }
    Eigen::FullPivLU<Matrix> lu(ctrb);
    // Relative threshold so that scaling by T^k in discretized chains does not hide rank.
    lu.setThreshold(tol);
    return static_cast<int>(lu.rank());
}

double spectral_radius(const Matrix& A) {
    Eigen::EigenSolver<Matrix> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

ModelDiagnostics diagnose(const AgentModel& model, int r_max) {
    ModelDiagnostics diag;
    diag.n = model.n();
    diag.m = model.m();
    diag.d = model.d();
    try {
        diag.rel_degree = relative_degree(model, r_max);
    } catch (const Error&) {
        diag.rel_degree = 0;
    }
    diag.controllability_rank = controllability_rank(model);
    diag.controllable = diag.controllability_rank == model.n();
    diag.spectral_radius = spectral_radius(model.A());
    diag.marginally_stable = diag.spectral_radius <= 1.0 + kEigTolerance;
    return diag;
}

}  // namespace d2oc
