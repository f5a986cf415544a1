#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace d2oc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Discrete-time LTI plant
 *
 *   x(k+1) = A x(k) + B u(k),   y(k) = C x(k)
 *
 * with a per-step input box [u_min, u_max]. Bounds may be infinite.
 * Construction validates shapes and the box; controllability and stability
 * are reported by diagnose() rather than enforced, so that check-model can
 * describe models that violate them.
 */
class AgentModel {
public:
    AgentModel() = default;
    AgentModel(Matrix A, Matrix B, Matrix C, Vector u_min, Vector u_max);
    // Unbounded inputs.
    AgentModel(Matrix A, Matrix B, Matrix C);

    const Matrix& A() const { return A_; }
    const Matrix& B() const { return B_; }
    const Matrix& C() const { return C_; }
    const Vector& u_min() const { return u_min_; }
    const Vector& u_max() const { return u_max_; }

    int n() const { return static_cast<int>(A_.rows()); }
    int m() const { return static_cast<int>(B_.cols()); }
    int d() const { return static_cast<int>(C_.rows()); }

    bool bounded() const { return u_min_.allFinite() && u_max_.allFinite(); }

    // C A^power B
    Matrix markov(int power) const;

private:
    Matrix A_, B_, C_;
    Vector u_min_, u_max_;
};

struct AgentState {
    Vector x;
    std::int64_t k = 0;
};

struct StepResult {
    AgentState state;
    // Set when u had to be clipped into the box; upstream should never cause this.
    bool clamped = false;
};

/// Smallest r <= r_max with ||C A^{r-1} B||_inf > tol. Throws NoRelativeDegree.
int relative_degree(const AgentModel& model, int r_max = 10, double tol = 1e-10);

StepResult step(const AgentModel& model, const AgentState& state, const Vector& u);

Vector output(const AgentModel& model, const AgentState& state);

/**
 * Affine map from stacked inputs U = [u(k); ...; u(k+H-1)] to stacked outputs
 * Y = [y(k+r); ...; y(k+r+H-1)] = theta U + phi x(k).
 */
struct StackedPredictor {
    Matrix theta;  // (dH) x (mH), block lower-triangular Toeplitz
    Matrix phi;    // (dH) x n
    int horizon = 0;
    int rel_degree = 0;
    int d = 0;
    int m = 0;

    Vector predict(const Vector& U, const Vector& x) const { return theta * U + phi * x; }
};

StackedPredictor build_predictor(const AgentModel& model, int rel_degree, int horizon);

int controllability_rank(const AgentModel& model, double tol = 1e-9);

double spectral_radius(const Matrix& A);

struct ModelDiagnostics {
    int n = 0, m = 0, d = 0;
    int rel_degree = 0;  // 0 when none found within r_max
    int controllability_rank = 0;
    bool controllable = false;
    double spectral_radius = 0.0;
    bool marginally_stable = false;  // eigenvalue moduli only; Jordan structure is not inspected
};

ModelDiagnostics diagnose(const AgentModel& model, int r_max = 10);

}  // namespace d2oc
