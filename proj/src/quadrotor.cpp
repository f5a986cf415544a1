#include "d2oc/quadrotor.hpp"

#include "d2oc/error.hpp"

namespace d2oc {

AgentModel build_quadrotor_model(double T, const QuadrotorParams& p) {
    if (!(T > 0.0)) throw Error(ErrorCode::ConfigError, "sampling period must be positive");

    enum : int { X, Y, Z, VX, VY, VZ, ROLL, PITCH, ROLL_RATE, PITCH_RATE, THRUST, THRUST_RATE, N };
    enum : int { U_THRUST, U_ROLL, U_PITCH, M };

    Matrix Ac = Matrix::Zero(N, N);
    Matrix Bc = Matrix::Zero(N, M);
    Ac(X, VX) = 1.0;
    Ac(Y, VY) = 1.0;
    Ac(Z, VZ) = 1.0;
    Ac(VX, PITCH) = p.gravity;
    Ac(VY, ROLL) = -p.gravity;
    Ac(VZ, THRUST) = 1.0 / p.mass;
    Ac(VX, VX) = Ac(VY, VY) = Ac(VZ, VZ) = -p.drag;
    Ac(ROLL_RATE, ROLL_RATE) = Ac(PITCH_RATE, PITCH_RATE) = -p.rate_damping;
    Ac(ROLL_RATE, ROLL) = Ac(PITCH_RATE, PITCH) = -p.attitude_stiffness;
    Ac(ROLL, ROLL_RATE) = 1.0;
    Ac(PITCH, PITCH_RATE) = 1.0;
    Ac(THRUST, THRUST_RATE) = 1.0;
    const double w = p.thrust_bandwidth;
    Ac(THRUST_RATE, THRUST) = -w * w;
    Ac(THRUST_RATE, THRUST_RATE) = -2.0 * p.thrust_damping * w;

    Bc(ROLL_RATE, U_ROLL) = 1.0 / p.inertia_xx;
    Bc(PITCH_RATE, U_PITCH) = 1.0 / p.inertia_yy;
    Bc(THRUST_RATE, U_THRUST) = w * w;

    Matrix C = Matrix::Zero(3, N);
    C(0, X) = 1.0;
    C(1, Y) = 1.0;
    C(2, Z) = 1.0;

    Vector u_max(M);
    u_max << p.max_thrust_command, p.max_torque, p.max_torque;

    return AgentModel(Matrix::Identity(N, N) + T * Ac, T * Bc, C, -u_max, u_max);
}

}  // namespace d2oc
