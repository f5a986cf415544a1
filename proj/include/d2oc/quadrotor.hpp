#pragma once

#include "d2oc/lti_dynamics.hpp"

namespace d2oc {

struct QuadrotorParams {
    double mass = 1.0;           // kg
    double gravity = 9.81;       // m/s^2
    double inertia_xx = 0.01;    // kg m^2
    double inertia_yy = 0.01;
    double thrust_bandwidth = 10.0;  // rad/s, second-order thrust actuator
    double thrust_damping = 0.7;
    // Near-hover vehicle with an inner attitude loop: linear drag on velocity,
    // rate damping and attitude stiffness. Zero all three for the bare airframe,
    // which a short-horizon position controller cannot hold under torque limits.
    double drag = 2.0;                 // 1/s
    double rate_damping = 10.0;        // 1/s
    double attitude_stiffness = 25.0;  // 1/s^2
    // Input box, symmetric about hover.
    double max_thrust_command = 3.0;  // N deviation from hover
    double max_torque = 0.1;          // N m
};

/**
 * Small-angle hover linearization of a quadrotor, Euler-discretized at T.
 *
 * State (12): position x y z, velocity vx vy vz, roll, pitch, roll rate,
 * pitch rate, thrust deviation, thrust deviation rate.
 * Input (3):  commanded thrust deviation, roll torque, pitch torque.
 * Output (3): position.
 *
 * Lateral motion is the usual torque -> rate -> angle -> velocity -> position
 * chain. Collective thrust passes through a second-order actuator, which makes
 * the vertical chain the same length, so every position output has relative
 * degree 4. Yaw is decoupled from position at hover and is left out.
 */
AgentModel build_quadrotor_model(double T, const QuadrotorParams& params = {});

}  // namespace d2oc
