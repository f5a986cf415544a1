#pragma once

#include "d2oc/lti_dynamics.hpp"

#include <cstdint>
#include <vector>

namespace d2oc {

/// Reference point cloud q_j (one row per sample) with probability masses beta_j.
class ReferenceMap {
public:
    ReferenceMap() = default;
    // Uniform masses 1/N.
    explicit ReferenceMap(Matrix samples);
    // Masses are normalized to sum to one; all must be non-negative with a positive total.
    ReferenceMap(Matrix samples, Vector weights);

    const Matrix& samples() const { return samples_; }
    const Vector& weights() const { return weights_; }
    int size() const { return static_cast<int>(samples_.rows()); }
    int dim() const { return static_cast<int>(samples_.cols()); }
    Vector point(int j) const { return samples_.row(j).transpose(); }

private:
    Matrix samples_;
    Vector weights_;
};

/// Agent-local remaining coverage demand per sample. Entries only ever shrink.
struct AgentWeightLedger {
    Vector residual;

    static AgentWeightLedger from_map(const ReferenceMap& map) { return {map.weights()}; }
    double mass() const { return residual.sum(); }
};

struct SelectionParams {
    int max_samples = 10;         // K
    double weight_floor = 1e-4;   // samples at or below this residual are considered covered
    double length_scale = 7.5;    // lambda_sel in exp(-dist / lambda_sel)
};

/// Selected sample indices and transport weights for each horizon step.
struct LocalSelection {
    std::vector<std::vector<int>> indices;
    std::vector<std::vector<double>> pi;

    int horizon() const { return static_cast<int>(indices.size()); }
};

/// Weighted barycenters and their Omega scales, one per horizon step.
struct BarycenterTrack {
    std::vector<Vector> qbar;
    Vector omega;

    // [qbar_0; ...; qbar_{H-1}]
    Vector stacked() const;
    // Diagonal of blkdiag(omega_h I_d).
    Vector omega_diagonal() const;
};

LocalSelection select_local_samples(const Vector& pos, const AgentWeightLedger& ledger,
                                    const ReferenceMap& map, const SelectionParams& params,
                                    int horizon = 1);

BarycenterTrack barycenter(const LocalSelection& selection, const ReferenceMap& map);

/// Sum over steps h and selected j of pi_j ||y_h - q_j||^2, for stacked Y = [y_0; ...].
double local_cost_direct(const Vector& Y, const LocalSelection& selection, const ReferenceMap& map);

/// Sum over steps of C(h) = sum_j pi_j ||q_j - qbar_h||^2, the part of the local cost
/// that does not depend on Y.
double barycenter_spread(const LocalSelection& selection, const ReferenceMap& map,
                         const BarycenterTrack& track);

/// Exact squared W2 between two uniform empirical measures on the line.
double wasserstein2_squared_1d(std::vector<double> a, std::vector<double> b);

/// Sliced W2 over the given unit directions (one per column). Point sets are row-major M x d.
double sliced_wasserstein(const Matrix& P, const Matrix& Q, const Matrix& directions);

/// Monte-Carlo sliced W2 with L directions drawn uniformly on the sphere from `seed`.
double sliced_wasserstein(const Matrix& P, const Matrix& Q, int projections, std::uint64_t seed);

Matrix random_directions(int dim, int count, std::uint64_t seed);

/// Discrete W2 between weighted point sets by solving the transport LP. Small inputs only
/// (M * N <= 400); meant as a reference for the faster metrics.
double exact_wasserstein2_small(const Matrix& P, const Vector& a, const Matrix& Q, const Vector& b);

}  // namespace d2oc
