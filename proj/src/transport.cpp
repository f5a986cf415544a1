#include "d2oc/transport.hpp"

#include "d2oc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace d2oc {

ReferenceMap::ReferenceMap(Matrix samples)
    : ReferenceMap(samples, Vector::Constant(samples.rows(), 1.0)) {}

ReferenceMap::ReferenceMap(Matrix samples, Vector weights)
    : samples_(std::move(samples)), weights_(std::move(weights)) {
    if (samples_.rows() == 0) throw Error(ErrorCode::EmptyMap, "reference map has no samples");
    if (weights_.size() != samples_.rows())
        throw Error(ErrorCode::LengthMismatch, "one weight per sample is required");
    if (!samples_.allFinite()) throw Error(ErrorCode::ConfigError, "sample coordinates must be finite");
    if ((weights_.array() < 0.0).any() || !weights_.allFinite())
        throw Error(ErrorCode::ConfigError, "sample weights must be finite and non-negative");
    const double total = weights_.sum();
    if (!(total > 0.0)) throw Error(ErrorCode::ConfigError, "sample weights sum to zero");
    weights_ /= total;
}

Vector BarycenterTrack::stacked() const {
    if (qbar.empty()) return {};
    const auto d = qbar.front().size();
    Vector out(d * static_cast<Eigen::Index>(qbar.size()));
    for (std::size_t h = 0; h < qbar.size(); ++h) out.segment(static_cast<Eigen::Index>(h) * d, d) = qbar[h];
    return out;
}

Vector BarycenterTrack::omega_diagonal() const {
    if (qbar.empty()) return {};
    const auto d = qbar.front().size();
    Vector out(d * omega.size());
    for (Eigen::Index h = 0; h < omega.size(); ++h) out.segment(h * d, d).setConstant(omega(h));
    return out;
}

LocalSelection select_local_samples(const Vector& pos, const AgentWeightLedger& ledger,
                                    const ReferenceMap& map, const SelectionParams& params,
                                    int horizon) {
    const int N = map.size();
    if (N == 0) throw Error(ErrorCode::EmptyMap, "cannot select from an empty map");
    if (params.max_samples < 1 || horizon < 1 || !(params.length_scale > 0.0))
        throw Error(ErrorCode::ConfigError, "selection needs K >= 1, H >= 1 and a positive length scale");
    if (pos.size() != map.dim())
        throw Error(ErrorCode::DimensionMismatch, "position dimension does not match the map");
    if (ledger.residual.size() != N)
        throw Error(ErrorCode::LengthMismatch, "ledger length does not match the map");

    std::vector<double> dist(N);
    for (int j = 0; j < N; ++j) dist[j] = (map.samples().row(j).transpose() - pos).norm();

    std::vector<int> candidates;
    std::vector<double> score(N, 0.0);
    for (int j = 0; j < N; ++j) {
        if (ledger.residual(j) > params.weight_floor) {
            candidates.push_back(j);
            score[j] = ledger.residual(j) * std::exp(-dist[j] / params.length_scale);
        }
    }

    std::vector<int> chosen;
    std::vector<double> pi;
    if (!candidates.empty()) {
        const auto keep = std::min<std::size_t>(candidates.size(), params.max_samples);
        std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(),
                          [&](int a, int b) { return score[a] != score[b] ? score[a] > score[b] : a < b; });
        chosen.assign(candidates.begin(), candidates.begin() + keep);
        double total = 0.0;
        for (int j : chosen) total += ledger.residual(j);
        for (int j : chosen) pi.push_back(ledger.residual(j) / total);
    } else {
        // Everything is covered; head for the nearest samples with equal weight.
        std::vector<int> order(N);
        std::iota(order.begin(), order.end(), 0);
        const auto keep = std::min<std::size_t>(N, params.max_samples);
        std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                          [&](int a, int b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });
        chosen.assign(order.begin(), order.begin() + keep);
        pi.assign(keep, 1.0 / static_cast<double>(keep));
    }

    LocalSelection sel;
    sel.indices.assign(horizon, chosen);
    sel.pi.assign(horizon, pi);
    return sel;
}

BarycenterTrack barycenter(const LocalSelection& selection, const ReferenceMap& map) {
    const int H = selection.horizon();
    if (H == 0 || selection.pi.size() != selection.indices.size())
        throw Error(ErrorCode::DimensionMismatch, "selection must cover at least one step");
    BarycenterTrack track;
    track.omega.resize(H);
    for (int h = 0; h < H; ++h) {
        const auto& idx = selection.indices[h];
        const auto& pi = selection.pi[h];
        if (idx.size() != pi.size()) throw Error(ErrorCode::LengthMismatch, "indices and weights differ in length");
        Vector weighted = Vector::Zero(map.dim());
        double total = 0.0;
        for (std::size_t s = 0; s < idx.size(); ++s) {
            if (idx[s] < 0 || idx[s] >= map.size())
                throw Error(ErrorCode::DimensionMismatch, "sample index out of range");
            weighted += pi[s] * map.point(idx[s]);
            total += pi[s];
        }
        if (!(total > 0.0))
            throw Error(ErrorCode::DegenerateWeights, "transport weights sum to zero at step " + std::to_string(h));
        track.qbar.push_back(weighted / total);
        track.omega(h) = std::sqrt(total);
    }
    return track;
}

double local_cost_direct(const Vector& Y, const LocalSelection& selection, const ReferenceMap& map) {
    const int H = selection.horizon();
    const int d = map.dim();
    if (Y.size() != static_cast<Eigen::Index>(d) * H)
        throw Error(ErrorCode::DimensionMismatch, "stacked output must have d*H entries");
    double cost = 0.0;
    for (int h = 0; h < H; ++h) {
        const auto y = Y.segment(h * d, d);
        for (std::size_t s = 0; s < selection.indices[h].size(); ++s)
            cost += selection.pi[h][s] * (y - map.point(selection.indices[h][s])).squaredNorm();
    }
    return cost;
}

double barycenter_spread(const LocalSelection& selection, const ReferenceMap& map,
                         const BarycenterTrack& track) {
    double spread = 0.0;
    for (int h = 0; h < selection.horizon(); ++h)
        for (std::size_t s = 0; s < selection.indices[h].size(); ++s)
            spread += selection.pi[h][s] * (map.point(selection.indices[h][s]) - track.qbar[h]).squaredNorm();
    return spread;
}

double wasserstein2_squared_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySet, "1D transport needs non-empty sets");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // Integrate (F^-1 - G^-1)^2 over [0, 1]; quantile breakpoints are i/M and j/N,
    // tracked exactly in units of 1/(M N).
    const auto M = static_cast<std::int64_t>(a.size());
    const auto N = static_cast<std::int64_t>(b.size());
    std::int64_t i = 0, j = 0, at = 0;
    double acc = 0.0;
    while (i < M && j < N) {
        const std::int64_t next = std::min((i + 1) * N, (j + 1) * M);
        const double diff = a[i] - b[j];
        acc += static_cast<double>(next - at) * diff * diff;
        at = next;
        if ((i + 1) * N == next) ++i;
        if ((j + 1) * M == next) ++j;
    }
    return acc / static_cast<double>(M * N);
}

Matrix random_directions(int dim, int count, std::uint64_t seed) {
    if (dim < 1 || count < 1) throw Error(ErrorCode::ConfigError, "need a positive dimension and projection count");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix dirs(dim, count);
    for (int c = 0; c < count; ++c) {
        Vector v(dim);
        do {
            for (int i = 0; i < dim; ++i) v(i) = normal(rng);
        } while (v.norm() < 1e-12);
        dirs.col(c) = v / v.norm();
    }
    return dirs;
}

double sliced_wasserstein(const Matrix& P, const Matrix& Q, const Matrix& directions) {
    if (P.rows() == 0 || Q.rows() == 0) throw Error(ErrorCode::EmptySet, "sliced Wasserstein needs non-empty sets");
    if (P.cols() != Q.cols() || directions.rows() != P.cols())
        throw Error(ErrorCode::DimensionMismatch, "point sets and directions must share a dimension");
    if (directions.cols() == 0) throw Error(ErrorCode::ConfigError, "at least one projection is required");
    double total = 0.0;
    for (Eigen::Index l = 0; l < directions.cols(); ++l) {
        const Vector pa = P * directions.col(l);
        const Vector qa = Q * directions.col(l);
        total += wasserstein2_squared_1d(std::vector<double>(pa.data(), pa.data() + pa.size()),
                                         std::vector<double>(qa.data(), qa.data() + qa.size()));
    }
    return std::sqrt(total / static_cast<double>(directions.cols()));
}

double sliced_wasserstein(const Matrix& P, const Matrix& Q, int projections, std::uint64_t seed) {
    if (P.rows() == 0 || Q.rows() == 0) throw Error(ErrorCode::EmptySet, "sliced Wasserstein needs non-empty sets");
    return sliced_wasserstein(P, Q, random_directions(static_cast<int>(P.cols()), projections, seed));
}

namespace {

// Dense two-phase simplex with Bland's rule for min c^T x, A x = b, x >= 0, b >= 0.
// Adequate for the few hundred variables of a small transport problem.
class DenseSimplex {
public:
    DenseSimplex(const Matrix& A, const Vector& b, const Vector& c)
        : rows_(static_cast<int>(A.rows())), vars_(static_cast<int>(A.cols())), cost_(c) {
        const int cols = vars_ + rows_;
        tab_ = Matrix::Zero(rows_ + 1, cols + 1);
        tab_.topLeftCorner(rows_, vars_) = A;
        tab_.block(0, vars_, rows_, rows_).setIdentity();
        tab_.col(cols).head(rows_) = b;
        basis_.resize(rows_);
        std::iota(basis_.begin(), basis_.end(), vars_);
    }

    double solve() {
        // Phase 1: minimise the sum of artificials.
        const int cols = vars_ + rows_;
        tab_.row(rows_).setZero();
        for (int i = 0; i < rows_; ++i) {
            tab_.row(rows_).head(vars_) -= tab_.row(i).head(vars_);
            tab_(rows_, cols) -= tab_(i, cols);
        }
        iterate(cols);
        if (-tab_(rows_, cols) > 1e-9) throw Error(ErrorCode::InfeasibleMarginals, "transport LP is infeasible");
        for (int i = 0; i < rows_; ++i) {
            if (basis_[i] < vars_) continue;
            for (int j = 0; j < vars_; ++j) {
                if (std::abs(tab_(i, j)) > kEps) {
                    pivot(i, j);
                    break;
                }
            }
        }
        // Phase 2 on the structural columns only.
        tab_.row(rows_).setZero();
        tab_.row(rows_).head(vars_) = cost_.transpose();
        for (int i = 0; i < rows_; ++i) {
            if (basis_[i] < vars_) tab_.row(rows_) -= cost_(basis_[i]) * tab_.row(i);
        }
        iterate(vars_);
        return -tab_(rows_, cols);
    }

private:
    static constexpr double kEps = 1e-12;

    void iterate(int enterable) {
        const int rhs = vars_ + rows_;
        for (int guard = 0; guard < 100000; ++guard) {
            int enter = -1;
            for (int j = 0; j < enterable; ++j) {
                if (tab_(rows_, j) < -kEps) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return;
            int leave = -1;
            double best = 0.0;
            for (int i = 0; i < rows_; ++i) {
                if (tab_(i, enter) <= kEps) continue;
                const double ratio = tab_(i, rhs) / tab_(i, enter);
                if (leave < 0 || ratio < best - kEps || (std::abs(ratio - best) <= kEps && basis_[i] < basis_[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave < 0) throw Error(ErrorCode::InfeasibleMarginals, "transport LP is unbounded");
            pivot(leave, enter);
        }
    }

    void pivot(int row, int col) {
        tab_.row(row) /= tab_(row, col);
        for (int i = 0; i <= rows_; ++i) {
            if (i != row && tab_(i, col) != 0.0) tab_.row(i) -= tab_(i, col) * tab_.row(row);
        }
        basis_[row] = col;
    }

    int rows_, vars_;
    Vector cost_;
    Matrix tab_;
    std::vector<int> basis_;
};

}  // namespace

double exact_wasserstein2_small(const Matrix& P, const Vector& a, const Matrix& Q, const Vector& b) {
    const auto M = P.rows(), N = Q.rows();
    if (M == 0 || N == 0) throw Error(ErrorCode::EmptySet, "transport needs non-empty sets");
    if (M * N > 400) throw Error(ErrorCode::DimensionMismatch, "exact transport is limited to M*N <= 400");
    if (a.size() != M || b.size() != N || P.cols() != Q.cols())
        throw Error(ErrorCode::DimensionMismatch, "weights or dimensions do not match the point sets");
    if ((a.array() < 0).any() || (b.array() < 0).any())
        throw Error(ErrorCode::InfeasibleMarginals, "masses must be non-negative");
    if (std::abs(a.sum() - 1.0) > 1e-9 || std::abs(b.sum() - 1.0) > 1e-9)
        throw Error(ErrorCode::InfeasibleMarginals, "both marginals must carry unit mass");

    // Row sums for every source, column sums for all but the last target (redundant).
    const auto rows = M + N - 1;
    Matrix A = Matrix::Zero(rows, M * N);
    Vector rhs(rows);
    Vector cost(M * N);
    for (Eigen::Index l = 0; l < M; ++l) {
        for (Eigen::Index j = 0; j < N; ++j) {
            const auto var = l * N + j;
            A(l, var) = 1.0;
            if (j < N - 1) A(M + j, var) = 1.0;
            cost(var) = (P.row(l) - Q.row(j)).squaredNorm();
        }
        rhs(l) = a(l);
    }
    for (Eigen::Index j = 0; j < N - 1; ++j) rhs(M + j) = b(j);

    DenseSimplex lp(A, rhs, cost);
    return std::sqrt(std::max(0.0, lp.solve()));
}

}  // namespace d2oc
