#pragma once

#include "lqrflow/model.hpp"

#include <cstdint>
#include <random>

namespace lqrflow {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix M(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            M(i, j) = normal(rng);
    return M;
}

// Random dense plant with Q, R strictly positive definite. R is scaled so
// eigmin(R) = 0.9; the natural-flow constants are computed for R as given
// and assume eigmin(R) <= 1.
inline PlantModel random_plant(Eigen::Index n, Eigen::Index m, std::uint64_t seed,
                               const Tolerances& tol = default_tolerances()) {
    std::mt19937_64 rng(seed);
    Matrix A = random_matrix(n, n, rng) / std::sqrt(static_cast<double>(n));
    Matrix B = random_matrix(n, m, rng);
    Matrix G = random_matrix(n, n, rng);
    Matrix Q = symmetrize(G * G.transpose() / static_cast<double>(n)) + Matrix::Identity(n, n);
    Matrix H = random_matrix(m, m, rng);
    Matrix R = symmetrize(H * H.transpose() / static_cast<double>(m)) + Matrix::Identity(m, m);
    R *= 0.9 / eigmin_sym(R);
    return PlantModel(std::move(A), std::move(B), std::move(Q), std::move(R), tol);
}

// Draw K* + E with E of Frobenius norm uniform in [0, rho], rejecting
// non-stabilizing candidates.
inline GainMatrix random_stabilizing_gain(const PlantModel& plant, double rho,
                                          std::mt19937_64& rng, int max_tries = 200) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < max_tries; ++t) {
        Matrix E = random_matrix(plant.m(), plant.n(), rng);
        const double norm = E.norm();
        if (norm > 0.0)
            E *= (rho * unif(rng)) / norm;
        GainMatrix g = plant.gain(plant.optimal().K_star + E);
        if (g.stabilizing)
            return g;
    }
    throw NotStabilizing("random_stabilizing_gain: rejection sampling exhausted");
}

}  // namespace lqrflow
