#pragma once

#include "lqrflow/common.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace lqrflow {

enum class LyapunovSide {
    TransposeLeft,  // A^T X + X A + RHS = 0
    PlainLeft,      // A X + X A^T + RHS = 0
};

// Dense Lyapunov solve via the Kronecker-sum linear system. Cost is O(n^6),
// which is fine in the small dense regime this library targets; n is capped
// at kMaxLyapunovDim.
inline constexpr int kMaxLyapunovDim = 32;

inline Matrix solve_lyapunov(const Matrix& A_cl, const Matrix& RHS, LyapunovSide side,
                             const Tolerances& tol = default_tolerances()) {
    const auto n = A_cl.rows();
    if (A_cl.cols() != n || RHS.rows() != n || RHS.cols() != n)
        throw DimensionMismatch("solve_lyapunov: A_cl and RHS must be square of equal size");
    if (n > kMaxLyapunovDim)
        throw DimensionMismatch("solve_lyapunov: dense Kronecker solver capped at n = 32");
    if (!is_hurwitz(A_cl, tol.margin))
        throw NotHurwitz("solve_lyapunov: A_cl is not Hurwitz within margin");

    // Column-major vec: vec(LX) = (I (x) L) vec(X), vec(XL^T) = (L (x) I) vec(X),
    // so both sides reduce to the Kronecker sum M = I (x) L + L (x) I.
    const Matrix L = (side == LyapunovSide::TransposeLeft) ? Matrix(A_cl.transpose()) : A_cl;
    Matrix M = Matrix::Zero(n * n, n * n);
    for (Eigen::Index b = 0; b < n; ++b)
        M.block(b * n, b * n, n, n) = L;
    for (Eigen::Index bj = 0; bj < n; ++bj)
        for (Eigen::Index bi = 0; bi < n; ++bi)
            M.block(bi * n, bj * n, n, n) += L(bi, bj) * Matrix::Identity(n, n);

    Eigen::PartialPivLU<Matrix> lu(M);
    const double rc = lu.rcond();
    if (!(rc > 1.0 / tol.cond_cap))
        throw IllConditioned("solve_lyapunov: Kronecker system condition estimate exceeds cap");

    Eigen::Map<const Vector> rhs_vec(RHS.data(), n * n);
    Vector x = lu.solve(-rhs_vec);
    Matrix X = symmetrize(Eigen::Map<Matrix>(x.data(), n, n));

    const Matrix resid = (side == LyapunovSide::TransposeLeft)
                             ? Matrix(A_cl.transpose() * X + X * A_cl + RHS)
                             : Matrix(A_cl * X + X * A_cl.transpose() + RHS);
    // Backward-error criterion: the attainable residual scales with the data
    // entering the solve, not just with the solution norm.
    const double scale = 2.0 * A_cl.norm() * X.norm() + RHS.norm();
    if (resid.norm() > tol.tol_abs + tol.tol_rel * scale)
        throw IllConditioned("solve_lyapunov: residual above tolerance");
    return X;
}

struct OptimalTriple {
    Matrix K_star;  // m x n
    Matrix P_star;  // n x n SPD
    Matrix Y_star;  // n x n SPD
};

struct AreSolveReport {
    std::vector<double> costs;      // Tr(P_i) per Kleinman iterate, nonincreasing
    std::vector<double> residuals;  // ARE residual Frobenius norm per iterate
    int iterations = 0;
};

namespace detail {

inline double are_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                           const Matrix& P) {
    Matrix res = A.transpose() * P + P * A + Q - P * B * R.inverse() * B.transpose() * P;
    return res.norm();
}

// Stabilizing initializer: K0 = 0 when A is already Hurwitz. Otherwise the
// Bass construction: with beta > ||A|| solve the shifted Lyapunov equation
// (A + beta I) P + P (A + beta I)^T = 2 B B^T and take K0 = B^T P^{-1}, which
// places the closed-loop spectrum on Re = -beta for controllable pairs. A
// c-doubling sweep of K = c B^T S remains as a fallback; failure surfaces as
// NoStabilizingInit.
// Last-resort initializer: stable invariant subspace of the Hamiltonian
// matrix [[A, -B R^-1 B^T], [-Q, -A^T]] gives P = X2 X1^{-1} and the
// (near-optimal) gain R^-1 B^T P. Used only when the cheap constructions
// fail, e.g. m = 1 plants whose Bass Gramian is numerically near-singular.
inline Matrix hamiltonian_gain(const Matrix& A, const Matrix& B, const Matrix& Q,
                               const Matrix& R) {
    const auto n = A.rows();
    Matrix H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = A;
    H.topRightCorner(n, n) = -B * R.inverse() * B.transpose();
    H.bottomLeftCorner(n, n) = -Q;
    H.bottomRightCorner(n, n) = -A.transpose();
    Eigen::EigenSolver<Matrix> es(H);
    Eigen::MatrixXcd X1(n, n), X2(n, n);
    Eigen::Index picked = 0;
    for (Eigen::Index i = 0; i < 2 * n && picked < n; ++i)
        if (es.eigenvalues()(i).real() < 0.0) {
            X1.col(picked) = es.eigenvectors().col(i).head(n);
            X2.col(picked) = es.eigenvectors().col(i).tail(n);
            ++picked;
        }
    if (picked != n)
        throw NoStabilizingInit("solve_are: Hamiltonian matrix lacks a stable n-subspace");
    const Matrix P = symmetrize((X2 * X1.inverse()).real());
    return R.inverse() * B.transpose() * P;
}

inline Matrix initial_stabilizing_gain(const Matrix& A, const Matrix& B, const Matrix& Q,
                                       const Matrix& R, const Tolerances& tol) {
    const auto n = A.rows();
    const auto m = B.cols();
    const double abscissa = spectral_abscissa(A);
    if (abscissa < -tol.margin)
        return Matrix::Zero(m, n);

    const double beta = A.norm() + 1.0;
    const Matrix A_shift = -(A + beta * Matrix::Identity(n, n));  // Hurwitz by choice of beta
    const Matrix P =
        solve_lyapunov(A_shift, 2.0 * B * B.transpose(), LyapunovSide::PlainLeft, tol);
    if (eigmin_sym(P) > tol.margin * (1.0 + P.norm())) {
        Matrix K0 = B.transpose() * P.inverse();
        if (is_hurwitz(A - B * K0, tol.margin))
            return K0;
    }

    // fallback for pairs the Bass solve leaves near-singular
    const Matrix S = solve_lyapunov(A - (abscissa + 1.0) * Matrix::Identity(n, n),
                                    Matrix::Identity(n, n), LyapunovSide::TransposeLeft, tol);
    double c = 1.0;
    for (int attempt = 0; attempt < 60; ++attempt, c *= 2.0) {
        Matrix K0 = c * B.transpose() * S;
        if (is_hurwitz(A - B * K0, tol.margin))
            return K0;
    }
    Matrix K0 = hamiltonian_gain(A, B, Q, R);
    if (is_hurwitz(A - B * K0, tol.margin))
        return K0;
    throw NoStabilizingInit("solve_are: could not find a stabilizing initial gain");
}

}  // namespace detail

// Kleinman iteration for the continuous ARE. Quadratically convergent from
// any stabilizing initial gain; cost sequence is monotone nonincreasing.
inline OptimalTriple solve_are(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                               const Tolerances& tol = default_tolerances(),
                               AreSolveReport* report = nullptr, int max_iters = 100) {
    const auto n = A.rows();
    Matrix K = detail::initial_stabilizing_gain(A, B, Q, R, tol);
    Matrix Rinv = R.inverse();
    Matrix best_P;
    double best_res = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
        Matrix A_cl = A - B * K;
        Matrix P = solve_lyapunov(A_cl, Q + K.transpose() * R * K, LyapunovSide::TransposeLeft, tol);
        const double res = detail::are_residual(A, B, Q, R, P);
        if (report) {
            report->costs.push_back(P.trace());
            report->residuals.push_back(res);
            report->iterations = it + 1;
        }
        const bool improved = res < best_res;
        if (improved) {
            best_res = res;
            best_P = P;
        }
        // Quadratic convergence bottoms out at the machine-precision floor;
        // stop once the residual no longer improves there.
        const bool at_floor = !improved || res <= 1e-15 * (1.0 + P.norm());
        if (at_floor && best_res <= tol.tol_abs + tol.tol_rel * best_P.norm()) {
            Matrix K_opt = Rinv * B.transpose() * best_P;
            Matrix A_opt = A - B * K_opt;
            if (!is_hurwitz(A_opt, tol.margin))
                throw Stalled("solve_are: converged gain is not Hurwitz within margin");
            Matrix Y = solve_lyapunov(A_opt, Matrix::Identity(n, n), LyapunovSide::PlainLeft, tol);
            return OptimalTriple{K_opt, symmetrize(best_P), Y};
        }
        K = Rinv * B.transpose() * P;
    }
    throw Stalled("solve_are: Kleinman iteration did not reach tolerance");
}

struct GainMatrix {
    Matrix K;                  // m x n
    double spectral_abscissa;  // max Re eig(A - BK)
    bool stabilizing;          // abscissa < -margin
};

struct CostBundle {
    Matrix P_K;         // n x n SPD
    Matrix Y_K;         // n x n SPD
    double cost;        // Tr(P_K)
    Matrix grad;        // 2(RK - B^T P_K) Y_K
    Matrix nat_grad;    // 2(RK - B^T P_K)
    Matrix newton_dir;  // -(K - R^-1 B^T P_K)
    Matrix K_prime;     // R^-1 B^T P_K
    Matrix M_K;         // (K - K')^T R (K - K'), n x n
};

// Weighted inner product <K1, K2>_Y = Tr(K1^T K2 Y).
inline double weighted_inner(const Matrix& K1, const Matrix& K2, const Matrix& Y) {
    if (K1.rows() != K2.rows() || K1.cols() != K2.cols() || Y.rows() != K1.cols() ||
        Y.cols() != K1.cols())
        throw DimensionMismatch("weighted_inner: incompatible shapes");
    return (K1.transpose() * K2 * Y).trace();
}

struct WeightedInner {
    Matrix Y;
    double operator()(const Matrix& K1, const Matrix& K2) const {
        return weighted_inner(K1, K2, Y);
    }
};

// The LQR problem data (A, B, Q, R). Immutable after construction; the
// optimal triple is computed as part of construction, which also serves as
// the stabilizability check.
class PlantModel {
  public:
    PlantModel(Matrix A, Matrix B, Matrix Q, Matrix R,
               const Tolerances& tol = default_tolerances())
        : A_(std::move(A)), B_(std::move(B)), Q_(std::move(Q)), R_(std::move(R)), tol_(tol) {
        const auto n = A_.rows();
        if (A_.cols() != n || B_.rows() != n || Q_.rows() != n || Q_.cols() != n ||
            R_.rows() != B_.cols() || R_.cols() != B_.cols())
            throw DimensionMismatch("PlantModel: inconsistent dimensions");
        if ((Q_ - Q_.transpose()).norm() > tol_.tol_abs + tol_.tol_rel * Q_.norm())
            throw DimensionMismatch("PlantModel: Q must be symmetric");
        if ((R_ - R_.transpose()).norm() > tol_.tol_abs + tol_.tol_rel * R_.norm())
            throw DimensionMismatch("PlantModel: R must be symmetric");
        if (eigmin_sym(Q_) <= 0.0)
            throw DimensionMismatch("PlantModel: Q must be positive definite");
        if (eigmin_sym(R_) <= 0.0)
            throw DimensionMismatch("PlantModel: R must be positive definite");
        optimal_ = solve_are(A_, B_, Q_, R_, tol_, &are_report_);
    }

    static PlantModel one_dim() {
        Matrix one = Matrix::Identity(1, 1);
        return PlantModel(one, one, one, one);
    }

    const Matrix& A() const { return A_; }
    const Matrix& B() const { return B_; }
    const Matrix& Q() const { return Q_; }
    const Matrix& R() const { return R_; }
    Eigen::Index n() const { return A_.rows(); }
    Eigen::Index m() const { return B_.cols(); }
    const Tolerances& tol() const { return tol_; }
    const OptimalTriple& optimal() const { return optimal_; }
    const AreSolveReport& are_report() const { return are_report_; }

    GainMatrix gain(const Matrix& K) const {
        if (K.rows() != m() || K.cols() != n())
            throw DimensionMismatch("PlantModel::gain: K must be m x n");
        const double abscissa = spectral_abscissa(A_ - B_ * K);
        return GainMatrix{K, abscissa, abscissa < -tol_.margin};
    }

  private:
    Matrix A_, B_, Q_, R_;
    Tolerances tol_;
    OptimalTriple optimal_;
    AreSolveReport are_report_;
};

inline CostBundle evaluate(const PlantModel& plant, const GainMatrix& gain) {
    if (!gain.stabilizing)
        throw NotStabilizing("evaluate: gain is not stabilizing");
    const Matrix& K = gain.K;
    const Matrix A_cl = plant.A() - plant.B() * K;
    const Matrix P =
        solve_lyapunov(A_cl, plant.Q() + K.transpose() * plant.R() * K,
                       LyapunovSide::TransposeLeft, plant.tol());
    const Matrix Y = solve_lyapunov(A_cl, Matrix::Identity(plant.n(), plant.n()),
                                    LyapunovSide::PlainLeft, plant.tol());
    CostBundle out;
    out.P_K = P;
    out.Y_K = Y;
    out.cost = P.trace();
    out.nat_grad = 2.0 * (plant.R() * K - plant.B().transpose() * P);
    out.grad = out.nat_grad * Y;
    out.K_prime = plant.R().inverse() * plant.B().transpose() * P;
    out.newton_dir = -(K - out.K_prime);
    out.M_K = symmetrize((K - out.K_prime).transpose() * plant.R() * (K - out.K_prime));
    return out;
}

inline CostBundle evaluate(const PlantModel& plant, const Matrix& K) {
    return evaluate(plant, plant.gain(K));
}

// Second-order Taylor model of J2(K + E); the first-order correction
// DeltaY solves (A-BK) DY + DY (A-BK)^T - B E Y_K - Y_K E^T B^T = 0.
inline double taylor_second_order(const PlantModel& plant, const Matrix& K, const Matrix& E) {
    const GainMatrix g = plant.gain(K);
    if (!g.stabilizing)
        throw NotStabilizing("taylor_second_order: K is not stabilizing");
    if (!plant.gain(K + E).stabilizing)
        throw NotStabilizing("taylor_second_order: K + E is not stabilizing");
    const CostBundle cb = evaluate(plant, g);
    const Matrix A_cl = plant.A() - plant.B() * K;
    const Matrix S = plant.B() * E * cb.Y_K;
    const Matrix delta_Y =
        solve_lyapunov(A_cl, Matrix(-(S + S.transpose())), LyapunovSide::PlainLeft, plant.tol());
    const Matrix G = plant.R() * K - plant.B().transpose() * cb.P_K;  // nat_grad / 2
    return cb.cost + 2.0 * (E.transpose() * G * cb.Y_K).trace() +
           (E.transpose() * plant.R() * E * cb.Y_K).trace() +
           2.0 * (E.transpose() * G * delta_Y).trace();
}

}  // namespace lqrflow
