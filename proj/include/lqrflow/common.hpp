#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lqrflow {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Central tolerance record shared by every module.
struct Tolerances {
    double tol_abs = 1e-12;   // absolute residual tolerance
    double tol_rel = 1e-10;   // relative residual tolerance
    double margin = 1e-9;     // Hurwitz margin: stabilizing <=> abscissa < -margin
    double cond_cap = 1e14;   // linear solves with estimated condition above this are rejected
};

inline const Tolerances& default_tolerances() {
    static const Tolerances tol{};
    return tol;
}

struct NotHurwitz : std::runtime_error {
    explicit NotHurwitz(const std::string& what) : std::runtime_error(what) {}
};
struct IllConditioned : std::runtime_error {
    explicit IllConditioned(const std::string& what) : std::runtime_error(what) {}
};
struct NotStabilizing : std::runtime_error {
    explicit NotStabilizing(const std::string& what) : std::runtime_error(what) {}
};
struct DimensionMismatch : std::runtime_error {
    explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct NoStabilizingInit : std::runtime_error {
    explicit NoStabilizingInit(const std::string& what) : std::runtime_error(what) {}
};
struct Stalled : std::runtime_error {
    explicit Stalled(const std::string& what) : std::runtime_error(what) {}
};
struct NegativeArgument : std::runtime_error {
    explicit NegativeArgument(const std::string& what) : std::runtime_error(what) {}
};
struct UnknownLemma : std::runtime_error {
    explicit UnknownLemma(const std::string& what) : std::runtime_error(what) {}
};
struct ProbeRejected : std::runtime_error {
    explicit ProbeRejected(const std::string& what) : std::runtime_error(what) {}
};
struct InvalidWBar : std::runtime_error {
    explicit InvalidWBar(const std::string& what) : std::runtime_error(what) {}
};
struct OutOfDomain : std::runtime_error {
    explicit OutOfDomain(const std::string& what) : std::runtime_error(what) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Max real part of eig(A). A need not be symmetric.
inline double spectral_abscissa(const Matrix& A) {
    if (A.rows() != A.cols())
        throw DimensionMismatch("spectral_abscissa: matrix must be square");
    Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
    return es.eigenvalues().real().maxCoeff();
}

inline bool is_hurwitz(const Matrix& A, double margin) {
    return spectral_abscissa(A) < -margin;
}

inline Matrix symmetrize(const Matrix& X) {
    return 0.5 * (X + X.transpose());
}

inline double eigmin_sym(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double eigmax_sym(const Matrix& S) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

// Spectral norm via singular values.
inline double spectral_norm(const Matrix& M) {
    return M.jacobiSvd().singularValues()(0);
}

// splitmix64; used to derive independent per-sample RNG streams from a master seed.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace lqrflow
