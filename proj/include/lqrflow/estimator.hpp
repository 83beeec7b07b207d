#pragma once

#include "lqrflow/flows.hpp"
#include "lqrflow/model.hpp"
#include "lqrflow/sampling.hpp"

#include <cstdint>
#include <random>

namespace lqrflow {

enum class EstimatorScheme { TwoPointSphere, CoordinateFD };

struct EstimatorConfig {
    double radius = 1e-3;  // smoothing radius in Frobenius norm
    int num_samples = 100;
    std::uint64_t seed = 0;
    EstimatorScheme scheme = EstimatorScheme::TwoPointSphere;
    int max_retries = 50;  // probe redraws per sample near the boundary
};

namespace detail {

inline double cost_at(const PlantModel& plant, const Matrix& K) {
    return evaluate(plant, K).cost;
}

}  // namespace detail

// Zeroth-order gradient estimate. Costs are evaluated exactly via Lyapunov
// solves, so estimation error is the only perturbation source.
inline Matrix estimate_gradient(const PlantModel& plant, const GainMatrix& gain,
                                const EstimatorConfig& cfg, int* rejections = nullptr) {
    if (!gain.stabilizing)
        throw NotStabilizing("estimate_gradient: gain is not stabilizing");
    if (!(cfg.radius > 0.0))
        throw NegativeArgument("estimate_gradient: radius must be positive");
    if (cfg.num_samples < 1)
        throw NegativeArgument("estimate_gradient: num_samples must be at least 1");

    const auto m = plant.m();
    const auto n = plant.n();
    const Matrix& K = gain.K;

    if (cfg.scheme == EstimatorScheme::CoordinateFD) {
        Matrix est(m, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < m; ++i) {
                Matrix Kp = K, Km = K;
                Kp(i, j) += cfg.radius;
                Km(i, j) -= cfg.radius;
                if (!plant.gain(Kp).stabilizing || !plant.gain(Km).stabilizing)
                    throw ProbeRejected("estimate_gradient: coordinate probe left admissible set");
                est(i, j) =
                    (detail::cost_at(plant, Kp) - detail::cost_at(plant, Km)) / (2.0 * cfg.radius);
            }
        return est;
    }

    std::mt19937_64 rng(cfg.seed);
    Matrix acc = Matrix::Zero(m, n);
    int rejected = 0;
    for (int s = 0; s < cfg.num_samples; ++s) {
        Matrix U;
        double diff = 0.0;
        bool ok = false;
        for (int t = 0; t <= cfg.max_retries; ++t) {
            U = random_matrix(m, n, rng);
            U /= U.norm();
            const Matrix Kp = K + cfg.radius * U;
            const Matrix Km = K - cfg.radius * U;
            if (plant.gain(Kp).stabilizing && plant.gain(Km).stabilizing) {
                diff = detail::cost_at(plant, Kp) - detail::cost_at(plant, Km);
                ok = true;
                break;
            }
            ++rejected;
        }
        if (!ok)
            throw ProbeRejected("estimate_gradient: sphere probe retry budget exhausted");
        acc += diff * U;
    }
    if (rejections)
        *rejections = rejected;
    const double mn = static_cast<double>(m) * static_cast<double>(n);
    return (mn / (2.0 * cfg.radius * cfg.num_samples)) * acc;
}

// W(s) = eta (grad J2(K) - est J2(K)) queried at the flow's current gain.
// Unclamped; the realized ess-sup is tracked for reporting.
class EstimatorResidualSignal final : public DisturbanceSignal {
  public:
    EstimatorResidualSignal(EstimatorConfig cfg, double eta)
        : DisturbanceSignal(-1.0), cfg_(cfg), eta_(eta) {
        if (!(cfg_.radius > 0.0))
            throw NegativeArgument("EstimatorResidualSignal: radius must be positive");
    }

    const char* kind_name() const override { return "estimator_residual"; }
    int rejection_count() const override { return rejections_; }

  protected:
    Matrix emit(double, const PlantModel& plant, const Matrix& K) override {
        const GainMatrix g = plant.gain(K);
        const CostBundle cb = evaluate(plant, g);
        EstimatorConfig cfg = cfg_;
        cfg.seed = mix_seed(cfg_.seed, query_++);
        int rej = 0;
        const Matrix est = estimate_gradient(plant, g, cfg, &rej);
        rejections_ += rej;
        return eta_ * (cb.grad - est);
    }

  private:
    EstimatorConfig cfg_;
    double eta_;
    std::uint64_t query_ = 0;
    int rejections_ = 0;
};

inline EstimatorResidualSignal residual_signal(const EstimatorConfig& cfg, double eta) {
    return EstimatorResidualSignal(cfg, eta);
}

}  // namespace lqrflow
