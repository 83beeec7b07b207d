#pragma once

#include "lqrflow/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

namespace lqrflow {

enum class FlowKind {
    Standard,  // dK/ds = -2 eta (RK - B^T P_K) Y_K + W
    Natural,   // dK/ds = -2 eta (RK - B^T P_K) + W
    Newton,    // dK/ds = -eta (K - R^-1 B^T P_K) + W
};

inline const char* flow_name(FlowKind kind) {
    switch (kind) {
        case FlowKind::Standard: return "standard";
        case FlowKind::Natural: return "natural";
        case FlowKind::Newton: return "newton";
    }
    return "?";
}

inline Matrix flow_drift(const CostBundle& cb, FlowKind kind, double eta) {
    switch (kind) {
        case FlowKind::Standard: return -eta * cb.grad;
        case FlowKind::Natural: return -eta * cb.nat_grad;
        case FlowKind::Newton: return eta * cb.newton_dir;
    }
    return Matrix();
}

// Disturbance W(s): sampled-and-held at the outer step scale, hard-clamped to
// the configured Frobenius amplitude. Signals with randomness are
// deterministic per seed.
class DisturbanceSignal {
  public:
    virtual ~DisturbanceSignal() = default;

    Matrix sample(double s, const PlantModel& plant, const Matrix& K) {
        Matrix W = emit(s, plant, K);
        const double norm = W.norm();
        if (amplitude_ >= 0.0 && norm > amplitude_)
            W *= amplitude_ / norm;
        realized_ess_sup_ = std::max(realized_ess_sup_, W.norm());
        return W;
    }

    double amplitude() const { return amplitude_; }
    double realized_ess_sup() const { return realized_ess_sup_; }
    virtual const char* kind_name() const = 0;
    virtual int rejection_count() const { return 0; }

  protected:
    explicit DisturbanceSignal(double amplitude) : amplitude_(amplitude) {}
    virtual Matrix emit(double s, const PlantModel& plant, const Matrix& K) = 0;

  private:
    double amplitude_;  // negative means unclamped
    double realized_ess_sup_ = 0.0;
};

class ZeroSignal final : public DisturbanceSignal {
  public:
    ZeroSignal() : DisturbanceSignal(0.0) {}
    const char* kind_name() const override { return "zero"; }

  protected:
    Matrix emit(double, const PlantModel& plant, const Matrix&) override {
        return Matrix::Zero(plant.m(), plant.n());
    }
};

// Fixed random direction scaled to the full amplitude.
class ConstantMatrixSignal final : public DisturbanceSignal {
  public:
    ConstantMatrixSignal(double amplitude, std::uint64_t seed)
        : DisturbanceSignal(amplitude), seed_(seed) {}
    const char* kind_name() const override { return "constant"; }

  protected:
    Matrix emit(double, const PlantModel& plant, const Matrix&) override {
        if (W_.size() == 0) {
            std::mt19937_64 rng(seed_);
            std::normal_distribution<double> normal(0.0, 1.0);
            W_ = Matrix(plant.m(), plant.n());
            for (Eigen::Index j = 0; j < plant.n(); ++j)
                for (Eigen::Index i = 0; i < plant.m(); ++i)
                    W_(i, j) = normal(rng);
            const double norm = W_.norm();
            if (norm > 0.0)
                W_ *= amplitude() / norm;
        }
        return W_;
    }

  private:
    std::uint64_t seed_;
    Matrix W_;
};

// W(s) = D sin(omega s + phase) with ||D||_F = amplitude.
class SinusoidalMatrixSignal final : public DisturbanceSignal {
  public:
    SinusoidalMatrixSignal(double amplitude, double omega, double phase, std::uint64_t seed)
        : DisturbanceSignal(amplitude), omega_(omega), phase_(phase), seed_(seed) {}
    const char* kind_name() const override { return "sinusoidal"; }

  protected:
    Matrix emit(double s, const PlantModel& plant, const Matrix&) override {
        if (D_.size() == 0) {
            std::mt19937_64 rng(seed_);
            std::normal_distribution<double> normal(0.0, 1.0);
            D_ = Matrix(plant.m(), plant.n());
            for (Eigen::Index j = 0; j < plant.n(); ++j)
                for (Eigen::Index i = 0; i < plant.m(); ++i)
                    D_(i, j) = normal(rng);
            const double norm = D_.norm();
            if (norm > 0.0)
                D_ *= amplitude() / norm;
        }
        return D_ * std::sin(omega_ * s + phase_);
    }

  private:
    double omega_, phase_;
    std::uint64_t seed_;
    Matrix D_;
};

// i.i.d. uniform [-1,1] entries, rescaled so the Frobenius norm is uniform in
// [0, amplitude]; a fresh draw per query.
class BoundedNoiseSignal final : public DisturbanceSignal {
  public:
    BoundedNoiseSignal(double amplitude, std::uint64_t seed)
        : DisturbanceSignal(amplitude), rng_(seed) {}
    const char* kind_name() const override { return "bounded_noise"; }

  protected:
    Matrix emit(double, const PlantModel& plant, const Matrix&) override {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        Matrix W(plant.m(), plant.n());
        for (Eigen::Index j = 0; j < plant.n(); ++j)
            for (Eigen::Index i = 0; i < plant.m(); ++i)
                W(i, j) = unif(rng_);
        const double norm = W.norm();
        std::uniform_real_distribution<double> target(0.0, amplitude());
        if (norm > 0.0)
            W *= target(rng_) / norm;
        return W;
    }

  private:
    std::mt19937_64 rng_;
};

struct TrajectorySample {
    double s;
    Matrix K;
    double V3;  // J2(K) - J2(K*)
    double V4;  // (1/2) <K-K*, K-K*>_{Y*}
    double V5;  // V3 + V4
    double V6;  // V3 + (1/2) <K-K*, R(K-K*)>_{Y*}
    double grad_norm;
    Matrix W;  // disturbance active at this sample
    double W_norm;
    double spectral_abscissa;
};

enum class ExitStatus { Converged, MaxTime, LeftAdmissibleSet };

inline const char* exit_name(ExitStatus e) {
    switch (e) {
        case ExitStatus::Converged: return "Converged";
        case ExitStatus::MaxTime: return "MaxTime";
        case ExitStatus::LeftAdmissibleSet: return "LeftAdmissibleSet";
    }
    return "?";
}

struct Trajectory {
    std::vector<TrajectorySample> samples;
    ExitStatus exit = ExitStatus::MaxTime;
};

struct LeftAdmissibleSet : std::runtime_error {
    explicit LeftAdmissibleSet(const std::string& what) : std::runtime_error(what) {}
};

inline TrajectorySample make_sample(const PlantModel& plant, const GainMatrix& gain, double s,
                                    const Matrix& W) {
    const OptimalTriple& opt = plant.optimal();
    const CostBundle cb = evaluate(plant, gain);
    const Matrix dK = gain.K - opt.K_star;
    TrajectorySample out;
    out.s = s;
    out.K = gain.K;
    out.V3 = cb.cost - opt.P_star.trace();
    out.V4 = 0.5 * weighted_inner(dK, dK, opt.Y_star);
    out.V5 = out.V3 + out.V4;
    out.V6 = out.V3 + 0.5 * weighted_inner(dK, plant.R() * dK, opt.Y_star);
    out.grad_norm = cb.grad.norm();
    out.W = W;
    out.W_norm = W.norm();
    out.spectral_abscissa = gain.spectral_abscissa;
    return out;
}

namespace detail {

// One classical RK4 step; every stage re-solves the Lyapunov pair. Throws
// LeftAdmissibleSet if a stage or the result is non-stabilizing.
inline GainMatrix rk4_step_once(const PlantModel& plant, const GainMatrix& gain, FlowKind kind,
                                double eta, const Matrix& W, double h) {
    auto stage = [&](const Matrix& K) -> Matrix {
        GainMatrix g = plant.gain(K);
        if (!g.stabilizing)
            throw LeftAdmissibleSet("rk4 stage left the admissible set");
        return flow_drift(evaluate(plant, g), kind, eta) + W;
    };
    const Matrix& K = gain.K;
    Matrix k1 = flow_drift(evaluate(plant, gain), kind, eta) + W;
    Matrix k2 = stage(K + 0.5 * h * k1);
    Matrix k3 = stage(K + 0.5 * h * k2);
    Matrix k4 = stage(K + h * k3);
    GainMatrix next = plant.gain(K + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    if (!next.stabilizing)
        throw LeftAdmissibleSet("rk4 result left the admissible set");
    return next;
}

}  // namespace detail

// Advance the selected flow by h with W held constant. On a failed stage the
// step is split into two halves, recursively, up to max_halvings levels.
inline GainMatrix step(const PlantModel& plant, const GainMatrix& gain, FlowKind kind, double eta,
                       const Matrix& W, double h, int max_halvings = 10) {
    if (!gain.stabilizing)
        throw NotStabilizing("step: initial gain is not stabilizing");
    if (!(h > 0.0))
        throw NegativeArgument("step: h must be positive");
    try {
        return detail::rk4_step_once(plant, gain, kind, eta, W, h);
    } catch (const LeftAdmissibleSet&) {
        if (max_halvings <= 0)
            throw;
        GainMatrix mid = step(plant, gain, kind, eta, W, 0.5 * h, max_halvings - 1);
        return step(plant, mid, kind, eta, W, 0.5 * h, max_halvings - 1);
    }
}

struct IntegrateOptions {
    double s_max = 50.0;
    double h = 0.01;
    int record_every = 1;
    double converge_tol = 1e-12;  // exit Converged once V3 falls below
    int max_halvings = 10;
};

inline Trajectory integrate(const PlantModel& plant, const GainMatrix& K0, FlowKind kind,
                            double eta, DisturbanceSignal& signal, const IntegrateOptions& opts) {
    if (!K0.stabilizing)
        throw NotStabilizing("integrate: K0 is not stabilizing");
    if (!(opts.s_max > 0.0) || !(opts.h > 0.0))
        throw NegativeArgument("integrate: s_max and h must be positive");

    Trajectory traj;
    GainMatrix gain = K0;
    double s = 0.0;
    const long n_steps = static_cast<long>(std::ceil(opts.s_max / opts.h));
    Matrix W = signal.sample(s, plant, gain.K);
    traj.samples.push_back(make_sample(plant, gain, s, W));
    if (traj.samples.back().V3 <= opts.converge_tol) {
        traj.exit = ExitStatus::Converged;
        return traj;
    }

    for (long i = 0; i < n_steps; ++i) {
        const double h = std::min(opts.h, opts.s_max - s);
        try {
            gain = step(plant, gain, kind, eta, W, h, opts.max_halvings);
        } catch (const LeftAdmissibleSet&) {
            traj.exit = ExitStatus::LeftAdmissibleSet;
            return traj;
        }
        s += h;
        const bool last = (i + 1 == n_steps);
        if ((i + 1) % opts.record_every == 0 || last) {
            TrajectorySample sample = make_sample(plant, gain, s, W);
            traj.samples.push_back(sample);
            if (sample.V3 <= opts.converge_tol) {
                traj.exit = ExitStatus::Converged;
                return traj;
            }
        }
        W = signal.sample(s, plant, gain.K);
    }
    traj.exit = ExitStatus::MaxTime;
    return traj;
}

}  // namespace lqrflow
