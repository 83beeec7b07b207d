#pragma once

#include "lqrflow/bounds.hpp"
#include "lqrflow/flows.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <memory>
#include <vector>

namespace lqrflow {

enum class EnvelopeSignalKind { ConstantMatrix, SinusoidalMatrix, BoundedNoise };

inline std::unique_ptr<DisturbanceSignal> make_envelope_signal(EnvelopeSignalKind kind,
                                                               double amplitude,
                                                               std::uint64_t seed) {
    switch (kind) {
        case EnvelopeSignalKind::ConstantMatrix:
            return std::make_unique<ConstantMatrixSignal>(amplitude, seed);
        case EnvelopeSignalKind::SinusoidalMatrix:
            return std::make_unique<SinusoidalMatrixSignal>(amplitude, 1.0, 0.0, seed);
        case EnvelopeSignalKind::BoundedNoise:
            return std::make_unique<BoundedNoiseSignal>(amplitude, seed);
    }
    throw ConfigError("make_envelope_signal: unknown kind");
}

// Empirical ISS gain: per-amplitude asymptotic level of V3, taken as the max
// over seeds of the tail mean (last 10% of s_max).
struct IssEnvelope {
    std::vector<double> amplitudes;
    std::vector<double> gamma_hat;   // per-amplitude level
    std::vector<double> spread;      // seed-to-seed spread (max - min of per-seed levels)
    std::vector<bool> exceeded;      // any trajectory left the admissible set
};

struct EnvelopeOptions {
    IntegrateOptions integ{};
    EnvelopeSignalKind signal_kind = EnvelopeSignalKind::BoundedNoise;
    bool parallel = true;
};

namespace detail {

inline double tail_level(const Trajectory& traj, double s_max) {
    if (traj.exit == ExitStatus::Converged)
        return traj.samples.back().V3;
    const double s_cut = 0.9 * s_max;
    double acc = 0.0;
    long count = 0;
    for (const TrajectorySample& smp : traj.samples)
        if (smp.s >= s_cut) {
            acc += smp.V3;
            ++count;
        }
    if (count == 0)
        return traj.samples.back().V3;
    return acc / static_cast<double>(count);
}

}  // namespace detail

inline IssEnvelope fit_envelope(const PlantModel& plant, FlowKind kind, double eta,
                                const std::vector<double>& amplitudes,
                                const std::vector<std::uint64_t>& seeds, double s_max,
                                const GainMatrix& K0, const EnvelopeOptions& opts = {}) {
    if (amplitudes.empty())
        throw ConfigError("fit_envelope: amplitude grid must be nonempty");
    if (!std::is_sorted(amplitudes.begin(), amplitudes.end()))
        throw ConfigError("fit_envelope: amplitudes must be sorted ascending");

    IntegrateOptions integ = opts.integ;
    integ.s_max = s_max;

    auto run_one = [&plant, &K0, kind, eta, integ, &opts](double amp, std::uint64_t seed) {
        auto signal = make_envelope_signal(opts.signal_kind, amp, seed);
        Trajectory traj = integrate(plant, K0, kind, eta, *signal, integ);
        const bool left = traj.exit == ExitStatus::LeftAdmissibleSet;
        const double level = left ? std::numeric_limits<double>::quiet_NaN()
                                  : detail::tail_level(traj, integ.s_max);
        return std::pair<double, bool>(level, left);
    };

    IssEnvelope env;
    env.amplitudes = amplitudes;
    for (double amp : amplitudes) {
        std::vector<std::pair<double, bool>> results;
        if (opts.parallel) {
            std::vector<std::future<std::pair<double, bool>>> futs;
            futs.reserve(seeds.size());
            for (std::uint64_t seed : seeds)
                futs.push_back(std::async(std::launch::async, run_one, amp, seed));
            for (auto& f : futs)
                results.push_back(f.get());
        } else {
            for (std::uint64_t seed : seeds)
                results.push_back(run_one(amp, seed));
        }
        bool left_any = false;
        double level_max = 0.0, level_min = std::numeric_limits<double>::infinity();
        for (auto& [level, left] : results) {
            left_any |= left;
            if (!left) {
                level_max = std::max(level_max, level);
                level_min = std::min(level_min, level);
            }
        }
        env.exceeded.push_back(left_any);
        env.gamma_hat.push_back(left_any ? std::numeric_limits<double>::quiet_NaN() : level_max);
        env.spread.push_back(left_any ? std::numeric_limits<double>::quiet_NaN()
                                      : level_max - level_min);
    }
    return env;
}

// Monotonicity of the fitted gain over the passing range, with tolerance 2x
// the per-point seed-to-seed spread.
inline bool envelope_monotone(const IssEnvelope& env) {
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < env.gamma_hat.size(); ++i) {
        if (env.exceeded[i])
            break;  // truncate the claim at the first admissible-set exit
        const double tol = 2.0 * env.spread[i];
        if (env.gamma_hat[i] < prev - tol)
            return false;
        prev = std::max(prev, env.gamma_hat[i]);
    }
    return true;
}

// Scalar system dchi/dt = -chi/(1+chi^2) + w of the iISS-but-not-small-
// disturbance-ISS example. Diverges with constant w = w_bar from initial
// conditions above (1 + sqrt(1-4 w_bar^2)) / (2 w_bar).
struct CounterexampleRun {
    std::vector<double> times;
    std::vector<double> chi;
    double w_bar = 0.0;
    double chi0 = 0.0;
    bool diverged = false;
};

inline double counterexample_threshold(double w_bar) {
    if (w_bar == 0.0)
        return std::numeric_limits<double>::infinity();
    return (1.0 + std::sqrt(1.0 - 4.0 * w_bar * w_bar)) / (2.0 * w_bar);
}

inline CounterexampleRun run_counterexample(double w_bar, double chi0, double t_max,
                                            double h = 1e-2, double diverge_at = 1e6,
                                            int record_every = 100) {
    if (!(w_bar >= 0.0) || !(w_bar < 0.5))
        throw InvalidWBar("run_counterexample: require 0 <= w_bar < 0.5");
    CounterexampleRun run;
    run.w_bar = w_bar;
    run.chi0 = chi0;
    auto f = [w_bar](double chi) { return -chi / (1.0 + chi * chi) + w_bar; };
    double chi = chi0, t = 0.0;
    long step_count = 0;
    run.times.push_back(t);
    run.chi.push_back(chi);
    while (t < t_max) {
        // Deep in the escape regime the field is flat (|f'| = O(1/chi^2)), so
        // the step can grow with |chi|; divergence past 1e6 would otherwise
        // need ~1e8 fixed steps. Bounded runs never enter this branch.
        const double h_eff = h * std::max(1.0, std::abs(chi) / 10.0);
        const double hh = std::min(h_eff, t_max - t);
        const double k1 = f(chi);
        const double k2 = f(chi + 0.5 * hh * k1);
        const double k3 = f(chi + 0.5 * hh * k2);
        const double k4 = f(chi + hh * k3);
        chi += (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += hh;
        if (++step_count % record_every == 0 || t >= t_max) {
            run.times.push_back(t);
            run.chi.push_back(chi);
        }
        if (std::abs(chi) > diverge_at) {
            run.diverged = true;
            if (run.times.back() != t) {
                run.times.push_back(t);
                run.chi.push_back(chi);
            }
            break;
        }
    }
    return run;
}

// Gradient saturation on the one-dimensional plant: |J2'(z)| stays bounded
// (limit 1/2) while xi1 never exceeds sqrt(a1)/a4.
struct SaturationRow {
    double z;
    double grad_abs;
    double xi1_bound;
};

inline std::vector<SaturationRow> saturation_demo(const std::vector<double>& z_grid) {
    const PlantModel plant = PlantModel::one_dim();
    const PlCertificate cert = PlCertificate::compute(plant);
    const double j_star = plant.optimal().P_star.trace();
    std::vector<SaturationRow> rows;
    rows.reserve(z_grid.size());
    for (double z : z_grid) {
        if (z <= 1.0)
            throw OutOfDomain("saturation_demo: z must lie in (1, inf)");
        const CostBundle cb = evaluate(plant, Matrix::Constant(1, 1, z));
        rows.push_back({z, std::abs(cb.grad(0, 0)), xi1(cert, std::max(cb.cost - j_star, 0.0))});
    }
    return rows;
}

// Pointwise dissipation audit of the three ISS theorems along a recorded
// trajectory. Samples above the disturbance threshold are skipped.
//
// standard: if ||W|| <= (eta/sqrt(2)) xi1(V3),
//           <grad J2, f> <= -(eta/4) xi1(V3)^2
// natural:  if ||W|| <= xi2(V5),
//           <grad V5, f> <= -(eta eigmin(R)/2) V5
// newton:   if ||W|| <= sqrt(eta^2 b2 V6 / (4 ||R|| (V6 + c1))),
//           <grad V6, f> <= -(eta/4) V6,   c1 = Tr(P*) + b2 ||Y*||
inline std::vector<BoundReport> descent_inequality_audit(const Trajectory& traj,
                                                         const PlantModel& plant, FlowKind kind,
                                                         double eta) {
    const PlCertificate cert = PlCertificate::compute(plant);
    const OptimalTriple& opt = plant.optimal();
    const double norm_R = spectral_norm(plant.R());
    std::vector<BoundReport> reports;

    for (const TrajectorySample& smp : traj.samples) {
        const GainMatrix gain = plant.gain(smp.K);
        if (!gain.stabilizing)
            continue;
        const CostBundle cb = evaluate(plant, gain);
        const Matrix dK = smp.K - opt.K_star;
        const Matrix f = flow_drift(cb, kind, eta) + smp.W;

        BoundReport rep;
        rep.K_tested = gain;
        switch (kind) {
            case FlowKind::Standard: {
                const double v3 = std::max(smp.V3, 0.0);
                const double threshold = (eta / std::sqrt(2.0)) * xi1(cert, v3);
                if (smp.W_norm > threshold)
                    continue;
                const double deriv = (cb.grad.array() * f.array()).sum();
                const double x = xi1(cert, v3);
                rep.lemma_id = LemmaId::DescentStandard;
                rep.lhs = -deriv;
                rep.rhs = 0.25 * eta * x * x;
                break;
            }
            case FlowKind::Natural: {
                const double v5 = std::max(smp.V5, 0.0);
                const double threshold = xi2(cert, v5, eta);
                if (smp.W_norm > threshold)
                    continue;
                const Matrix grad_V5 = cb.grad + dK * opt.Y_star;
                const double deriv = (grad_V5.array() * f.array()).sum();
                rep.lemma_id = LemmaId::DescentNatural;
                rep.lhs = -deriv;
                rep.rhs = 0.5 * eta * cert.eigmin_R * v5;
                break;
            }
            case FlowKind::Newton: {
                const double c1 = cert.trace_P_star + cert.b2 * cert.norm_Y_star;
                const double v6 = std::max(smp.V6, 0.0);
                const double threshold =
                    std::sqrt(eta * eta * cert.b2 * v6 / (4.0 * norm_R * (v6 + c1)));
                if (smp.W_norm > threshold)
                    continue;
                const Matrix grad_V6 = cb.grad + plant.R() * dK * opt.Y_star;
                const double deriv = (grad_V6.array() * f.array()).sum();
                rep.lemma_id = LemmaId::DescentNewton;
                rep.lhs = -deriv;
                rep.rhs = 0.25 * eta * v6;
                break;
            }
        }
        rep.slack = rep.lhs - rep.rhs;
        reports.push_back(rep);
    }
    return reports;
}

}  // namespace lqrflow
