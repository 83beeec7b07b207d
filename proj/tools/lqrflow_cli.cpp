// lqrflow experiment driver: loads a JSON experiment config and runs lemma
// certification batches, single flow trajectories, ISS amplitude sweeps, the
// scalar counterexample, or the gradient-saturation table. All artifacts are
// deterministic given the config and master seed.

#include "lqrflow/lqrflow.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace lqrflow;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitLeftAdmissibleSet = 3;
constexpr int kExitNumerical = 4;

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const std::string& k : allowed)
            if (it.key() == k)
                ok = true;
        if (!ok)
            throw ConfigError("unknown field '" + it.key() + "' in " + where);
    }
}

std::uint64_t seed_of(const json& j, const std::string& key, std::uint64_t fallback) {
    return j.contains(key) ? j.at(key).get<std::uint64_t>() : fallback;
}

PlantModel plant_from_config(const json& cfg, std::uint64_t master_seed) {
    if (!cfg.contains("plant"))
        throw ConfigError("config missing 'plant' section");
    const json& p = cfg.at("plant");
    require_keys(p, {"builtin", "path", "inline", "n", "m", "seed"}, "plant");
    if (p.contains("builtin")) {
        const std::string name = p.at("builtin").get<std::string>();
        if (name == "one_dim")
            return PlantModel::one_dim();
        if (name == "random")
            return random_plant(p.at("n").get<int>(), p.at("m").get<int>(),
                                seed_of(p, "seed", master_seed));
        throw ConfigError("unknown builtin plant '" + name + "'");
    }
    if (p.contains("path"))
        return load_plant(p.at("path").get<std::string>());
    if (p.contains("inline"))
        return plant_from_json(p.at("inline"));
    throw ConfigError("plant section needs 'builtin', 'path', or 'inline'");
}

FlowKind flow_kind_of(const std::string& name) {
    if (name == "standard") return FlowKind::Standard;
    if (name == "natural") return FlowKind::Natural;
    if (name == "newton") return FlowKind::Newton;
    throw ConfigError("unknown flow kind '" + name + "'");
}

GainMatrix initial_gain(const json& flow, const PlantModel& plant, std::uint64_t master_seed) {
    if (!flow.contains("K0") || flow.at("K0") == "optimal")
        return plant.gain(plant.optimal().K_star);
    const json& k0 = flow.at("K0");
    if (k0.is_array())
        return plant.gain(matrix_from_json(k0, "K0"));
    require_keys(k0, {"rho", "seed"}, "flow.K0");
    std::mt19937_64 rng(seed_of(k0, "seed", master_seed));
    return random_stabilizing_gain(plant, k0.at("rho").get<double>(), rng);
}

IntegrateOptions integ_options(const json& cfg) {
    IntegrateOptions opts;
    if (!cfg.contains("integration"))
        return opts;
    const json& i = cfg.at("integration");
    require_keys(i, {"h", "s_max", "record_every", "converge_tol"}, "integration");
    if (i.contains("h")) opts.h = i.at("h").get<double>();
    if (i.contains("s_max")) opts.s_max = i.at("s_max").get<double>();
    if (i.contains("record_every")) opts.record_every = i.at("record_every").get<int>();
    if (i.contains("converge_tol")) opts.converge_tol = i.at("converge_tol").get<double>();
    if (!(opts.h > 0.0) || !(opts.s_max > 0.0) || opts.record_every < 1)
        throw ConfigError("integration: h, s_max must be positive and record_every >= 1");
    return opts;
}

std::unique_ptr<DisturbanceSignal> signal_from_config(const json& cfg, double eta,
                                                      std::uint64_t master_seed) {
    if (!cfg.contains("disturbance"))
        return std::make_unique<ZeroSignal>();
    const json& d = cfg.at("disturbance");
    require_keys(d, {"kind", "amplitude", "omega", "phase", "seed", "estimator"}, "disturbance");
    const std::string kind = d.value("kind", "zero");
    const double amp = d.value("amplitude", 0.0);
    const std::uint64_t seed = seed_of(d, "seed", master_seed);
    if (kind == "zero")
        return std::make_unique<ZeroSignal>();
    if (kind == "constant")
        return std::make_unique<ConstantMatrixSignal>(amp, seed);
    if (kind == "sinusoidal")
        return std::make_unique<SinusoidalMatrixSignal>(amp, d.value("omega", 1.0),
                                                        d.value("phase", 0.0), seed);
    if (kind == "bounded_noise")
        return std::make_unique<BoundedNoiseSignal>(amp, seed);
    if (kind == "estimator_residual") {
        EstimatorConfig ecfg;
        if (d.contains("estimator")) {
            const json& e = d.at("estimator");
            require_keys(e, {"radius", "num_samples", "scheme", "seed"}, "disturbance.estimator");
            ecfg.radius = e.value("radius", ecfg.radius);
            ecfg.num_samples = e.value("num_samples", ecfg.num_samples);
            const std::string scheme = e.value("scheme", "two_point_sphere");
            if (scheme == "two_point_sphere")
                ecfg.scheme = EstimatorScheme::TwoPointSphere;
            else if (scheme == "coordinate_fd")
                ecfg.scheme = EstimatorScheme::CoordinateFD;
            else
                throw ConfigError("unknown estimator scheme '" + scheme + "'");
            ecfg.seed = seed_of(e, "seed", seed);
        } else {
            ecfg.seed = seed;
        }
        return std::make_unique<EstimatorResidualSignal>(ecfg, eta);
    }
    throw ConfigError("unknown disturbance kind '" + kind + "'");
}

std::string artifact_banner(const json& cfg) {
    return std::string("# lqrflow ") + kVersion + "\n# config " + cfg.dump() + "\n";
}

json sidecar_base(const json& cfg, std::uint64_t master_seed) {
    return json{{"version", kVersion}, {"config", cfg}, {"master_seed", master_seed}};
}

std::filesystem::path output_dir(const json& cfg) {
    std::filesystem::path dir = cfg.value("output_dir", std::string("out"));
    std::filesystem::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------

int cmd_certify(const json& cfg, std::uint64_t master_seed) {
    const json& c = cfg.contains("certify") ? cfg.at("certify") : json::object();
    require_keys(c, {"plants", "samples_per_radius", "radii"}, "certify");
    const int samples = c.value("samples_per_radius", 100);
    std::vector<double> radii = c.value("radii", std::vector<double>{0.1, 1.0, 10.0});

    std::vector<PlantModel> plants;
    if (c.contains("plants")) {
        for (const json& p : c.at("plants")) {
            require_keys(p, {"n", "m", "seed"}, "certify.plants[]");
            plants.push_back(random_plant(p.at("n").get<int>(), p.at("m").get<int>(),
                                          seed_of(p, "seed", master_seed)));
        }
    } else {
        plants.push_back(plant_from_config(cfg, master_seed));
    }

    std::vector<LemmaCsvRow> rows;
    long violations = 0;
    std::uint64_t stream = 0;
    for (const PlantModel& plant : plants) {
        for (double rho : radii) {
            for (int i = 0; i < samples; ++i) {
                const std::uint64_t seed = mix_seed(master_seed, stream++);
                std::mt19937_64 rng(seed);
                GainMatrix g = random_stabilizing_gain(plant, rho, rng);
                const double dK = (g.K - plant.optimal().K_star).norm();
                for (LemmaId id : kAllLemmas) {
                    BoundReport rep = check_lemma(plant, g, id);
                    rows.push_back({id, seed, dK, rep.lhs, rep.rhs, rep.slack});
                    if (!lemma_holds(rep))
                        ++violations;
                }
            }
        }
    }

    const auto dir = output_dir(cfg);
    write_file((dir / "lemmas.csv").string(), artifact_banner(cfg) + lemma_csv(rows));
    json summary = sidecar_base(cfg, master_seed);
    summary["rows"] = rows.size();
    summary["violations"] = violations;
    write_file((dir / "certify_summary.json").string(), summary.dump(2) + "\n");
    std::printf("certify: %zu lemma checks, %ld violations\n", rows.size(), violations);
    return violations == 0 ? kExitOk : kExitNumerical;
}

int cmd_flow(const json& cfg, std::uint64_t master_seed) {
    const PlantModel plant = plant_from_config(cfg, master_seed);
    const json& f = cfg.contains("flow") ? cfg.at("flow") : json::object();
    require_keys(f, {"kind", "eta", "K0"}, "flow");
    const FlowKind kind = flow_kind_of(f.value("kind", "standard"));
    const double eta = f.value("eta", 1.0);
    const GainMatrix K0 = initial_gain(f, plant, master_seed);
    auto signal = signal_from_config(cfg, eta, master_seed);
    const IntegrateOptions opts = integ_options(cfg);

    Trajectory traj = integrate(plant, K0, kind, eta, *signal, opts);

    const auto dir = output_dir(cfg);
    write_file((dir / "trajectory.csv").string(), artifact_banner(cfg) + trajectory_csv(traj));
    json sidecar = sidecar_base(cfg, master_seed);
    sidecar["exit"] = exit_name(traj.exit);
    sidecar["samples"] = traj.samples.size();
    sidecar["final_V3"] = traj.samples.back().V3;
    sidecar["signal_kind"] = signal->kind_name();
    sidecar["realized_W_ess_sup"] = signal->realized_ess_sup();
    sidecar["estimator_rejections"] = signal->rejection_count();
    write_file((dir / "trajectory.json").string(), sidecar.dump(2) + "\n");
    std::printf("flow: exit=%s final V3=%s\n", exit_name(traj.exit),
                format_double(traj.samples.back().V3).c_str());
    return traj.exit == ExitStatus::LeftAdmissibleSet ? kExitLeftAdmissibleSet : kExitOk;
}

int cmd_sweep(const json& cfg, std::uint64_t master_seed) {
    const PlantModel plant = plant_from_config(cfg, master_seed);
    const json& f = cfg.contains("flow") ? cfg.at("flow") : json::object();
    require_keys(f, {"kind", "eta", "K0"}, "flow");
    const FlowKind kind = flow_kind_of(f.value("kind", "standard"));
    const double eta = f.value("eta", 1.0);
    const GainMatrix K0 = initial_gain(f, plant, master_seed);

    if (!cfg.contains("sweep"))
        throw ConfigError("sweep command requires a 'sweep' section");
    const json& s = cfg.at("sweep");
    require_keys(s, {"amplitudes", "num_seeds", "signal_kind"}, "sweep");
    std::vector<double> amplitudes = s.value("amplitudes", std::vector<double>{});
    if (amplitudes.empty())
        throw ConfigError("sweep: amplitude grid must be nonempty");
    const int num_seeds = s.value("num_seeds", 5);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < num_seeds; ++i)
        seeds.push_back(mix_seed(master_seed, 1000 + i));

    EnvelopeOptions eopts;
    eopts.integ = integ_options(cfg);
    const std::string sk = s.value("signal_kind", "bounded_noise");
    if (sk == "constant")
        eopts.signal_kind = EnvelopeSignalKind::ConstantMatrix;
    else if (sk == "sinusoidal")
        eopts.signal_kind = EnvelopeSignalKind::SinusoidalMatrix;
    else if (sk == "bounded_noise")
        eopts.signal_kind = EnvelopeSignalKind::BoundedNoise;
    else
        throw ConfigError("unknown sweep signal_kind '" + sk + "'");

    IssEnvelope env =
        fit_envelope(plant, kind, eta, amplitudes, seeds, eopts.integ.s_max, K0, eopts);

    const auto dir = output_dir(cfg);
    json out = sidecar_base(cfg, master_seed);
    out["amplitudes"] = env.amplitudes;
    out["gamma_hat"] = env.gamma_hat;
    out["spread"] = env.spread;
    out["exceeded"] = env.exceeded;
    out["monotone"] = envelope_monotone(env);
    write_file((dir / "envelope.json").string(), out.dump(2) + "\n");
    std::printf("sweep: %zu amplitudes, monotone=%d\n", env.amplitudes.size(),
                envelope_monotone(env) ? 1 : 0);
    return kExitOk;
}

int cmd_counterexample(const json& cfg, std::uint64_t master_seed) {
    if (!cfg.contains("counterexample"))
        throw ConfigError("counterexample command requires a 'counterexample' section");
    const json& c = cfg.at("counterexample");
    require_keys(c, {"w_bar", "chi0", "t_max"}, "counterexample");
    CounterexampleRun run = run_counterexample(c.at("w_bar").get<double>(),
                                               c.at("chi0").get<double>(),
                                               c.value("t_max", 1e3));
    const auto dir = output_dir(cfg);
    write_file((dir / "counterexample.csv").string(),
               artifact_banner(cfg) + counterexample_csv(run));
    json sidecar = sidecar_base(cfg, master_seed);
    sidecar["diverged"] = run.diverged;
    sidecar["threshold"] = counterexample_threshold(run.w_bar);
    sidecar["final_chi"] = run.chi.back();
    write_file((dir / "counterexample.json").string(), sidecar.dump(2) + "\n");
    std::printf("counterexample: diverged=%d final chi=%s\n", run.diverged ? 1 : 0,
                format_double(run.chi.back()).c_str());
    return kExitOk;
}

int cmd_saturation(const json& cfg, std::uint64_t master_seed) {
    std::vector<double> grid;
    if (cfg.contains("saturation")) {
        const json& s = cfg.at("saturation");
        require_keys(s, {"z_grid"}, "saturation");
        grid = s.value("z_grid", grid);
    }
    if (grid.empty())
        for (double z = 1.5; z <= 1e6; z *= 2.0)
            grid.push_back(z);
    auto rows = saturation_demo(grid);
    const auto dir = output_dir(cfg);
    write_file((dir / "saturation.csv").string(), artifact_banner(cfg) + saturation_csv(rows));
    (void)master_seed;
    std::printf("saturation: %zu grid points, last |J2'| = %s\n", rows.size(),
                format_double(rows.back().grad_abs).c_str());
    return kExitOk;
}

const std::vector<std::string> kTopLevelKeys = {
    "plant",   "flow",           "disturbance", "integration", "sweep",
    "certify", "counterexample", "saturation",  "output_dir",  "master_seed",
    "tolerances"};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LQR policy-gradient flows with small-disturbance robustness certification"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed_override;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--seed", seed_override, "override the config's master seed");
    };
    CLI::App* certify = app.add_subcommand("certify", "batch lemma certification");
    CLI::App* flow = app.add_subcommand("flow", "integrate one flow trajectory");
    CLI::App* sweep = app.add_subcommand("sweep", "ISS amplitude sweep");
    CLI::App* counter = app.add_subcommand("counterexample", "scalar iISS counterexample");
    CLI::App* saturation = app.add_subcommand("saturation", "gradient saturation table");
    for (CLI::App* sub : {certify, flow, sweep, counter, saturation})
        add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        std::ifstream in(config_path);
        if (!in)
            throw ConfigError("cannot open config file: " + config_path);
        json cfg;
        try {
            in >> cfg;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed config JSON: ") + e.what());
        }
        require_keys(cfg, kTopLevelKeys, "config");
        const std::uint64_t master_seed =
            seed_override ? *seed_override : cfg.value("master_seed", std::uint64_t{0});

        if (certify->parsed()) return cmd_certify(cfg, master_seed);
        if (flow->parsed()) return cmd_flow(cfg, master_seed);
        if (sweep->parsed()) return cmd_sweep(cfg, master_seed);
        if (counter->parsed()) return cmd_counterexample(cfg, master_seed);
        if (saturation->parsed()) return cmd_saturation(cfg, master_seed);
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}
