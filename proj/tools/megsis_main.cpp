// Command-line front end: simulate datasets, fit any sampler, benchmark the
// worker pool, and run convergence diagnostics on stored traces.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "megsis.hpp"

namespace fs = std::filesystem;
using namespace megsis;

namespace {

struct CliOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> workers;
    std::string window;
};

Config resolve_config(const CliOverrides& cli) {
    Config cfg = Config::load(cli.config_path);
    if (cli.seed) cfg.set("seed", *cli.seed);
    if (cli.workers) cfg.set("plan.workers", *cli.workers);
    if (!cli.window.empty()) cfg.set("recording.window", cli.window);
    if (!cli.out.empty()) {
        cfg.set("out", cli.out);
    } else if (const char* env = std::getenv("MEGSIS_OUT_DIR"); env && *env && !cfg.has("out")) {
        cfg.set("out", std::string(env));
    }
    return cfg;
}

std::string out_dir(const Config& cfg) {
    const std::string dir = cfg.get_str("out");
    fs::create_directories(dir);
    return dir;
}

std::uint64_t require_seed(const Config& cfg) {
    if (!cfg.has("seed")) throw ConfigError("seed is required (no wall-clock default)");
    return cfg.get_u64("seed");
}

Vec6 get_vec6(const Config& cfg, const std::string& key, const Vec6& fallback) {
    if (!cfg.has(key)) return fallback;
    const auto vals = cfg.get_doubles(key);
    if (vals.size() == 1) return Vec6::Constant(vals[0]);
    if (vals.size() != 6) throw ConfigError("config key " + key + ": expected 1 or 6 values");
    Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = vals[static_cast<std::size_t>(i)];
    return v;
}

std::pair<int, int> parse_range(const std::string& text, const std::string& what) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError(what + ": expected the form A:B");
    try {
        return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ConfigError(what + ": expected integers in A:B");
    }
}

struct RunInputs {
    ScheduledDynamics dynamics;
    ObsModel obs;
    ObservationSeries ys;
    std::vector<std::pair<std::string, std::string>> input_hashes;
};

RunInputs resolve_inputs(const Config& cfg, std::uint64_t seed) {
    RunInputs in;
    const std::string source = cfg.get_str("scenario.source", cfg.has("scenario.dir")      ? "files"
                                                              : cfg.has("recording.data") ? "recording"
                                                                                          : "preset");
    if (source == "preset") {
        const std::string preset = cfg.get_str("scenario.preset", "case1");
        const std::uint64_t sc_seed = cfg.has("scenario.seed") ? cfg.get_u64("scenario.seed") : seed;
        const double kappa = cfg.get_double("scenario.kappa", kScenarioFieldGain);
        Scenario sc;
        if (preset == "case1")
            sc = gen_case1(sc_seed, kappa, cfg.get_int("scenario.timesteps", 15));
        else if (preset == "case2")
            sc = gen_case2(sc_seed, kappa);
        else
            throw ConfigError("unknown scenario.preset: " + preset);
        in.dynamics = sc.dynamics();
        in.obs = sc.obs;
        in.ys = sc.ys;
    } else if (source == "files") {
        const std::string dir = cfg.get_str("scenario.dir");
        const Scenario sc = load_scenario(dir);
        in.dynamics = sc.dynamics();
        in.obs = sc.obs;
        in.ys = sc.ys;
        for (const char* name : {"scenario.cfg", "truth.csv", "observations.csv", "schedule.csv", "sensors.csv"})
            in.input_hashes.emplace_back(std::string("input.hash.") + name, file_hash(dir + "/" + name));
    } else if (source == "recording") {
        const std::string data = cfg.get_str("recording.data");
        const std::string geometry = cfg.get_str("recording.geometry");
        std::optional<std::pair<int, int>> window;
        if (cfg.has("recording.window")) window = parse_range(cfg.get_str("recording.window"), "recording.window");
        auto [ys, sensors] = ingest_recording(data, geometry, window);
        in.ys = ys;

        ArModel model;
        if (!cfg.has("model.m_ini"))
            throw ConfigError("model.m_ini is required for recorded-data runs (no source estimate is computed)");
        model.m_ini = get_vec6(cfg, "model.m_ini", Vec6::Zero());
        model.m_com = get_vec6(cfg, "model.m_com", Vec6::Zero());
        model.rho = get_vec6(cfg, "model.rho", Vec6::Ones());
        model.sigma2 = get_vec6(cfg, "model.sigma2", Vec6::Constant(0.01));
        if (cfg.has("model.bounds.lo")) model.bounds.lo = get_vec6(cfg, "model.bounds.lo", model.bounds.lo);
        if (cfg.has("model.bounds.hi")) model.bounds.hi = get_vec6(cfg, "model.bounds.hi", model.bounds.hi);
        if (cfg.get_bool("model.fix_moments", false)) model.sigma2.tail<3>().setZero();
        model.validate();

        in.obs.sensors = sensors;
        in.obs.gain = FieldGain(cfg.get_double("obs.kappa", 1.0));
        in.obs.sigma1 = cfg.get_double("obs.sigma1", 0.25);
        in.dynamics = ScheduledDynamics{model, random_walk_variant(model),
                                        std::vector<MoveTag>(static_cast<std::size_t>(in.ys.rows()), MoveTag::ar)};
        in.input_hashes.emplace_back("input.hash.data", file_hash(data));
        in.input_hashes.emplace_back("input.hash.geometry", file_hash(geometry));
    } else {
        throw ConfigError("unknown scenario.source: " + source);
    }
    return in;
}

SisConfig sis_config_from(const Config& cfg, std::uint64_t seed, const std::string& sampler) {
    SisConfig sis;
    sis.m = cfg.get_int("sis.m", 2000);
    sis.m_prime = cfg.get_int("sis.m_prime", 0);
    sis.variant = sampler == "sis_rejection" ? SisVariant::rejection : SisVariant::resampling;
    const std::string mode = cfg.get_str("sis.resample_mode", "ess_threshold");
    if (mode == "final_only")
        sis.resample_mode = ResampleMode::final_only;
    else if (mode == "every_step")
        sis.resample_mode = ResampleMode::every_step;
    else if (mode == "ess_threshold")
        sis.resample_mode = ResampleMode::ess_threshold;
    else
        throw ConfigError("unknown sis.resample_mode: " + mode);
    sis.ess_threshold = cfg.get_double("sis.ess_threshold", 0.5);
    const std::string scheme = cfg.get_str("sis.resample_scheme", "multinomial");
    if (scheme == "multinomial")
        sis.scheme = ResampleScheme::multinomial;
    else if (scheme == "residual")
        sis.scheme = ResampleScheme::residual;
    else if (scheme == "stratified")
        sis.scheme = ResampleScheme::stratified;
    else
        throw ConfigError("unknown sis.resample_scheme: " + scheme);
    sis.seed = seed;
    sis.validate();
    return sis;
}

RunPlan plan_from(const Config& cfg, std::uint64_t seed) {
    RunPlan plan;
    plan.workers = cfg.get_int("plan.workers", 1);
    const std::string pooling = cfg.get_str("plan.pooling", "per_worker");
    if (pooling == "per_worker")
        plan.pooling = Pooling::per_worker;
    else if (pooling == "master_pooled")
        plan.pooling = Pooling::master_pooled;
    else
        throw ConfigError("unknown plan.pooling: " + pooling);
    plan.seed = seed;
    return plan;
}

std::vector<int> diag_timesteps(const Config& cfg, int T) {
    std::vector<int> ts = cfg.has("diag.timesteps") ? cfg.get_ints("diag.timesteps") : std::vector<int>{(T + 1) / 2};
    for (int t : ts)
        if (t < 1 || t > T) throw ConfigError("diag.timesteps: " + std::to_string(t) + " outside 1.." + std::to_string(T));
    return ts;
}

/// Resolved manifest: every knob the run used plus input hashes. Loading the
/// manifest as a config reproduces the run byte for byte.
void write_manifest(const std::string& dir, const Config& cfg, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& hashes) {
    Config manifest;
    manifest.set("command", command);
    for (const auto& key : cfg.keys()) manifest.set(key, cfg.get_str(key));
    for (const auto& [key, value] : hashes) manifest.set(key, value);
    manifest.save(dir + "/manifest.cfg");
}

int cmd_simulate(const CliOverrides& cli) {
    const Config cfg = resolve_config(cli);
    const std::uint64_t seed = require_seed(cfg);
    const std::string dir = out_dir(cfg);
    const std::string preset = cfg.get_str("scenario.preset", "case1");
    const double kappa = cfg.get_double("scenario.kappa", kScenarioFieldGain);
    Scenario sc;
    if (preset == "case1")
        sc = gen_case1(seed, kappa, cfg.get_int("scenario.timesteps", 15));
    else if (preset == "case2")
        sc = gen_case2(seed, kappa);
    else
        throw ConfigError("unknown scenario.preset: " + preset);
    save_scenario(dir, sc);
    write_manifest(dir, cfg, "simulate", {});
    std::cout << "wrote " << sc.name << " scenario (" << sc.timesteps() << " steps, " << sc.channels()
              << " channels) to " << dir << "\n";
    return 0;
}

/// Equal-weight draws of one state component at a fixed timestep, the chain
/// the per-timestep diagnostics run on.
struct DiagnosticTaps {
    int component = 2;
    std::vector<int> timesteps;
    int workers = 1;
    std::uint64_t seed = 0;
    // [timestep index][worker slot] -> draws
    std::vector<std::vector<std::vector<double>>> draws;

    void init(int W) {
        workers = W;
        draws.assign(timesteps.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(W) + 1));
    }

    SisObserverFactory factory() {
        return [this](int w) -> SisObserver {
            const std::size_t slot = w < 0 ? static_cast<std::size_t>(workers) : static_cast<std::size_t>(w);
            return [this, slot, w](const SisStepEvent& ev) {
                for (std::size_t i = 0; i < timesteps.size(); ++i) {
                    if (timesteps[i] != ev.t) continue;
                    RngStream tap_rng(derive_worker_seed(
                        derive_worker_seed(seed, 100000 + static_cast<std::uint64_t>(w + 1)),
                        static_cast<std::uint64_t>(ev.t)));
                    const Eigen::VectorXd w_norm = normalized_weights(ev.ens);
                    const auto idx = detail::multinomial_indices(w_norm, ev.ens.size(), tap_rng);
                    auto& bucket = draws[i][slot];
                    bucket.reserve(idx.size());
                    for (int j : idx) bucket.push_back(ev.ens.current(j).x[component]);
                }
            };
        };
    }

    std::vector<double> pooled(std::size_t i) const {
        std::vector<double> out;
        for (const auto& b : draws[i]) out.insert(out.end(), b.begin(), b.end());
        return out;
    }
};

/// Pooled per-step filtered moments accumulated from observer events.
struct FilteredRecorder {
    int T = 0;
    int workers = 1;
    // [worker slot][t-1] -> (sum w x, sum w x^2, touched)
    std::vector<std::vector<std::tuple<Vec6, Vec6, bool>>> acc;

    void init(int W, int T_) {
        workers = W;
        T = T_;
        acc.assign(static_cast<std::size_t>(W) + 1,
                   std::vector<std::tuple<Vec6, Vec6, bool>>(static_cast<std::size_t>(T),
                                                             {Vec6::Zero(), Vec6::Zero(), false}));
    }

    SisObserverFactory factory() {
        return [this](int w) -> SisObserver {
            const std::size_t slot = w < 0 ? static_cast<std::size_t>(workers) : static_cast<std::size_t>(w);
            return [this, slot](const SisStepEvent& ev) {
                auto& [sx, sxx, touched] = acc[slot][static_cast<std::size_t>(ev.t - 1)];
                const Eigen::VectorXd w_norm = normalized_weights(ev.ens);
                for (int j = 0; j < ev.ens.size(); ++j) {
                    const Vec6& x = ev.ens.current(j).x;
                    sx += w_norm[j] * x;
                    sxx += w_norm[j] * x.cwiseProduct(x);
                }
                touched = true;
            };
        };
    }

    std::pair<Vec6, Vec6> moments(int t) const {
        Vec6 sx = Vec6::Zero(), sxx = Vec6::Zero();
        double share = 0.0;
        for (const auto& per_worker : acc) {
            const auto& [a, b, touched] = per_worker[static_cast<std::size_t>(t - 1)];
            if (!touched) continue;
            sx += a;
            sxx += b;
            share += 1.0;
        }
        if (share > 0.0) {
            sx /= share;
            sxx /= share;
        }
        const Vec6 mean = sx;
        const Vec6 var = (sxx - mean.cwiseProduct(mean)).cwiseMax(0.0);
        return {mean, var};
    }
};

SisObserverFactory combine(const SisObserverFactory& a, const SisObserverFactory& b) {
    return [a, b](int w) -> SisObserver {
        SisObserver oa = a(w), ob = b(w);
        return [oa, ob](const SisStepEvent& ev) {
            if (oa) oa(ev);
            if (ob) ob(ev);
        };
    };
}

void write_summary(const std::string& path, const std::vector<std::pair<Vec6, Vec6>>& per_step) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "t";
    for (const auto& n : state_column_names()) out << ",mean_" << n;
    for (const auto& n : state_column_names()) out << ",sd_" << n;
    out << "\n";
    for (std::size_t t = 0; t < per_step.size(); ++t) {
        out << (t + 1);
        for (int c = 0; c < 6; ++c) out << "," << fmt_double(per_step[t].first[c]);
        for (int c = 0; c < 6; ++c) out << "," << fmt_double(std::sqrt(per_step[t].second[c]));
        out << "\n";
    }
    if (!out) throw DataError("failed writing file: " + path);
}

/// NaN marks a diagnostic whose preconditions the chain does not meet (too
/// short for the pilot, no variation); the run itself is still valid.
double guarded(const std::function<double()>& fn) {
    try {
        return fn();
    } catch (const DataError&) {
        return std::numeric_limits<double>::quiet_NaN();
    } catch (const DegenerateChainError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

diag::DiagnosticsReport chain_report(const std::vector<double>& primary,
                                     const std::vector<std::vector<double>>& chains, int max_lag) {
    diag::DiagnosticsReport rep;
    rep.ess = guarded([&] { return diag::ess(primary); });
    rep.geweke_z = guarded([&] { return diag::geweke(primary); });
    rep.heidelberger_p = guarded([&] { return diag::heidelberger_welch(primary); });
    rep.raftery_lewis_I = guarded([&] { return diag::raftery_lewis(primary); });
    try {
        rep.acf = diag::acf(primary, std::min<int>(max_lag, static_cast<int>(primary.size()) - 1));
    } catch (const DegenerateChainError&) {
        rep.acf = {1.0};
    }
    rep.gelman_rubin = guarded([&] { return diag::gelman_rubin(chains); });
    return rep;
}

diag::DiagnosticsReport tap_report(const std::vector<double>& chain, int max_lag) {
    const auto half = static_cast<std::ptrdiff_t>(chain.size() / 2);
    return chain_report(chain,
                        {std::vector<double>(chain.begin(), chain.begin() + half),
                         std::vector<double>(chain.begin() + half, chain.begin() + 2 * half)},
                        max_lag);
}

int cmd_fit(const CliOverrides& cli) {
    const Config cfg = resolve_config(cli);
    const std::uint64_t seed = require_seed(cfg);
    const std::string dir = out_dir(cfg);
    const std::string sampler = cfg.get_str("sampler");
    const RunInputs in = resolve_inputs(cfg, seed);
    const int T = static_cast<int>(in.ys.rows());
    const std::vector<int> ts = diag_timesteps(cfg, T);
    const int component = cfg.get_int("diag.component", 3) - 1;
    if (component < 0 || component > 5) throw ConfigError("diag.component must be in 1..6");
    const int max_lag = cfg.get_int("diag.max_lag", 40);
    std::vector<DiagnosticsRow> rows;

    if (sampler == "rw_gibbs" || sampler == "hybrid_gibbs" || sampler == "block_gibbs") {
        GibbsConfig gcfg;
        gcfg.n_iter = cfg.get_int("gibbs.n_iter", 2000);
        gcfg.burn_in = cfg.get_int("gibbs.burn_in", 500);
        gcfg.sigma3 = get_vec6(cfg, "gibbs.sigma3", Vec6::Constant(0.0225));
        if (cfg.has("gibbs.block")) gcfg.block = parse_range(cfg.get_str("gibbs.block"), "gibbs.block");
        const int chains = cfg.get_int("gibbs.chains", 2);
        if (chains < 2) throw ConfigError("gibbs.chains must be >= 2 for convergence diagnostics");

        std::vector<ChainTrace> traces;
        for (int k = 0; k < chains; ++k) {
            GibbsConfig each = gcfg;
            each.seed = derive_worker_seed(seed, static_cast<std::uint64_t>(k));
            if (sampler == "rw_gibbs")
                traces.push_back(random_walk_gibbs(in.dynamics, in.obs, in.ys, each));
            else if (sampler == "hybrid_gibbs")
                traces.push_back(hybrid_gibbs(in.dynamics, in.obs, in.ys, each));
            else {
                if (!each.block) each.block = std::make_pair(1, T);
                traces.push_back(block_hybrid_gibbs(in.dynamics, in.obs, in.ys, each));
            }
            write_trace(dir + "/trace_" + std::to_string(k + 1) + ".csv", traces.back());
        }

        {
            std::ofstream acc(dir + "/acceptance.csv");
            if (!acc) throw DataError("cannot write file: " + dir + "/acceptance.csv");
            acc << "t,proposals,accepts,rate\n";
            for (int t = 1; t <= T; ++t)
                acc << t << "," << traces[0].proposal_counts[static_cast<std::size_t>(t - 1)] << ","
                    << traces[0].accept_counts[static_cast<std::size_t>(t - 1)] << ","
                    << fmt_double(traces[0].acceptance_rate(t)) << "\n";
        }

        std::vector<std::pair<Vec6, Vec6>> per_step;
        for (int t = 1; t <= T; ++t) {
            Vec6 mean = Vec6::Zero(), var = Vec6::Zero();
            const int n = traces[0].n_iter - gcfg.burn_in;
            for (int it = gcfg.burn_in; it < traces[0].n_iter; ++it) mean += traces[0].at(it, t);
            mean /= n;
            for (int it = gcfg.burn_in; it < traces[0].n_iter; ++it) {
                const Vec6 d = traces[0].at(it, t) - mean;
                var += d.cwiseProduct(d);
            }
            var /= std::max(1, n - 1);
            per_step.emplace_back(mean, var);
        }
        write_summary(dir + "/summary.csv", per_step);

        for (int t : ts) {
            // Full chains, initialization transient included: the diagnostics
            // are the convergence evidence, so nothing is discarded.
            std::vector<std::vector<double>> all;
            for (const auto& tr : traces) all.push_back(tr.component_chain(t, component));
            rows.push_back({sampler, t, chain_report(all[0], all, max_lag)});
        }
    } else if (sampler == "sis_rejection" || sampler == "sis_resampling") {
        const SisConfig sis = sis_config_from(cfg, seed, sampler);
        const RunPlan plan = plan_from(cfg, seed);

        DiagnosticTaps taps;
        taps.component = component;
        taps.timesteps = ts;
        taps.seed = seed;
        taps.init(plan.workers);
        FilteredRecorder filtered;
        filtered.init(plan.workers, T);

        const auto [ens, timing] =
            run_parallel(in.dynamics, in.obs, in.ys, sis, plan, combine(taps.factory(), filtered.factory()));
        write_paths(dir + "/paths.csv", ens);
        write_weights(dir + "/weights.csv", ens);
        std::vector<std::pair<Vec6, Vec6>> per_step;
        for (int t = 1; t <= T; ++t) per_step.push_back(filtered.moments(t));
        write_summary(dir + "/summary.csv", per_step);

        for (std::size_t i = 0; i < ts.size(); ++i)
            rows.push_back({sampler, ts[i], tap_report(taps.pooled(i), max_lag)});
    } else {
        throw ConfigError("unknown sampler: " + sampler);
    }

    write_diagnostics_csv(dir + "/diagnostics.csv", rows);
    write_diagnostics_report(dir + "/diagnostics_report.txt", rows);
    write_manifest(dir, cfg, "fit", in.input_hashes);
    std::cout << "fit complete: " << sampler << " on " << T << " timesteps, outputs in " << dir << "\n";
    return 0;
}

int cmd_bench(const CliOverrides& cli) {
    const Config cfg = resolve_config(cli);
    const std::uint64_t seed = require_seed(cfg);
    const std::string dir = out_dir(cfg);
    const std::vector<int> workers =
        cfg.has("bench.workers") ? cfg.get_ints("bench.workers") : std::vector<int>{1, 3, 5, 10, 15};
    const std::vector<int> steps =
        cfg.has("bench.timesteps") ? cfg.get_ints("bench.timesteps") : std::vector<int>{100, 500, 1000, 2000};
    const int t_max = *std::max_element(steps.begin(), steps.end());
    const double kappa = cfg.get_double("scenario.kappa", kScenarioFieldGain);
    const Scenario sc = gen_case1(cfg.has("scenario.seed") ? cfg.get_u64("scenario.seed") : seed, kappa, t_max);

    SisConfig sis = sis_config_from(cfg, seed, cfg.get_str("sampler", "sis_resampling"));
    sis.m = cfg.get_int("bench.m", 1500);
    const BenchTable table = bench_scaling(sc.dynamics(), sc.obs, sc.ys, sis, workers, steps);
    write_bench_csv(dir + "/bench.csv", table);
    write_manifest(dir, cfg, "bench", {});
    std::cout << "bench grid " << workers.size() << " x " << steps.size() << " written to " << dir << "\n";
    return 0;
}

int cmd_diagnose(const CliOverrides& cli) {
    const Config cfg = resolve_config(cli);
    const std::string dir = out_dir(cfg);
    std::vector<std::string> trace_paths;
    {
        std::stringstream ss(cfg.get_str("diagnose.traces"));
        std::string item;
        while (std::getline(ss, item, ',')) trace_paths.push_back(item);
    }
    if (trace_paths.empty()) throw ConfigError("diagnose.traces: need at least one trace file");
    std::vector<ChainTrace> traces;
    std::vector<std::pair<std::string, std::string>> hashes;
    for (const auto& p : trace_paths) {
        traces.push_back(read_trace(p));
        hashes.emplace_back("input.hash." + fs::path(p).filename().string(), file_hash(p));
    }
    const int T = traces[0].T;
    const std::vector<int> ts = diag_timesteps(cfg, T);
    const int component = cfg.get_int("diag.component", 3) - 1;
    if (component < 0 || component > 5) throw ConfigError("diag.component must be in 1..6");
    const int max_lag = cfg.get_int("diag.max_lag", 40);

    std::vector<DiagnosticsRow> rows;
    for (int t : ts) {
        const auto primary = traces[0].component_chain(t, component);
        std::vector<std::vector<double>> all;
        if (traces.size() >= 2) {
            for (const auto& tr : traces) all.push_back(tr.component_chain(t, component));
        } else {
            const auto half = static_cast<std::ptrdiff_t>(primary.size() / 2);
            all.push_back(std::vector<double>(primary.begin(), primary.begin() + half));
            all.push_back(std::vector<double>(primary.begin() + half, primary.begin() + 2 * half));
        }
        rows.push_back({"trace", t, chain_report(primary, all, max_lag)});
    }
    write_diagnostics_csv(dir + "/diagnostics.csv", rows);
    write_diagnostics_report(dir + "/diagnostics_report.txt", rows);
    write_manifest(dir, cfg, "diagnose", hashes);
    std::cout << "diagnostics for " << traces.size() << " trace(s) written to " << dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-varying Bayesian dipole fitting for MEG"};
    app.require_subcommand(1);

    CliOverrides cli;
    auto add_common = [&cli](CLI::App* sub) {
        sub->add_option("--config", cli.config_path, "flat key-value config file")->required();
        sub->add_option("--seed", cli.seed, "override the config seed");
        sub->add_option("--out", cli.out, "output directory");
        sub->add_option("--workers", cli.workers, "override plan.workers");
        sub->add_option("--window", cli.window, "recording window T0:T1");
    };

    add_common(app.add_subcommand("simulate", "generate a simulated dataset"));
    add_common(app.add_subcommand("fit", "run a sampler on a dataset"));
    add_common(app.add_subcommand("bench", "scaling benchmark over workers and timesteps"));
    add_common(app.add_subcommand("diagnose", "diagnostics on stored trace files"));

    try {
        app.parse(argc, argv);
        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "simulate") return cmd_simulate(cli);
        if (sub == "fit") return cmd_fit(cli);
        if (sub == "bench") return cmd_bench(cli);
        if (sub == "diagnose") return cmd_diagnose(cli);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const CollapseError& e) {
        std::cerr << "numerical collapse: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
