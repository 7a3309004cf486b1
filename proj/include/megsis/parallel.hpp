#ifndef MEGSIS_PARALLEL_HPP
#define MEGSIS_PARALLEL_HPP

#include <atomic>
#include <barrier>
#include <chrono>
#include <ctime>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "megsis/core.hpp"
#include "megsis/rng.hpp"
#include "megsis/sis.hpp"

namespace megsis {

enum class Pooling { per_worker, master_pooled };

/// Master-worker schedule: W workers each carry m/W sample paths through all
/// timesteps. Worker w draws from the substream derive_worker_seed(seed, w);
/// index W is reserved for the master's own draws (pooled resampling).
struct RunPlan {
    int workers = 1;
    Pooling pooling = Pooling::per_worker;
    std::uint64_t seed = 0;

    void validate(int m) const {
        if (workers < 1) throw ConfigError("RunPlan: workers must be >= 1");
        if (m % workers != 0)
            throw ConfigError("RunPlan: particle count " + std::to_string(m) + " is not divisible by " +
                              std::to_string(workers) + " workers");
    }
};

struct TimingReport {
    double wall_seconds = 0.0;
    double cpu_seconds_total = 0.0;
    std::vector<double> worker_cpu_seconds;
};

inline double thread_cpu_seconds() {
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

/// Per-worker observers: the factory is invoked with the worker index, or
/// with -1 for the master's pooled view in master_pooled mode.
using SisObserverFactory = std::function<SisObserver(int worker_index)>;

namespace detail {

inline void rethrow_worker(std::exception_ptr ep, int worker) {
    try {
        std::rethrow_exception(ep);
    } catch (const CollapseError& e) {
        throw CollapseError("worker " + std::to_string(worker) + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError("worker " + std::to_string(worker) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("worker " + std::to_string(worker) + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error("worker " + std::to_string(worker) + ": " + e.what());
    }
}

template <StateDynamics Dyn, ObservationModel Obs>
ParticleEnsemble run_per_worker(const Dyn& dyn, const Obs& obs, const ObservationSeries& ys,
                                const SisConfig& cfg, const RunPlan& plan, const SisObserverFactory& factory,
                                TimingReport& timing) {
    const int W = plan.workers;
    std::vector<ParticleEnsemble> results(static_cast<std::size_t>(W));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(W));
    timing.worker_cpu_seconds.assign(static_cast<std::size_t>(W), 0.0);

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(W));
    for (int w = 0; w < W; ++w) {
        pool.emplace_back([&, w] {
            const double cpu0 = thread_cpu_seconds();
            try {
                SisConfig local = cfg;
                local.m = cfg.m / W;
                if (cfg.m_prime > 0) {
                    if (cfg.m_prime % W != 0)
                        throw ConfigError("m_prime must be divisible by the worker count");
                    local.m_prime = cfg.m_prime / W;
                }
                RngStream rng(derive_worker_seed(plan.seed, static_cast<std::uint64_t>(w)));
                const SisObserver observer = factory ? factory(w) : SisObserver{};
                results[static_cast<std::size_t>(w)] =
                    cfg.variant == SisVariant::rejection
                        ? sis_rejection_run(dyn, obs, ys, local, rng, observer)
                        : sis_resampling_run(dyn, obs, ys, local, rng, observer);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
            timing.worker_cpu_seconds[static_cast<std::size_t>(w)] = thread_cpu_seconds() - cpu0;
        });
    }
    for (auto& th : pool) th.join();
    for (int w = 0; w < W; ++w)
        if (errors[static_cast<std::size_t>(w)]) rethrow_worker(errors[static_cast<std::size_t>(w)], w);

    // Stack substreams in worker order.
    ParticleEnsemble out;
    for (int w = 0; w < W; ++w) {
        auto& part = results[static_cast<std::size_t>(w)];
        out.paths.insert(out.paths.end(), std::make_move_iterator(part.paths.begin()),
                         std::make_move_iterator(part.paths.end()));
        out.log_weights.insert(out.log_weights.end(), part.log_weights.begin(), part.log_weights.end());
    }
    return out;
}

template <StateDynamics Dyn, ObservationModel Obs>
ParticleEnsemble run_master_pooled(const Dyn& dyn, const Obs& obs, const ObservationSeries& ys,
                                   const SisConfig& cfg, const RunPlan& plan,
                                   const SisObserverFactory& factory, TimingReport& timing) {
    const int W = plan.workers;
    const int m = cfg.m;
    const int block = m / W;
    const int T = static_cast<int>(ys.rows());
    RngStream master_rng(derive_worker_seed(plan.seed, static_cast<std::uint64_t>(W)));
    const SisObserver observer = factory ? factory(-1) : SisObserver{};

    if (cfg.variant == SisVariant::rejection) {
        // Workers run the full frequency-weighted recursion on their blocks;
        // only the final without-replacement selection is pooled.
        SisConfig deferred = cfg;
        std::vector<ParticleEnsemble> results(static_cast<std::size_t>(W));
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(W));
        timing.worker_cpu_seconds.assign(static_cast<std::size_t>(W), 0.0);
        std::vector<std::thread> pool;
        for (int w = 0; w < W; ++w) {
            pool.emplace_back([&, w] {
                const double cpu0 = thread_cpu_seconds();
                try {
                    SisConfig local = deferred;
                    local.m = block;
                    RngStream rng(derive_worker_seed(plan.seed, static_cast<std::uint64_t>(w)));
                    const SisObserver wobs = factory ? factory(w) : SisObserver{};
                    results[static_cast<std::size_t>(w)] = rejection_pass(dyn, obs, ys, local, rng, wobs);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
                timing.worker_cpu_seconds[static_cast<std::size_t>(w)] = thread_cpu_seconds() - cpu0;
            });
        }
        for (auto& th : pool) th.join();
        for (int w = 0; w < W; ++w)
            if (errors[static_cast<std::size_t>(w)]) rethrow_worker(errors[static_cast<std::size_t>(w)], w);

        ParticleEnsemble pooled;
        for (int w = 0; w < W; ++w) {
            auto& part = results[static_cast<std::size_t>(w)];
            const Eigen::VectorXd wts = normalized_weights(part);
            for (int j = 0; j < part.size(); ++j) {
                pooled.paths.push_back(std::move(part.paths[static_cast<std::size_t>(j)]));
                pooled.log_weights.push_back(wts[j] > 0.0 ? std::log(wts[j] / W) : -kInf);
            }
        }
        return without_replacement_select(pooled, cfg.effective_m_prime(), master_rng);
    }

    // Resampling variant in lockstep: workers extend their block each step and
    // the master normalizes the pooled weights, evaluating the pooled ESS at
    // every step, and performs any global resample itself.
    ParticleEnsemble ens;
    ens.paths.resize(static_cast<std::size_t>(m));
    ens.log_weights.assign(static_cast<std::size_t>(m), 0.0);

    std::barrier sync(W + 1);
    std::atomic<bool> abort{false};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(W));
    timing.worker_cpu_seconds.assign(static_cast<std::size_t>(W), 0.0);
    std::exception_ptr master_error;

    std::vector<std::thread> pool;
    for (int w = 0; w < W; ++w) {
        pool.emplace_back([&, w] {
            const double cpu0 = thread_cpu_seconds();
            RngStream rng(derive_worker_seed(plan.seed, static_cast<std::uint64_t>(w)));
            const int lo = w * block, hi = (w + 1) * block;
            try {
                if (!abort.load())
                    for (int j = lo; j < hi; ++j)
                        ens.paths[static_cast<std::size_t>(j)].push_back(dyn.initial().initial_sample(rng));
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
                abort.store(true);
            }
            sync.arrive_and_wait();
            sync.arrive_and_wait();
            for (int t = 1; t <= T; ++t) {
                try {
                    if (!abort.load()) {
                        const ArModel& tr = dyn.at(t);
                        const Eigen::VectorXd y = ys.row(t - 1).transpose();
                        for (int j = lo; j < hi; ++j) {
                            auto& path = ens.paths[static_cast<std::size_t>(j)];
                            path.push_back(tr.transition_sample(path.back(), rng));
                            ens.log_weights[static_cast<std::size_t>(j)] += obs.log_likelihood(path.back(), y);
                        }
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                    abort.store(true);
                }
                sync.arrive_and_wait();
                sync.arrive_and_wait();
            }
            timing.worker_cpu_seconds[static_cast<std::size_t>(w)] = thread_cpu_seconds() - cpu0;
        });
    }

    sync.arrive_and_wait();
    sync.arrive_and_wait();
    for (int t = 1; t <= T; ++t) {
        sync.arrive_and_wait();
        if (!abort.load()) {
            try {
                const double step_ess = ess(ens);
                const bool doit = scheduled_resample(cfg, step_ess, t, T);
                if (observer) observer(SisStepEvent{t, ens, doit});
                if (doit) ens = resample(ens, cfg.scheme, master_rng, m);
            } catch (...) {
                master_error = std::current_exception();
                abort.store(true);
            }
        }
        sync.arrive_and_wait();
    }
    for (auto& th : pool) th.join();
    for (int w = 0; w < W; ++w)
        if (errors[static_cast<std::size_t>(w)]) rethrow_worker(errors[static_cast<std::size_t>(w)], w);
    if (master_error) std::rethrow_exception(master_error);
    return ens;
}

}  // namespace detail

/// Runs the configured SIS variant split across plan.workers substreams and
/// stacks the results. per_worker pooling keeps every resampling decision
/// inside the workers; master_pooled defers it to the master over the pooled,
/// normalized weights.
template <StateDynamics Dyn, ObservationModel Obs>
std::pair<ParticleEnsemble, TimingReport> run_parallel(const Dyn& dyn, const Obs& obs,
                                                       const ObservationSeries& ys, const SisConfig& cfg,
                                                       const RunPlan& plan,
                                                       const SisObserverFactory& factory = {}) {
    cfg.validate();
    plan.validate(cfg.m);
    TimingReport timing;
    const auto wall0 = std::chrono::steady_clock::now();
    const double master_cpu0 = thread_cpu_seconds();

    ParticleEnsemble out = plan.pooling == Pooling::per_worker
                               ? detail::run_per_worker(dyn, obs, ys, cfg, plan, factory, timing)
                               : detail::run_master_pooled(dyn, obs, ys, cfg, plan, factory, timing);

    timing.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    double total = thread_cpu_seconds() - master_cpu0;
    for (double c : timing.worker_cpu_seconds) total += c;
    timing.cpu_seconds_total = total;
    return {std::move(out), timing};
}

/// Timing grid over worker counts and run lengths, mirroring a strong-scaling
/// benchmark table (observations are truncated to each requested length).
struct BenchTable {
    int m = 0;
    std::vector<int> worker_counts;
    std::vector<int> timestep_counts;
    std::vector<std::vector<TimingReport>> cells;  // [worker][timestep]
};

template <StateDynamics Dyn, ObservationModel Obs>
BenchTable bench_scaling(const Dyn& dyn, const Obs& obs, const ObservationSeries& ys, const SisConfig& cfg,
                         const std::vector<int>& worker_counts, const std::vector<int>& timestep_counts) {
    for (int T : timestep_counts)
        if (T > ys.rows()) throw ConfigError("bench_scaling: requested timesteps exceed the observation length");
    BenchTable table;
    table.m = cfg.m;
    table.worker_counts = worker_counts;
    table.timestep_counts = timestep_counts;
    for (int W : worker_counts) {
        std::vector<TimingReport> row;
        for (int T : timestep_counts) {
            RunPlan plan;
            plan.workers = W;
            plan.pooling = Pooling::per_worker;
            plan.seed = cfg.seed;
            const ObservationSeries window = ys.topRows(T);
            row.push_back(run_parallel(dyn, obs, window, cfg, plan).second);
        }
        table.cells.push_back(std::move(row));
    }
    return table;
}

}  // namespace megsis

#endif
