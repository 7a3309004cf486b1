#ifndef MEGSIS_IO_HPP
#define MEGSIS_IO_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "megsis/config.hpp"
#include "megsis/core.hpp"
#include "megsis/diagnostics.hpp"
#include "megsis/gibbs.hpp"
#include "megsis/parallel.hpp"
#include "megsis/scenario.hpp"
#include "megsis/sis.hpp"

namespace megsis {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int cols() const { return static_cast<int>(header.size()); }
    int nrows() const { return static_cast<int>(rows.size()); }
};

namespace io_detail {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace io_detail

/// Rectangular numeric CSV with one header row. Errors carry line numbers.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.header = io_detail::split_line(line);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = io_detail::split_line(line);
        if (cells.size() != table.header.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(table.header.size()) + " columns, found " +
                            std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            char* end = nullptr;
            row[c] = std::strtod(cells[c].c_str(), &end);
            if (end == cells[c].c_str() || *end != '\0')
                throw DataError(path + ":" + std::to_string(lineno) + ": non-numeric cell '" + cells[c] + "'");
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline void write_observations(const std::string& path, const ObservationSeries& ys) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "t";
    for (int k = 1; k <= ys.cols(); ++k) out << ",ch_" << k;
    out << "\n";
    for (int t = 0; t < ys.rows(); ++t) {
        out << (t + 1);
        for (int k = 0; k < ys.cols(); ++k) out << "," << fmt_double(ys(t, k));
        out << "\n";
    }
    if (!out) throw DataError("failed writing file: " + path);
}

inline ObservationSeries read_observations(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.cols() < 2 || table.header.front() != "t")
        throw DataError(path + ": expected header 't, ch_1, ...'");
    ObservationSeries ys(table.nrows(), table.cols() - 1);
    for (int i = 0; i < table.nrows(); ++i)
        for (int c = 1; c < table.cols(); ++c) ys(i, c - 1) = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    return ys;
}

inline void write_geometry(const std::string& path, const SensorArray& sensors) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "x,y,z\n";
    for (const auto& r : sensors.positions)
        out << fmt_double(r.x()) << "," << fmt_double(r.y()) << "," << fmt_double(r.z()) << "\n";
    if (!out) throw DataError("failed writing file: " + path);
}

inline SensorArray read_geometry(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.cols() != 3) throw DataError(path + ": geometry file needs exactly x,y,z columns");
    std::vector<Vec3> pos;
    pos.reserve(table.rows.size());
    for (const auto& row : table.rows) pos.emplace_back(row[0], row[1], row[2]);
    return SensorArray(std::move(pos), Vec3(0, 0, 1));
}

inline const std::vector<std::string>& state_column_names() {
    static const std::vector<std::string> names{"x", "y", "z", "m1", "m2", "s"};
    return names;
}

inline void write_truth(const std::string& path, const Eigen::MatrixXd& truth) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "t";
    for (const auto& n : state_column_names()) out << "," << n;
    out << "\n";
    for (int t = 0; t < truth.rows(); ++t) {
        out << (t + 1);
        for (int c = 0; c < 6; ++c) out << "," << fmt_double(truth(t, c));
        out << "\n";
    }
    if (!out) throw DataError("failed writing file: " + path);
}

inline Eigen::MatrixXd read_truth(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.cols() != 7) throw DataError(path + ": truth file needs t plus 6 state columns");
    Eigen::MatrixXd truth(table.nrows(), 6);
    for (int i = 0; i < table.nrows(); ++i)
        for (int c = 0; c < 6; ++c) truth(i, c) = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c + 1)];
    return truth;
}

inline void write_schedule(const std::string& path, const std::vector<MoveTag>& schedule) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "t,move\n";
    for (std::size_t t = 0; t < schedule.size(); ++t)
        out << (t + 1) << "," << (schedule[t] == MoveTag::ar ? "ar" : "random_walk") << "\n";
    if (!out) throw DataError("failed writing file: " + path);
}

inline std::vector<MoveTag> read_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    std::getline(in, line);
    std::vector<MoveTag> schedule;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = io_detail::split_line(line);
        if (cells.size() != 2) throw DataError(path + ":" + std::to_string(lineno) + ": expected 't,move'");
        if (cells[1] == "ar")
            schedule.push_back(MoveTag::ar);
        else if (cells[1] == "random_walk")
            schedule.push_back(MoveTag::random_walk);
        else
            throw DataError(path + ":" + std::to_string(lineno) + ": unknown move '" + cells[1] + "'");
    }
    return schedule;
}

inline void write_paths(const std::string& path, const ParticleEnsemble& ens) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "particle,t";
    for (const auto& n : state_column_names()) out << "," << n;
    out << "\n";
    for (int j = 0; j < ens.size(); ++j) {
        const auto& p = ens.paths[static_cast<std::size_t>(j)];
        for (std::size_t t = 0; t < p.size(); ++t) {
            out << j << "," << t;
            for (int c = 0; c < 6; ++c) out << "," << fmt_double(p[t].x[c]);
            out << "\n";
        }
    }
    if (!out) throw DataError("failed writing file: " + path);
}

inline void write_weights(const std::string& path, const ParticleEnsemble& ens) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "particle,log_weight\n";
    for (int j = 0; j < ens.size(); ++j)
        out << j << "," << fmt_double(ens.log_weights[static_cast<std::size_t>(j)]) << "\n";
    if (!out) throw DataError("failed writing file: " + path);
}

inline void write_trace(const std::string& path, const ChainTrace& trace) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "iteration,t";
    for (const auto& n : state_column_names()) out << "," << n;
    out << "\n";
    for (int it = 0; it < trace.n_iter; ++it)
        for (int t = 1; t <= trace.T; ++t) {
            out << it << "," << t;
            const Vec6& v = trace.at(it, t);
            for (int c = 0; c < 6; ++c) out << "," << fmt_double(v[c]);
            out << "\n";
        }
    if (!out) throw DataError("failed writing file: " + path);
}

inline ChainTrace read_trace(const std::string& path) {
    const CsvTable table = read_csv(path);
    if (table.cols() != 8) throw DataError(path + ": trace file needs iteration,t plus 6 state columns");
    ChainTrace trace;
    int max_iter = -1, max_t = 0;
    for (const auto& row : table.rows) {
        max_iter = std::max(max_iter, static_cast<int>(row[0]));
        max_t = std::max(max_t, static_cast<int>(row[1]));
    }
    trace.n_iter = max_iter + 1;
    trace.T = max_t;
    trace.samples.assign(static_cast<std::size_t>(trace.n_iter) * trace.T, Vec6::Zero());
    trace.accept_counts.assign(static_cast<std::size_t>(trace.T), 0);
    trace.proposal_counts.assign(static_cast<std::size_t>(trace.T), 0);
    if (table.nrows() != trace.n_iter * trace.T)
        throw DataError(path + ": trace is not a full iteration x timestep grid");
    for (const auto& row : table.rows) {
        const int it = static_cast<int>(row[0]);
        const int t = static_cast<int>(row[1]);
        Vec6 v;
        for (int c = 0; c < 6; ++c) v[c] = row[static_cast<std::size_t>(c + 2)];
        trace.samples[static_cast<std::size_t>(it) * trace.T + (t - 1)] = v;
    }
    return trace;
}

inline void save_scenario(const std::string& dir, const Scenario& sc) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    Config cfg;
    cfg.set("scenario.name", sc.name);
    cfg.set("scenario.seed", sc.seed);
    for (int i = 0; i < 6; ++i) {
        cfg.set("model.m_ini." + std::to_string(i), sc.model.m_ini[i]);
        cfg.set("model.m_com." + std::to_string(i), sc.model.m_com[i]);
        cfg.set("model.rho." + std::to_string(i), sc.model.rho[i]);
        cfg.set("model.sigma2." + std::to_string(i), sc.model.sigma2[i]);
        cfg.set("model.bounds.lo." + std::to_string(i), sc.model.bounds.lo[i]);
        cfg.set("model.bounds.hi." + std::to_string(i), sc.model.bounds.hi[i]);
    }
    cfg.set("obs.sigma1", sc.obs.sigma1);
    cfg.set("obs.kappa", sc.obs.gain.kappa);
    cfg.set("obs.min_separation", sc.obs.min_separation);
    cfg.set("head.kind", sc.head.kind == HeadRegion::Kind::box ? "box" : "ball");
    for (int i = 0; i < 3; ++i) {
        cfg.set("head.lo." + std::to_string(i), sc.head.lo[i]);
        cfg.set("head.hi." + std::to_string(i), sc.head.hi[i]);
        cfg.set("head.center." + std::to_string(i), sc.head.center[i]);
    }
    cfg.set("head.radius", sc.head.radius);
    cfg.save(dir + "/scenario.cfg");
    write_truth(dir + "/truth.csv", sc.truth);
    write_observations(dir + "/observations.csv", sc.ys);
    write_schedule(dir + "/schedule.csv", sc.schedule);
    write_geometry(dir + "/sensors.csv", sc.obs.sensors);
}

inline Scenario load_scenario(const std::string& dir) {
    const Config cfg = Config::load(dir + "/scenario.cfg");
    Scenario sc;
    sc.name = cfg.get_str("scenario.name");
    sc.seed = cfg.get_u64("scenario.seed");
    for (int i = 0; i < 6; ++i) {
        sc.model.m_ini[i] = cfg.get_double("model.m_ini." + std::to_string(i));
        sc.model.m_com[i] = cfg.get_double("model.m_com." + std::to_string(i));
        sc.model.rho[i] = cfg.get_double("model.rho." + std::to_string(i));
        sc.model.sigma2[i] = cfg.get_double("model.sigma2." + std::to_string(i));
        sc.model.bounds.lo[i] = cfg.get_double("model.bounds.lo." + std::to_string(i));
        sc.model.bounds.hi[i] = cfg.get_double("model.bounds.hi." + std::to_string(i));
    }
    sc.obs.sigma1 = cfg.get_double("obs.sigma1");
    sc.obs.gain = FieldGain(cfg.get_double("obs.kappa"));
    sc.obs.min_separation = cfg.get_double("obs.min_separation");
    sc.head.kind = cfg.get_str("head.kind") == "ball" ? HeadRegion::Kind::ball : HeadRegion::Kind::box;
    for (int i = 0; i < 3; ++i) {
        sc.head.lo[i] = cfg.get_double("head.lo." + std::to_string(i));
        sc.head.hi[i] = cfg.get_double("head.hi." + std::to_string(i));
        sc.head.center[i] = cfg.get_double("head.center." + std::to_string(i));
    }
    sc.head.radius = cfg.get_double("head.radius");
    sc.truth = read_truth(dir + "/truth.csv");
    sc.ys = read_observations(dir + "/observations.csv");
    sc.schedule = read_schedule(dir + "/schedule.csv");
    sc.obs.sensors = read_geometry(dir + "/sensors.csv");
    if (static_cast<int>(sc.schedule.size()) != sc.ys.rows())
        throw DataError(dir + ": schedule length does not match the observation rows");
    return sc;
}

/// Windowed ingestion of a recorded channel x time CSV plus its sensor
/// geometry sidecar. The window is inclusive in the units of the t column.
inline std::pair<ObservationSeries, SensorArray> ingest_recording(
    const std::string& data_path, const std::string& geometry_path,
    std::optional<std::pair<int, int>> window = std::nullopt) {
    const CsvTable table = read_csv(data_path);
    if (table.cols() < 2 || table.header.front() != "t")
        throw DataError(data_path + ": expected header 't, ch_1, ...'");
    if (table.nrows() == 0) throw DataError(data_path + ": no data rows");
    const SensorArray sensors = read_geometry(geometry_path);
    const int channels = table.cols() - 1;
    if (channels != sensors.size())
        throw DataError("channel count mismatch: data has " + std::to_string(channels) +
                        " channels but the geometry lists " + std::to_string(sensors.size()) + " sensors");

    int lo = static_cast<int>(table.rows.front()[0]);
    int hi = static_cast<int>(table.rows.back()[0]);
    if (window) {
        if (window->first > window->second || window->first < lo || window->second > hi)
            throw DataError("window " + std::to_string(window->first) + ":" + std::to_string(window->second) +
                            " is outside the recording range " + std::to_string(lo) + ":" + std::to_string(hi));
        lo = window->first;
        hi = window->second;
    }
    std::vector<const std::vector<double>*> keep;
    for (const auto& row : table.rows) {
        const int t = static_cast<int>(row[0]);
        if (t >= lo && t <= hi) keep.push_back(&row);
    }
    ObservationSeries ys(static_cast<int>(keep.size()), channels);
    for (std::size_t i = 0; i < keep.size(); ++i)
        for (int c = 0; c < channels; ++c) ys(static_cast<int>(i), c) = (*keep[i])[static_cast<std::size_t>(c + 1)];
    return {ys, sensors};
}

struct DiagnosticsRow {
    std::string method;
    int timestep = 0;
    diag::DiagnosticsReport report;
};

inline void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "method,timestep,ess,gelman_rubin,geweke_z,heidelberger_p,raftery_lewis_I\n";
    for (const auto& r : rows) {
        out << r.method << "," << r.timestep << "," << fmt_double(r.report.ess) << ","
            << fmt_double(r.report.gelman_rubin) << "," << fmt_double(r.report.geweke_z) << ","
            << fmt_double(r.report.heidelberger_p) << "," << fmt_double(r.report.raftery_lewis_I) << "\n";
    }
    if (!out) throw DataError("failed writing file: " + path);
}

inline void write_diagnostics_report(const std::string& path, const std::vector<DiagnosticsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    for (const auto& r : rows) {
        out << "method: " << r.method << "\n";
        out << "timestep: " << r.timestep << "\n";
        out << "ess: " << fmt_double(r.report.ess) << "\n";
        out << "gelman_rubin: " << fmt_double(r.report.gelman_rubin) << "\n";
        out << "geweke_z: " << fmt_double(r.report.geweke_z) << "\n";
        out << "heidelberger_p: " << fmt_double(r.report.heidelberger_p) << "\n";
        out << "raftery_lewis_I: " << fmt_double(r.report.raftery_lewis_I) << "\n";
        out << "acf:";
        for (double a : r.report.acf) out << " " << fmt_double(a);
        out << "\n\n";
    }
    if (!out) throw DataError("failed writing file: " + path);
}

/// Table-shaped scaling output: one row per worker count, cpu seconds and
/// wall minutes per timestep column.
inline void write_bench_csv(const std::string& path, const BenchTable& table) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out << "workers,load_per_task";
    for (int T : table.timestep_counts) out << ",cpu_s_T" << T << ",wall_min_T" << T;
    out << "\n";
    for (std::size_t w = 0; w < table.worker_counts.size(); ++w) {
        out << table.worker_counts[w] << "," << table.m / table.worker_counts[w];
        for (std::size_t c = 0; c < table.timestep_counts.size(); ++c) {
            const TimingReport& r = table.cells[w][c];
            out << "," << fmt_double(r.cpu_seconds_total) << "," << fmt_double(r.wall_seconds / 60.0);
        }
        out << "\n";
    }
    if (!out) throw DataError("failed writing file: " + path);
}

/// FNV-1a 64-bit content hash, hex encoded; used in run manifests.
inline std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for hashing: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace megsis

#endif
