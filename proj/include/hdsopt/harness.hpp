#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hdsopt/bench.hpp"
#include "hdsopt/errors.hpp"
#include "hdsopt/fdt.hpp"
#include "hdsopt/gpt.hpp"
#include "hdsopt/gpucb.hpp"
#include "hdsopt/hds.hpp"

namespace hdsopt {

enum class Method { hds_fdt, hds_gpt, hds_fdt_fixed, cws };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::hds_fdt: return "hds_fdt";
        case Method::hds_gpt: return "hds_gpt";
        case Method::hds_fdt_fixed: return "hds_fdt_fixed";
        case Method::cws: return "cws";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "hds_fdt") return Method::hds_fdt;
    if (s == "hds_gpt") return Method::hds_gpt;
    if (s == "hds_fdt_fixed") return Method::hds_fdt_fixed;
    if (s == "cws") return Method::cws;
    throw ConfigError("unknown method: " + s);
}

inline std::string to_string(BenchmarkKind k) {
    switch (k) {
        case BenchmarkKind::gp: return "gp";
        case BenchmarkKind::quad: return "quad";
        case BenchmarkKind::quadmix: return "quadmix";
        case BenchmarkKind::branin: return "branin";
        case BenchmarkKind::beale: return "beale";
    }
    return "?";
}

inline BenchmarkKind parse_benchmark(const std::string& s) {
    if (s == "gp") return BenchmarkKind::gp;
    if (s == "quad") return BenchmarkKind::quad;
    if (s == "quadmix") return BenchmarkKind::quadmix;
    if (s == "branin") return BenchmarkKind::branin;
    if (s == "beale") return BenchmarkKind::beale;
    throw ConfigError("unknown benchmark: " + s);
}

// Flat experiment description; one JSON object with exactly these keys.
struct ExperimentConfig {
    BenchmarkKind benchmark = BenchmarkKind::gp;
    Method method = Method::hds_fdt;
    int D = 200;
    int d = 2;
    std::vector<int> active_dims;  // empty: drawn per trial from the trial seed
    double noise_var = 0.1;
    double sigma_s2 = 1.0;
    double bandwidth = 0.1;
    int resolution = 0;
    bool standardize = true;  // serve cost benchmarks standardized from held-out probes
    long budget = 2000;
    double theta1 = 10.0;
    double theta0 = -10.0;
    int fixed_pairs = 32;
    double fixed_alpha = 0.05;
    int cws_pairs_per_dim = 0;  // 0: largest n with 2 * D * n <= budget
    int horizon = 0;            // 0: selection only
    double delta_o = 0.05;
    int candidates_per_step = 0;
    int trials = 20;
    std::uint64_t base_seed = 1;
    std::string output_path;
    int jobs = 0;  // parallel trials; 0 = hardware concurrency

    void validate() const {
        if (trials < 1) throw ConfigError("config: trials must be >= 1");
        if (D < 1) throw ConfigError("config: D must be >= 1");
        if (active_dims.empty() && (d < 1 || d > D))
            throw ConfigError("config: d must be in [1, D]");
        if (!(noise_var > 0.0)) throw ConfigError("config: noise_var must be positive");
        if (!(sigma_s2 > 0.0 && bandwidth > 0.0))
            throw ConfigError("config: sigma_s2 and bandwidth must be positive");
        if (budget < 0) throw ConfigError("config: budget must be >= 0");
        if (!(theta1 > 0.0)) throw ConfigError("config: theta1 must be positive");
        if (!(theta0 < 0.0)) throw ConfigError("config: theta0 must be negative");
        if (horizon < 0) throw ConfigError("config: horizon must be >= 0");
        if (horizon > 0 && !(delta_o > 0.0 && delta_o < 1.0))
            throw ConfigError("config: delta_o must be in (0, 1)");
    }

    HdsConfig hds_config() const {
        HdsConfig h;
        h.budget = budget;
        h.theta1 = theta1;
        h.theta0 = theta0;
        h.tester = method == Method::hds_gpt
                       ? TesterKind::gpt
                       : (method == Method::hds_fdt_fixed ? TesterKind::fdt_fixed
                                                          : TesterKind::fdt_sequential);
        h.kernel.sigma_s2 = sigma_s2;
        h.kernel.bandwidth = bandwidth;
        h.noise_var = noise_var;
        h.fixed_pairs = fixed_pairs;
        h.fixed_alpha = fixed_alpha;
        return h;
    }

    UcbConfig ucb_config() const {
        UcbConfig u;
        u.horizon = horizon;
        u.delta_o = delta_o;
        u.sigma_s2 = sigma_s2;
        u.bandwidth = bandwidth;
        u.noise_var = noise_var;
        u.candidates_per_step = candidates_per_step;
        return u;
    }

    BenchmarkSpec benchmark_spec(const std::vector<int>& dims) const {
        BenchmarkSpec b;
        b.kind = benchmark;
        b.D = D;
        b.active_dims = dims;
        b.noise_var = noise_var;
        b.sigma_s2 = sigma_s2;
        b.bandwidth = bandwidth;
        b.resolution = resolution;
        b.standardize = standardize;
        return b;
    }
};

inline ExperimentConfig read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");

    static const std::vector<std::string> known = {
        "benchmark", "method", "D", "d", "active_dims", "noise_var", "sigma_s2", "bandwidth",
        "resolution", "standardize", "budget", "theta1", "theta0", "fixed_pairs", "fixed_alpha",
        "cws_pairs_per_dim", "horizon", "delta_o", "candidates_per_step", "trials", "base_seed",
        "output_path", "jobs"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("unknown config key: " + it.key());
    }
    for (const char* req : {"benchmark", "method", "D"}) {
        if (!j.contains(req)) throw ConfigError(std::string("missing required config key: ") + req);
    }
    if (!j.contains("d") && !j.contains("active_dims"))
        throw ConfigError("missing required config key: d (or active_dims)");

    ExperimentConfig cfg;
    try {
        cfg.benchmark = parse_benchmark(j.at("benchmark").get<std::string>());
        cfg.method = parse_method(j.at("method").get<std::string>());
        cfg.D = j.at("D").get<int>();
        if (j.contains("active_dims")) cfg.active_dims = j["active_dims"].get<std::vector<int>>();
        cfg.d = j.contains("d") ? j["d"].get<int>() : static_cast<int>(cfg.active_dims.size());
        if (j.contains("noise_var")) cfg.noise_var = j["noise_var"].get<double>();
        if (j.contains("sigma_s2")) cfg.sigma_s2 = j["sigma_s2"].get<double>();
        if (j.contains("bandwidth")) cfg.bandwidth = j["bandwidth"].get<double>();
        if (j.contains("resolution")) cfg.resolution = j["resolution"].get<int>();
        if (j.contains("standardize")) cfg.standardize = j["standardize"].get<bool>();
        if (j.contains("budget")) cfg.budget = j["budget"].get<long>();
        if (j.contains("theta1")) cfg.theta1 = j["theta1"].get<double>();
        if (j.contains("theta0")) cfg.theta0 = j["theta0"].get<double>();
        if (j.contains("fixed_pairs")) cfg.fixed_pairs = j["fixed_pairs"].get<int>();
        if (j.contains("fixed_alpha")) cfg.fixed_alpha = j["fixed_alpha"].get<double>();
        if (j.contains("cws_pairs_per_dim")) cfg.cws_pairs_per_dim = j["cws_pairs_per_dim"].get<int>();
        if (j.contains("horizon")) cfg.horizon = j["horizon"].get<int>();
        if (j.contains("delta_o")) cfg.delta_o = j["delta_o"].get<double>();
        if (j.contains("candidates_per_step"))
            cfg.candidates_per_step = j["candidates_per_step"].get<int>();
        if (j.contains("trials")) cfg.trials = j["trials"].get<int>();
        if (j.contains("base_seed")) cfg.base_seed = j["base_seed"].get<std::uint64_t>();
        if (j.contains("output_path")) cfg.output_path = j["output_path"].get<std::string>();
        if (j.contains("jobs")) cfg.jobs = j["jobs"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config value error: ") + e.what());
    }
    if (cfg.active_dims.empty() && !j.contains("d"))
        throw ConfigError("missing required config key: d (or active_dims)");
    cfg.validate();
    return cfg;
}

struct RunResult {
    int trial = 0;
    std::uint64_t seed = 0;
    Method method = Method::hds_fdt;
    int D = 0;
    int d = 0;
    double noise_var = 0.0;
    double theta1 = 0.0;
    double theta0 = 0.0;
    std::vector<int> recovered;
    int accuracy = 0;
    long selection_samples = 0;
    long optimization_samples = 0;
    double avg_regret_final = std::numeric_limits<double>::quiet_NaN();
    double min_regret_final = std::numeric_limits<double>::quiet_NaN();
    long wall_ms = 0;
    std::string error;
};

using TesterFactory =
    std::function<std::unique_ptr<Tester>(const ExperimentConfig&, const BenchmarkInstance&,
                                          std::uint64_t seed)>;

inline TesterFactory default_tester_factory() {
    return [](const ExperimentConfig& cfg, const BenchmarkInstance&, std::uint64_t)
               -> std::unique_ptr<Tester> {
        switch (cfg.method) {
            case Method::hds_fdt:
                return std::make_unique<FdtTester>(cfg.sigma_s2, cfg.bandwidth, cfg.noise_var);
            case Method::hds_gpt:
                return std::make_unique<GptTester>(cfg.sigma_s2, cfg.bandwidth, cfg.noise_var);
            case Method::hds_fdt_fixed:
                return std::make_unique<FdtFixedTester>(cfg.bandwidth, cfg.noise_var,
                                                        cfg.fixed_pairs, cfg.fixed_alpha,
                                                        cfg.theta1, cfg.theta0);
            case Method::cws:
                break;
        }
        throw InvalidInput("tester factory: method has no tester");
    };
}

inline RunResult run_trial(const ExperimentConfig& cfg, int trial, const TesterFactory& factory) {
    RunResult r;
    r.trial = trial;
    r.seed = cfg.base_seed + static_cast<std::uint64_t>(trial);
    r.method = cfg.method;
    r.D = cfg.D;
    r.noise_var = cfg.noise_var;
    r.theta1 = cfg.theta1;
    r.theta0 = cfg.theta0;

    const auto t_start = std::chrono::steady_clock::now();
    try {
        std::vector<int> dims = cfg.active_dims;
        if (dims.empty()) dims = draw_active_dims(cfg.D, cfg.d, Rng(r.seed).child("active_dims"));
        r.d = static_cast<int>(dims.size());

        BenchmarkInstance inst = make_oracle(cfg.benchmark_spec(dims), r.seed);
        const Eigen::VectorXd background = draw_background(r.seed, cfg.D);

        if (cfg.method == Method::cws) {
            int n = cfg.cws_pairs_per_dim;
            if (n <= 0) n = static_cast<int>(std::max<long>(2, cfg.budget / (2L * cfg.D)));
            r.recovered = cws_run(inst.oracle, static_cast<int>(dims.size()), n,
                                  3.0 * cfg.bandwidth, background, r.seed);
        } else {
            auto tester = factory(cfg, inst, r.seed);
            HdsResult res = hds_run(inst.oracle, cfg.hds_config(), r.seed, *tester, background);
            r.recovered = res.recovered;
        }
        r.selection_samples = inst.oracle.eval_count();
        r.accuracy = r.recovered == dims ? 1 : 0;

        if (cfg.horizon > 0 && !r.recovered.empty()) {
            const double f_star = slice_true_max(inst, r.recovered, background);
            RegretTrace trace = gpucb_run(inst.oracle, r.recovered, cfg.ucb_config(), background,
                                          r.seed, inst.sign, f_star);
            r.optimization_samples = inst.oracle.eval_count() - r.selection_samples;
            if (!trace.cumulative.empty()) {
                r.avg_regret_final = trace.average_at(trace.cumulative.size());
                r.min_regret_final = trace.min_regret.back();
            }
            if (trace.error && r.error.empty()) r.error = trace.error_message;
        }
    } catch (const std::exception& e) {
        r.error = e.what();
        r.accuracy = 0;
    }
    r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - t_start)
                    .count();
    return r;
}

// Seeded independent trials; rows come back ordered by trial index regardless of
// which worker finished first.
inline std::vector<RunResult> run_experiment(const ExperimentConfig& cfg,
                                             const TesterFactory& factory = default_tester_factory()) {
    cfg.validate();
    std::vector<RunResult> results(cfg.trials);
    int jobs = cfg.jobs > 0 ? cfg.jobs : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, cfg.trials));
    if (jobs == 1) {
        for (int t = 0; t < cfg.trials; ++t) results[t] = run_trial(cfg, t, factory);
        return results;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&]() {
            for (int t = next.fetch_add(1); t < cfg.trials; t = next.fetch_add(1))
                results[t] = run_trial(cfg, t, factory);
        });
    }
    for (auto& w : workers) w.join();
    return results;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string results_to_csv(const std::vector<RunResult>& results) {
    std::ostringstream out;
    out << "trial,seed,method,D,d,noise_var,theta1,theta0,accuracy,selection_samples,"
           "optimization_samples,avg_regret_final,min_regret_final,wall_ms\n";
    for (const RunResult& r : results) {
        out << r.trial << ',' << r.seed << ',' << to_string(r.method) << ',' << r.D << ',' << r.d
            << ',' << format_double(r.noise_var) << ',' << format_double(r.theta1) << ','
            << format_double(r.theta0) << ',' << r.accuracy << ',' << r.selection_samples << ','
            << r.optimization_samples << ',' << format_double(r.avg_regret_final) << ','
            << format_double(r.min_regret_final) << ',' << r.wall_ms << '\n';
    }
    return out.str();
}

inline void write_csv(const std::vector<RunResult>& results, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << results_to_csv(results);
}

inline std::vector<RunResult> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open results file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("results file is empty: " + path);
    std::vector<RunResult> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                f.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        f.push_back(cur);
        if (f.size() != 14) throw ConfigError("results row has wrong column count: " + path);
        RunResult r;
        r.trial = std::stoi(f[0]);
        r.seed = std::stoull(f[1]);
        r.method = parse_method(f[2]);
        r.D = std::stoi(f[3]);
        r.d = std::stoi(f[4]);
        r.noise_var = std::stod(f[5]);
        r.theta1 = std::stod(f[6]);
        r.theta0 = std::stod(f[7]);
        r.accuracy = std::stoi(f[8]);
        r.selection_samples = std::stol(f[9]);
        r.optimization_samples = std::stol(f[10]);
        r.avg_regret_final = std::stod(f[11]);
        r.min_regret_final = std::stod(f[12]);
        r.wall_ms = std::stol(f[13]);
        out.push_back(std::move(r));
    }
    return out;
}

struct SweepRow {
    std::string value;
    int trials = 0;
    double accuracy_mean = 0.0;
    double accuracy_stderr = 0.0;
    double samples_mean = 0.0;
    double samples_stderr = 0.0;
};

// Run one experiment batch per parameter value and aggregate accuracy and
// selection sample counts (mean and standard error of the mean).
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, const std::string& param,
                                   const std::vector<std::string>& values,
                                   const TesterFactory& factory = default_tester_factory()) {
    if (param != "D" && param != "noise_var" && param != "method" && param != "d")
        throw ConfigError("sweep: param must be one of D, noise_var, method, d");
    std::vector<SweepRow> table;
    for (const std::string& v : values) {
        ExperimentConfig cfg = base;
        if (param == "D")
            cfg.D = std::stoi(v);
        else if (param == "noise_var")
            cfg.noise_var = std::stod(v);
        else if (param == "d") {
            cfg.d = std::stoi(v);
            cfg.active_dims.clear();
        } else {
            cfg.method = parse_method(v);
        }
        const auto results = run_experiment(cfg, factory);
        RunningStats acc, samples;
        for (const auto& r : results) {
            acc.add(r.accuracy);
            samples.add(static_cast<double>(r.selection_samples));
        }
        table.push_back({v, static_cast<int>(results.size()), acc.mean(), acc.stderr_mean(),
                         samples.mean(), samples.stderr_mean()});
    }
    return table;
}

struct ThresholdChoice {
    double theta1 = 0.0;
    double theta0 = 0.0;
    double accuracy = 0.0;
    double mean_samples = 0.0;
};

// Grid search over Theta_1 in {5, 10, 20} x Theta_0 in {-5, -10, -20} on the
// tuning setting D = 200, noise_var = 0.1, picking maximum mean accuracy with
// minimum mean selection samples as the tie-break. The chosen pair is then
// reused unchanged across sweep settings.
inline ThresholdChoice grid_search_thresholds(const ExperimentConfig& base,
                                              const TesterFactory& factory = default_tester_factory()) {
    ExperimentConfig cfg = base;
    cfg.D = 200;
    cfg.noise_var = 0.1;
    cfg.horizon = 0;
    ThresholdChoice best;
    bool first = true;
    for (double t1 : {5.0, 10.0, 20.0}) {
        for (double t0 : {-5.0, -10.0, -20.0}) {
            cfg.theta1 = t1;
            cfg.theta0 = t0;
            const auto results = run_experiment(cfg, factory);
            RunningStats acc, samples;
            for (const auto& r : results) {
                acc.add(r.accuracy);
                samples.add(static_cast<double>(r.selection_samples));
            }
            const ThresholdChoice cand{t1, t0, acc.mean(), samples.mean()};
            if (first || cand.accuracy > best.accuracy ||
                (cand.accuracy == best.accuracy && cand.mean_samples < best.mean_samples)) {
                best = cand;
                first = false;
            }
        }
    }
    return best;
}

// Convenience entry point building the tester named in the config.
inline HdsResult hds_select(Oracle& oracle, const HdsConfig& cfg, std::uint64_t seed) {
    const Eigen::VectorXd background = draw_background(seed, oracle.dim());
    std::unique_ptr<Tester> tester;
    switch (cfg.tester) {
        case TesterKind::fdt_sequential:
            tester = std::make_unique<FdtTester>(cfg.kernel.sigma_s2, cfg.kernel.bandwidth,
                                                 cfg.noise_var);
            break;
        case TesterKind::gpt:
            tester = std::make_unique<GptTester>(cfg.kernel.sigma_s2, cfg.kernel.bandwidth,
                                                 cfg.noise_var);
            break;
        case TesterKind::fdt_fixed:
            tester = std::make_unique<FdtFixedTester>(cfg.kernel.bandwidth, cfg.noise_var,
                                                      cfg.fixed_pairs, cfg.fixed_alpha, cfg.theta1,
                                                      cfg.theta0);
            break;
        case TesterKind::stub:
            throw InvalidInput("hds_select: stub tester must be supplied explicitly");
    }
    return hds_run(oracle, cfg, seed, *tester, background);
}

}  // namespace hdsopt
