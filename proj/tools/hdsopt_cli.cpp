// Command-line harness: selection and optimization experiments over the
// benchmark suite, parameter sweeps, and threshold tuning, all seeded and
// persisted as CSV.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdsopt/hdsopt.hpp"

namespace {

using namespace hdsopt;

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

void print_summary(const std::vector<RunResult>& results) {
    RunningStats acc, sel, opt;
    int errors = 0;
    for (const auto& r : results) {
        acc.add(r.accuracy);
        sel.add(static_cast<double>(r.selection_samples));
        opt.add(static_cast<double>(r.optimization_samples));
        if (!r.error.empty()) ++errors;
    }
    std::cout << "trials: " << results.size() << "  accuracy: " << acc.mean()
              << "  selection samples: " << sel.mean() << " +- " << sel.stderr_mean();
    if (opt.mean() > 0) std::cout << "  optimization samples: " << opt.mean();
    if (errors > 0) std::cout << "  errors: " << errors;
    std::cout << "\n";
}

void maybe_write(const std::vector<RunResult>& results, const std::string& path) {
    if (path.empty()) return;
    write_csv(results, path);
    std::cout << "wrote " << path << "\n";
}

void print_sweep(const std::vector<SweepRow>& table, const std::string& param) {
    std::cout << param << ",trials,accuracy_mean,accuracy_stderr,samples_mean,samples_stderr\n";
    for (const auto& row : table) {
        std::cout << row.value << ',' << row.trials << ',' << format_double(row.accuracy_mean)
                  << ',' << format_double(row.accuracy_stderr) << ','
                  << format_double(row.samples_mean) << ',' << format_double(row.samples_stderr)
                  << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variable selection and GP optimization for sparse high-dimensional functions"};
    app.require_subcommand(1);

    std::string config_path, out_path, suite = "gp", method = "hds_fdt", param = "D", values_csv;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int trials = 20, dim_d = 2, dim_D = 200;
    long budget = 2000;
    int jobs = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out_path, "results CSV path (overrides config output_path)");
        sub->add_option("--jobs", jobs, "parallel trials (0 = hardware concurrency)");
    };

    auto* sel = app.add_subcommand("select", "run the variable-selection phase only");
    sel->add_option("--config", config_path, "experiment config (JSON)")->required();
    sel->add_option("--seed", seed, "override base_seed")->each([&](const std::string&) { seed_set = true; });
    add_common(sel);

    auto* opt = app.add_subcommand("optimize", "run selection followed by GP-UCB");
    opt->add_option("--config", config_path, "experiment config (JSON)")->required();
    opt->add_option("--seed", seed, "override base_seed")->each([&](const std::string&) { seed_set = true; });
    add_common(opt);

    auto* bench = app.add_subcommand("bench", "run a benchmark suite with defaults");
    bench->add_option("--suite", suite, "gp|quad|quadmix|branin|beale")->required();
    bench->add_option("--method", method, "hds_fdt|hds_gpt|hds_fdt_fixed|cws")->required();
    bench->add_option("--trials", trials, "number of trials");
    bench->add_option("--D", dim_D, "ambient dimension");
    bench->add_option("--d", dim_d, "number of active dimensions");
    bench->add_option("--budget", budget, "selection sample budget");
    bench->add_option("--seed", seed, "base seed")->each([&](const std::string&) { seed_set = true; });
    add_common(bench);

    auto* swp = app.add_subcommand("sweep", "sweep one parameter over a value list");
    swp->add_option("--param", param, "D|noise_var")->required();
    swp->add_option("--values", values_csv, "comma-separated values")->required();
    swp->add_option("--config", config_path, "base config (JSON); defaults used when absent");
    swp->add_option("--method", method, "override method");
    swp->add_option("--trials", trials, "override trials");
    add_common(swp);

    auto* tune = app.add_subcommand("tune-thresholds", "grid search over the threshold pairs");
    tune->add_option("--config", config_path, "experiment config (JSON)")->required();
    add_common(tune);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sel->parsed() || opt->parsed()) {
            ExperimentConfig cfg = read_config(config_path);
            if (seed_set) cfg.base_seed = seed;
            if (jobs > 0) cfg.jobs = jobs;
            if (sel->parsed()) cfg.horizon = 0;
            if (opt->parsed() && cfg.horizon == 0) cfg.horizon = 300;
            const auto results = run_experiment(cfg);
            print_summary(results);
            maybe_write(results, out_path.empty() ? cfg.output_path : out_path);
        } else if (bench->parsed()) {
            ExperimentConfig cfg;
            cfg.benchmark = parse_benchmark(suite);
            cfg.method = parse_method(method);
            cfg.trials = trials;
            cfg.D = dim_D;
            cfg.d = dim_d;
            cfg.budget = budget;
            cfg.jobs = jobs;
            if (seed_set) cfg.base_seed = seed;
            if (cfg.benchmark == BenchmarkKind::branin || cfg.benchmark == BenchmarkKind::beale)
                cfg.d = 2;
            cfg.validate();
            const auto results = run_experiment(cfg);
            print_summary(results);
            maybe_write(results, out_path);
        } else if (swp->parsed()) {
            if (param != "D" && param != "noise_var") {
                std::cerr << "sweep: param must be D or noise_var\n";
                return 2;
            }
            ExperimentConfig cfg;
            if (!config_path.empty()) cfg = read_config(config_path);
            if (swp->count("--method")) cfg.method = parse_method(method);
            if (swp->count("--trials")) cfg.trials = trials;
            if (jobs > 0) cfg.jobs = jobs;
            cfg.horizon = 0;
            const auto table = sweep(cfg, param, split_csv(values_csv));
            print_sweep(table, param);
        } else if (tune->parsed()) {
            ExperimentConfig cfg = read_config(config_path);
            if (jobs > 0) cfg.jobs = jobs;
            const auto choice = grid_search_thresholds(cfg);
            std::cout << "theta1: " << choice.theta1 << "  theta0: " << choice.theta0
                      << "  accuracy: " << choice.accuracy
                      << "  mean samples: " << choice.mean_samples << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidInput& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
