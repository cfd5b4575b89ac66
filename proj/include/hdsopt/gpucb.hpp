#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "hdsopt/errors.hpp"
#include "hdsopt/gp.hpp"
#include "hdsopt/hds.hpp"
#include "hdsopt/rng.hpp"

namespace hdsopt {

struct UcbConfig {
    int horizon = 300;
    double delta_o = 0.05;
    double sigma_s2 = 1.0;
    double bandwidth = 0.1;
    double noise_var = 0.1;
    int candidates_per_step = 0;  // 0: 1000 * d uniform candidates when d > 2

    void validate() const {
        if (horizon < 1) throw InvalidInput("UcbConfig: horizon must be >= 1");
        if (!(delta_o > 0.0 && delta_o < 1.0)) throw InvalidInput("UcbConfig: delta_o must be in (0,1)");
        if (!(sigma_s2 > 0.0 && bandwidth > 0.0 && noise_var > 0.0))
            throw InvalidInput("UcbConfig: kernel and noise parameters must be positive");
    }
};

// Exploration schedule
// beta_t = 2 log(t^2 2 pi^2 / (3 delta_o)) + 2 d log(2 t^2 d sigma_s / b * sqrt(log(4 d / delta_o))).
inline double beta_t(int t, int d, const UcbConfig& cfg) {
    if (t < 1) throw InvalidInput("beta_t: t must be >= 1");
    if (d < 1) throw InvalidInput("beta_t: d must be >= 1");
    const double t2 = static_cast<double>(t) * t;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double sigma_s = std::sqrt(cfg.sigma_s2);
    return 2.0 * std::log(t2 * 2.0 * pi2 / (3.0 * cfg.delta_o)) +
           2.0 * d * std::log(2.0 * t2 * d * sigma_s / cfg.bandwidth *
                              std::sqrt(std::log(4.0 * d / cfg.delta_o)));
}

struct RegretTrace {
    std::vector<double> instantaneous;
    std::vector<double> cumulative;
    std::vector<double> min_regret;
    bool error = false;
    std::string error_message;

    void push(double r) {
        instantaneous.push_back(r);
        cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + r);
        min_regret.push_back(min_regret.empty() ? r : std::min(min_regret.back(), r));
    }
    double average_at(std::size_t t) const { return cumulative[t - 1] / static_cast<double>(t); }
};

// Candidate set on the free coordinates: full grid (201 per axis) for d <= 2,
// otherwise seeded uniform points, generated in lexicographic order so argmax
// ties resolve to the smallest candidate.
inline std::vector<Eigen::VectorXd> ucb_candidates(int d, int candidates_per_step, Rng rng) {
    std::vector<Eigen::VectorXd> out;
    if (d <= 2) {
        const int per_axis = 201;
        if (d == 1) {
            out.reserve(per_axis);
            for (int i = 0; i < per_axis; ++i) {
                Eigen::VectorXd p(1);
                p[0] = -1.0 + 2.0 * i / (per_axis - 1);
                out.push_back(p);
            }
        } else {
            out.reserve(static_cast<std::size_t>(per_axis) * per_axis);
            for (int i = 0; i < per_axis; ++i)
                for (int j = 0; j < per_axis; ++j) {
                    Eigen::VectorXd p(2);
                    p[0] = -1.0 + 2.0 * i / (per_axis - 1);
                    p[1] = -1.0 + 2.0 * j / (per_axis - 1);
                    out.push_back(p);
                }
        }
        return out;
    }
    const int n = candidates_per_step > 0 ? candidates_per_step : 1000 * d;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd p(d);
        for (int k = 0; k < d; ++k) p[k] = rng.uniform(-1.0, 1.0);
        out.push_back(p);
    }
    std::sort(out.begin(), out.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                            b.data() + b.size());
    });
    return out;
}

// Arg-max of mu(x) + sqrt(beta) * sigma(x) over the posterior's registered
// candidates. sigma is the noise-free posterior standard deviation: the
// confidence bound is on f, not on the noisy response.
inline int ucb_acquire(const IncrementalPosterior& posterior, double beta,
                       std::vector<PosteriorMoments>& scratch) {
    if (beta < 0.0) throw InvalidInput("ucb_acquire: beta must be >= 0");
    if (posterior.candidate_count() == 0) throw InvalidInput("ucb_acquire: no candidates registered");
    posterior.candidate_moments(scratch);
    const double sb = std::sqrt(beta);
    int pick = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < posterior.candidate_count(); ++j) {
        const double noise_free = std::max(0.0, scratch[j].variance - posterior.noise_var());
        const double v = scratch[j].mean + sb * std::sqrt(noise_free);
        if (v > best) {
            best = v;
            pick = j;
        }
    }
    return pick;
}

// GP-UCB over the selected coordinates, every other coordinate pinned at the
// background vector. `sign` maps the oracle into maximization orientation
// (-1 for cost benchmarks). `f_star` is the true maximum of sign * f over the
// searched slice; regret is recorded against it with noise-free values.
inline RegretTrace gpucb_run(Oracle& oracle, const std::vector<int>& dims, const UcbConfig& cfg,
                             const Eigen::VectorXd& background, std::uint64_t seed, double sign,
                             double f_star) {
    cfg.validate();
    if (dims.empty()) throw InvalidInput("gpucb_run: dims must be nonempty");
    for (int d : dims)
        if (d < 0 || d >= oracle.dim()) throw InvalidInput("gpucb_run: dimension index out of range");

    const int d = static_cast<int>(dims.size());
    RegretTrace trace;
    IncrementalPosterior posterior(KernelSpec::projected(cfg.sigma_s2, cfg.bandwidth, d),
                                   cfg.noise_var);
    posterior.register_candidates(
        ucb_candidates(d, cfg.candidates_per_step, Rng(seed).child("ucb_candidates")));

    std::vector<PosteriorMoments> scratch;
    Eigen::VectorXd x = background;
    for (int t = 1; t <= cfg.horizon; ++t) {
        try {
            const int pick = ucb_acquire(posterior, beta_t(t, d, cfg), scratch);
            const Eigen::VectorXd& sub = posterior.candidate(pick);
            for (int k = 0; k < d; ++k) x[dims[k]] = sub[k];
            const double y = sign * oracle.eval_noisy(x);
            posterior.extend(sub, y);
            trace.push(f_star - sign * oracle.eval_true(x));
        } catch (const NumericalError& e) {
            trace.error = true;
            trace.error_message = e.what();
            break;
        }
    }
    return trace;
}

}  // namespace hdsopt
