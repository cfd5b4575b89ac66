#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include "hdsopt/errors.hpp"
#include "hdsopt/gp.hpp"
#include "hdsopt/hds.hpp"
#include "hdsopt/rng.hpp"

namespace hdsopt {

enum class BenchmarkKind { gp, quad, quadmix, branin, beale };

struct BenchmarkSpec {
    BenchmarkKind kind = BenchmarkKind::gp;
    int D = 200;
    std::vector<int> active_dims;
    double noise_var = 0.1;
    double sigma_s2 = 1.0;
    double bandwidth = 0.1;            // gp kernel bandwidth; also the 1/b scale of quad
    int resolution = 0;                // gp lattice resolution per axis, 0 = default
    bool standardize = false;          // affine-standardize cost values from held-out probes
    Eigen::VectorXd optimum_location;  // quad/quadmix center, drawn from the seed when empty

    int d() const { return static_cast<int>(active_dims.size()); }

    int lattice_resolution() const {
        if (resolution > 0) return resolution;
        switch (d()) {
            case 1: return 201;
            case 2: return 101;
            case 3: return 27;
            case 4: return 11;
            default: return 7;
        }
    }

    void validate() const {
        if (D < 1) throw InvalidInput("BenchmarkSpec: D must be >= 1");
        if (active_dims.empty()) throw InvalidInput("BenchmarkSpec: active_dims must be nonempty");
        for (std::size_t i = 0; i < active_dims.size(); ++i) {
            if (active_dims[i] < 0 || active_dims[i] >= D)
                throw InvalidInput("BenchmarkSpec: active dimension out of range");
            for (std::size_t j = i + 1; j < active_dims.size(); ++j)
                if (active_dims[i] == active_dims[j])
                    throw InvalidInput("BenchmarkSpec: duplicate active dimension");
        }
        if (!(noise_var >= 0.0)) throw InvalidInput("BenchmarkSpec: noise_var must be >= 0");
        if (!(sigma_s2 > 0.0 && bandwidth > 0.0))
            throw InvalidInput("BenchmarkSpec: sigma_s2 and bandwidth must be positive");
        if ((kind == BenchmarkKind::branin || kind == BenchmarkKind::beale) && d() != 2)
            throw InvalidInput("BenchmarkSpec: branin and beale require exactly 2 active dimensions");
    }
};

inline std::vector<int> draw_active_dims(int D, int d, Rng rng) {
    if (d < 1 || d > D) throw InvalidInput("draw_active_dims: need 1 <= d <= D");
    std::vector<int> all(D);
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < d; ++i) {
        const int j = i + static_cast<int>(rng.uniform_int(D - i));
        std::swap(all[i], all[j]);
    }
    std::vector<int> out(all.begin(), all.begin() + d);
    std::sort(out.begin(), out.end());
    return out;
}

// Quadratic cost (P(x - x*))^T (P(x - x*)), P diagonal with 1/b on active
// dimensions and 1/100 elsewhere.
inline double quad_eval(const Eigen::VectorXd& x, const BenchmarkSpec& spec) {
    double s = 0.0;
    std::size_t a = 0;
    for (int i = 0; i < spec.D; ++i) {
        const bool active = a < spec.active_dims.size() && spec.active_dims[a] == i;
        if (active) ++a;
        const double p = active ? 1.0 / spec.bandwidth : 0.01;
        const double v = p * (x[i] - spec.optimum_location[i]);
        s += v * v;
    }
    return s;
}

// Quadratic with linear mixing: ||M P (x - x*)||^2 where
// M = (1 - r) I + r J, r = 1/D, J the all-ones matrix.
inline double quadmix_eval(const Eigen::VectorXd& x, const BenchmarkSpec& spec) {
    const double r = 1.0 / spec.D;
    double sum_pv = 0.0;
    Eigen::VectorXd pv(spec.D);
    std::size_t a = 0;
    for (int i = 0; i < spec.D; ++i) {
        const bool active = a < spec.active_dims.size() && spec.active_dims[a] == i;
        if (active) ++a;
        const double p = active ? 1.0 / spec.bandwidth : 0.01;
        pv[i] = p * (x[i] - spec.optimum_location[i]);
        sum_pv += pv[i];
    }
    double s = 0.0;
    for (int i = 0; i < spec.D; ++i) {
        const double v = (1.0 - r) * pv[i] + r * sum_pv;
        s += v * v;
    }
    return s;
}

// Standard Branin on [-5, 10] x [0, 15], queried through the affine map of
// [-1, 1]^2 onto that box. Global minimum 0.397887 at three points.
inline double branin_eval(double u1, double u2) {
    const double x1 = 2.5 + 7.5 * u1;
    const double x2 = 7.5 + 7.5 * u2;
    const double a = 1.0;
    const double b = 5.1 / (4.0 * std::numbers::pi * std::numbers::pi);
    const double c = 5.0 / std::numbers::pi;
    const double r = 6.0;
    const double s = 10.0;
    const double t = 1.0 / (8.0 * std::numbers::pi);
    const double inner = x2 - b * x1 * x1 + c * x1 - r;
    return a * inner * inner + s * (1.0 - t) * std::cos(x1) + s;
}

// Standard Beale on [-4.5, 4.5]^2 through the map x = 4.5 u.
inline double beale_eval(double u1, double u2) {
    const double x = 4.5 * u1;
    const double y = 4.5 * u2;
    const double t1 = 1.5 - x + x * y;
    const double t2 = 2.25 - x + x * y * y;
    const double t3 = 2.625 - x + x * y * y * y;
    return t1 * t1 + t2 * t2 + t3 * t3;
}

// A benchmark oracle plus everything needed for regret accounting: the resolved
// spec, the ground-truth maximum of the maximization-oriented objective, and the
// orientation sign (costs are negated by the harness for maximization).
//
// With spec.standardize set, cost values are served as (f - shift) / scale with
// shift and scale the mean and standard deviation over a seeded set of held-out
// probe points. The probes do not touch the sample counter; they model fitting
// the response scale to the model's unit prior before testing starts.
struct BenchmarkInstance {
    BenchmarkSpec spec;
    std::shared_ptr<LatticeFunction> lattice;  // gp only
    Eigen::VectorXd max_location;
    double max_value = 0.0;     // of sign * (f - shift) / scale
    double sign = 1.0;          // +1 for gp, -1 for cost functions
    double value_shift = 0.0;   // affine standardization of the served values
    double value_scale = 1.0;
    Oracle oracle;

    // Maximization-oriented value of a raw cost.
    double cost_to_value(double raw_cost) const {
        return (value_shift - raw_cost) / value_scale;
    }
};

inline BenchmarkInstance make_oracle(BenchmarkSpec spec, std::uint64_t seed) {
    spec.validate();
    const Rng root(seed);

    if (spec.kind == BenchmarkKind::quad || spec.kind == BenchmarkKind::quadmix) {
        if (spec.optimum_location.size() == 0) {
            Rng r = root.child("x_star");
            spec.optimum_location.resize(spec.D);
            for (int i = 0; i < spec.D; ++i) spec.optimum_location[i] = r.uniform(-1.0, 1.0);
        } else if (spec.optimum_location.size() != spec.D) {
            throw InvalidInput("make_oracle: optimum_location dimension mismatch");
        }
    }

    std::shared_ptr<LatticeFunction> lattice;
    std::function<double(const Eigen::VectorXd&)> f;
    Eigen::VectorXd max_loc = Eigen::VectorXd::Zero(spec.D);
    double max_val = 0.0;
    double sign = -1.0;

    switch (spec.kind) {
        case BenchmarkKind::gp: {
            KernelSpec k;
            k.sigma_s2 = spec.sigma_s2;
            k.bandwidth = spec.bandwidth;
            lattice = std::make_shared<LatticeFunction>(
                sample_gp_lattice(k, spec.d(), spec.lattice_resolution(),
                                  root.child("function").seed()));
            const std::vector<int> act = spec.active_dims;
            const auto lat = lattice;
            f = [lat, act](const Eigen::VectorXd& x) {
                Eigen::VectorXd sub(static_cast<int>(act.size()));
                for (std::size_t k2 = 0; k2 < act.size(); ++k2) sub[k2] = x[act[k2]];
                return lat->eval(sub);
            };
            auto [loc, val] = lattice->max_point();
            for (std::size_t k2 = 0; k2 < act.size(); ++k2) max_loc[act[k2]] = loc[k2];
            max_val = val;
            sign = 1.0;
            break;
        }
        case BenchmarkKind::quad: {
            const BenchmarkSpec s = spec;
            f = [s](const Eigen::VectorXd& x) { return quad_eval(x, s); };
            max_loc = spec.optimum_location;
            max_val = 0.0;
            break;
        }
        case BenchmarkKind::quadmix: {
            const BenchmarkSpec s = spec;
            f = [s](const Eigen::VectorXd& x) { return quadmix_eval(x, s); };
            max_loc = spec.optimum_location;
            max_val = 0.0;
            break;
        }
        case BenchmarkKind::branin: {
            const int a0 = spec.active_dims[0], a1 = spec.active_dims[1];
            f = [a0, a1](const Eigen::VectorXd& x) { return branin_eval(x[a0], x[a1]); };
            max_loc[a0] = (-std::numbers::pi - 2.5) / 7.5;
            max_loc[a1] = (12.275 - 7.5) / 7.5;
            max_val = -branin_eval(max_loc[a0], max_loc[a1]);
            break;
        }
        case BenchmarkKind::beale: {
            const int a0 = spec.active_dims[0], a1 = spec.active_dims[1];
            f = [a0, a1](const Eigen::VectorXd& x) { return beale_eval(x[a0], x[a1]); };
            max_loc[a0] = 3.0 / 4.5;
            max_loc[a1] = 0.5 / 4.5;
            max_val = -beale_eval(max_loc[a0], max_loc[a1]);
            break;
        }
    }

    double shift = 0.0;
    double scale = 1.0;
    if (spec.standardize && spec.kind != BenchmarkKind::gp) {
        Rng probe_rng = root.child("standardize");
        const int num_probes = 512;
        double sum = 0.0, sum_sq = 0.0;
        Eigen::VectorXd p(spec.D);
        for (int i = 0; i < num_probes; ++i) {
            for (int k = 0; k < spec.D; ++k) p[k] = probe_rng.uniform(-1.0, 1.0);
            const double v = f(p);
            sum += v;
            sum_sq += v * v;
        }
        shift = sum / num_probes;
        const double var = std::max(sum_sq / num_probes - shift * shift, 0.0);
        if (var > 0.0) scale = std::sqrt(var * num_probes / (num_probes - 1));
        const auto raw = std::move(f);
        f = [raw, shift, scale](const Eigen::VectorXd& x) { return (raw(x) - shift) / scale; };
        // max_val held -raw_min_cost; carry the raw minimum through the affine map
        max_val = (shift + max_val) / scale;
    }

    const int D = spec.D;
    const double noise_var = spec.noise_var;
    return BenchmarkInstance{std::move(spec),    std::move(lattice), std::move(max_loc), max_val,
                             sign,               shift,              scale,
                             Oracle(D, std::move(f), noise_var, root.child("noise"))};
}

// Ground-truth maximum of the maximization-oriented objective.
inline std::pair<Eigen::VectorXd, double> true_max(const BenchmarkInstance& inst) {
    return {inst.max_location, inst.max_value};
}

namespace detail {

// Exact slice maximum of a gp lattice benchmark when some active coordinates
// are pinned: scan the lattice grid over the free active coordinates. A
// multilinear interpolant attains its slice maximum on that grid.
inline double gp_slice_max(const BenchmarkInstance& inst, const std::vector<int>& free_active,
                           const Eigen::VectorXd& background) {
    const auto& act = inst.spec.active_dims;
    const int da = static_cast<int>(act.size());
    Eigen::VectorXd sub(da);
    std::vector<int> free_pos;
    for (int k = 0; k < da; ++k) {
        if (std::find(free_active.begin(), free_active.end(), act[k]) != free_active.end())
            free_pos.push_back(k);
        else
            sub[k] = background[act[k]];
    }
    const int r = inst.lattice->resolution;
    const int nf = static_cast<int>(free_pos.size());
    long combos = 1;
    for (int k = 0; k < nf; ++k) combos *= r;
    double best = -std::numeric_limits<double>::infinity();
    for (long c = 0; c < combos; ++c) {
        long rem = c;
        for (int k = 0; k < nf; ++k) {
            sub[free_pos[k]] = inst.lattice->axis_coord(static_cast<int>(rem % r));
            rem /= r;
        }
        best = std::max(best, inst.lattice->eval(sub));
    }
    return best;
}

inline double quadmix_slice_max(const BenchmarkInstance& inst, const std::vector<int>& dims,
                                const Eigen::VectorXd& background) {
    const auto& spec = inst.spec;
    const int D = spec.D;
    const double r = 1.0 / D;
    Eigen::MatrixXd MP(D, D);
    std::size_t a = 0;
    Eigen::VectorXd p(D);
    for (int i = 0; i < D; ++i) {
        const bool active = a < spec.active_dims.size() && spec.active_dims[a] == i;
        if (active) ++a;
        p[i] = active ? 1.0 / spec.bandwidth : 0.01;
    }
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) MP(i, j) = ((i == j ? 1.0 - r : 0.0) + r) * p[j];

    Eigen::VectorXd x = background;
    Eigen::MatrixXd A(D, static_cast<int>(dims.size()));
    for (std::size_t k = 0; k < dims.size(); ++k) A.col(static_cast<int>(k)) = MP.col(dims[k]);
    Eigen::VectorXd v_fixed = Eigen::VectorXd::Zero(D);
    for (int i = 0; i < D; ++i)
        if (std::find(dims.begin(), dims.end(), i) == dims.end())
            v_fixed[i] = background[i] - spec.optimum_location[i];
    Eigen::VectorXd c = MP * v_fixed;
    Eigen::VectorXd vf = A.colPivHouseholderQr().solve(-c);
    for (std::size_t k = 0; k < dims.size(); ++k) {
        const int i = dims[k];
        const double lo = -1.0 - spec.optimum_location[i];
        const double hi = 1.0 - spec.optimum_location[i];
        vf[static_cast<int>(k)] = std::clamp(vf[static_cast<int>(k)], lo, hi);
        x[i] = spec.optimum_location[i] + vf[static_cast<int>(k)];
    }
    return -inst.oracle.eval_true(x);
}

inline double scan_1d_min(const std::function<double(double)>& g, int n = 4001) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) best = std::min(best, g(-1.0 + 2.0 * i / (n - 1)));
    return best;
}

}  // namespace detail

// True maximum of the maximization-oriented objective over the slice
// { x : x_i free for i in dims, x_j = background_j otherwise }.
inline double slice_true_max(const BenchmarkInstance& inst, const std::vector<int>& dims,
                             const Eigen::VectorXd& background) {
    const auto& act = inst.spec.active_dims;
    std::vector<int> free_active;
    for (int d : act)
        if (std::find(dims.begin(), dims.end(), d) != dims.end()) free_active.push_back(d);
    const bool all_active_free = free_active.size() == act.size();

    switch (inst.spec.kind) {
        case BenchmarkKind::gp:
            if (all_active_free) return inst.max_value;
            return detail::gp_slice_max(inst, free_active, background);
        case BenchmarkKind::quad: {
            double cost = 0.0;
            std::size_t a = 0;
            for (int i = 0; i < inst.spec.D; ++i) {
                const bool active = a < act.size() && act[a] == i;
                if (active) ++a;
                if (std::find(dims.begin(), dims.end(), i) != dims.end()) continue;
                const double p = active ? 1.0 / inst.spec.bandwidth : 0.01;
                const double v = p * (background[i] - inst.spec.optimum_location[i]);
                cost += v * v;
            }
            return inst.cost_to_value(cost);
        }
        case BenchmarkKind::quadmix:
            return detail::quadmix_slice_max(inst, dims, background);
        case BenchmarkKind::branin:
        case BenchmarkKind::beale: {
            const bool is_branin = inst.spec.kind == BenchmarkKind::branin;
            const int a0 = act[0], a1 = act[1];
            const bool f0 = std::find(dims.begin(), dims.end(), a0) != dims.end();
            const bool f1 = std::find(dims.begin(), dims.end(), a1) != dims.end();
            auto cost = [&](double u1, double u2) {
                return is_branin ? branin_eval(u1, u2) : beale_eval(u1, u2);
            };
            if (f0 && f1) return inst.max_value;
            if (f0)
                return inst.cost_to_value(
                    detail::scan_1d_min([&](double u) { return cost(u, background[a1]); }));
            if (f1)
                return inst.cost_to_value(
                    detail::scan_1d_min([&](double u) { return cost(background[a0], u); }));
            return inst.cost_to_value(cost(background[a0], background[a1]));
        }
    }
    throw InvalidInput("slice_true_max: unknown benchmark kind");
}

// Coordinate-wise sampling baseline: estimate the mean squared finite difference
// along each axis separately and keep the d_out largest (ties to the smaller
// index). Consumes exactly 2 * D * n_per_dim evaluations.
inline std::vector<int> cws_run(Oracle& oracle, int d_out, int n_per_dim, double delta,
                                const Eigen::VectorXd& background, std::uint64_t seed) {
    if (n_per_dim < 2) throw InvalidInput("cws_run: n_per_dim must be >= 2");
    if (d_out < 1 || d_out > oracle.dim()) throw InvalidInput("cws_run: d_out out of range");
    if (!(delta > 0.0 && delta < 2.0)) throw InvalidInput("cws_run: delta must be in (0, 2)");
    Rng rng = Rng(seed).child("cws");
    const int D = oracle.dim();
    std::vector<std::pair<double, int>> scores(D);
    for (int i = 0; i < D; ++i) {
        double s = 0.0;
        for (int n = 0; n < n_per_dim; ++n) {
            const double z = rng.uniform(-1.0, 1.0 - delta);
            Eigen::VectorXd x = background;
            x[i] = z;
            const double y1 = oracle.eval_noisy(x);
            x[i] = z + delta;
            const double y2 = oracle.eval_noisy(x);
            s += (y1 - y2) * (y1 - y2);
        }
        scores[i] = {s / n_per_dim, i};
    }
    std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> out(d_out);
    for (int k = 0; k < d_out; ++k) out[k] = scores[k].second;
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace hdsopt
