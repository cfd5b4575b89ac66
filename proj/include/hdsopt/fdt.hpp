#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "hdsopt/errors.hpp"
#include "hdsopt/hds.hpp"
#include "hdsopt/stats.hpp"

namespace hdsopt {

// Variances of a paired finite difference under the two hypotheses, with the
// probe offset fixed at delta = 3 * bandwidth. The H1 variance is the design
// lower bound 2 (0.95 sigma_s^2 + sigma^2); the test is conservative with it.
struct FdtHypothesisVariances {
    double sigma0_sq = 0.0;
    double sigma1_sq = 0.0;

    static FdtHypothesisVariances from_model(double sigma_s2, double noise_var) {
        FdtHypothesisVariances v;
        v.sigma0_sq = 2.0 * noise_var;
        v.sigma1_sq = 2.0 * (0.95 * sigma_s2 + noise_var);
        v.validate();
        return v;
    }

    void validate() const {
        if (!(sigma0_sq > 0.0 && sigma0_sq < sigma1_sq))
            throw InvalidInput("FdtHypothesisVariances: need 0 < sigma0_sq < sigma1_sq");
    }
};

// Marginal variance of f_I(z) - f_I(z + delta) when the node holds a active
// variables: 2 [ (1 - exp(-a delta^2 / b^2)) sigma_s^2 + sigma^2 ].
inline double fd_variance(int a, double delta, const KernelSpec& spec, double noise_var) {
    if (a < 0) throw InvalidInput("fd_variance: a must be >= 0");
    if (delta < 0.0) throw InvalidInput("fd_variance: delta must be >= 0");
    const double b2 = spec.bandwidth * spec.bandwidth;
    return 2.0 * ((1.0 - std::exp(-a * delta * delta / b2)) * spec.sigma_s2 + noise_var);
}

// Per-pair log-likelihood-ratio increment between the two zero-mean Gaussian
// hypotheses; strictly increasing in dy^2.
inline double fdt_llr_increment(double dy, const FdtHypothesisVariances& v) {
    v.validate();
    return (1.0 / (2.0 * v.sigma0_sq) - 1.0 / (2.0 * v.sigma1_sq)) * dy * dy +
           0.5 * std::log(v.sigma0_sq / v.sigma1_sq);
}

// Test statistic X_n = (1 / (2 sigma^2)) sum (y(x_i) - y(x'_i))^2.
inline double fdt_statistic(const std::vector<double>& diffs, double noise_var) {
    if (diffs.empty()) throw InvalidInput("fdt_statistic: need at least one pair");
    if (!(noise_var > 0.0)) throw InvalidInput("fdt_statistic: noise_var must be positive");
    double s = 0.0;
    for (double d : diffs) s += d * d;
    return s / (2.0 * noise_var);
}

// Rejection threshold tau_n: the (1 - alpha) quantile of the central chi-squared
// with n degrees of freedom.
inline double fdt_threshold(int n, double alpha) {
    if (n < 1) throw InvalidInput("fdt_threshold: n must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("fdt_threshold: alpha must be in (0,1)");
    return chi2_quantile(1.0 - alpha, static_cast<double>(n));
}

// Pair count guaranteeing both error rates below alpha:
// n >= max{2, 16 (1 + sqrt(1 + c))^2 / c^2, 2 M^2 / c^2} log(2 / alpha).
inline long fdt_sample_size(double c, double M, double alpha) {
    if (!(c > 0.0)) throw InvalidInput("fdt_sample_size: c must be positive");
    if (!(M > 0.0)) throw InvalidInput("fdt_sample_size: M must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("fdt_sample_size: alpha must be in (0,1)");
    const double s = 1.0 + std::sqrt(1.0 + c);
    const double base = std::max({2.0, 16.0 * s * s / (c * c), 2.0 * M * M / (c * c)});
    return static_cast<long>(std::ceil(base * std::log(2.0 / alpha)));
}

// Expected-sample-complexity bound 2 (1 - alpha) / (1 - 2 alpha) * d ceil(log2 D) * T_max.
inline double hds_bound_eq4(double alpha, int d, int D, double t_max) {
    if (!(alpha >= 0.0 && alpha < 0.5)) throw InvalidInput("hds_bound_eq4: alpha must be in [0, 1/2)");
    if (d < 1 || D < 1) throw InvalidInput("hds_bound_eq4: d and D must be >= 1");
    return 2.0 * (1.0 - alpha) / (1.0 - 2.0 * alpha) * d * ceil_log2(D) * t_max;
}

// Whether the closing bracket of the fixed-size calculator uses base-2 logs (the
// convention of the sample-complexity statement) or natural logs everywhere.
enum class SizeLogBase { base2, natural };

struct Theorem33Size {
    double alpha = 0.0;
    double a_eps = 0.0;
    double n_eps = 0.0;
};

// Fixed per-node sample size and total sample complexity for the non-sequential
// pipeline at target failure probability eps. The inner tail-bound logs are
// natural; the bracket (log 16 + log(1/eps)/ceil(log D)) defaults to base 2.
inline Theorem33Size theorem33_size(double eps, int D, int d, double b, double sigma_s2,
                                    double c1, double c2,
                                    SizeLogBase bracket_logs = SizeLogBase::base2) {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidInput("theorem33_size: eps must be in (0,1)");
    if (D < 2 || d < 1) throw InvalidInput("theorem33_size: need D >= 2, d >= 1");
    if (!(b > 0.0 && sigma_s2 > 0.0 && c1 > 0.0 && c2 > 0.0))
        throw InvalidInput("theorem33_size: b, sigma_s2, c1, c2 must be positive");
    const int L = ceil_log2(D);
    const double delta = eps / (6.0 * d * L);
    const double alpha = std::pow(eps / (2.0 * D), static_cast<double>(L));
    if (!(alpha < 0.25))
        throw InvalidInput("theorem33_size: eps too large, alpha = (eps/2D)^ceil(log2 D) must be < 1/4");
    const double b_limit = 2.0 / std::pow(std::log(1.0 / delta), 2.0);
    if (!(b <= b_limit))
        throw InvalidInput("theorem33_size: bandwidth violates b <= 2 / (log(1/delta))^2");
    const double B = sigma_s2 * b * b / (4096.0 * c2 * c2 * std::log(4.0 * c1 / (b * delta)));
    const double s = 1.0 + std::sqrt(1.0 + B);
    const double A = std::max({2.0, 16.0 * s * s / (B * B), 8.0 / (B * B)});
    const double lg16 = bracket_logs == SizeLogBase::base2 ? std::log2(16.0) : std::log(16.0);
    const double lg_eps = bracket_logs == SizeLogBase::base2 ? std::log2(1.0 / eps) : std::log(1.0 / eps);
    Theorem33Size out;
    out.alpha = alpha;
    out.a_eps = A;
    out.n_eps = A * d * L * (lg16 + lg_eps / L);
    return out;
}

// Sequential finite-difference tester. Each step draws a fresh location,
// observes the pair (f_I(z), f_I(z + 3b)) and accumulates the Eq-style additive
// LLR of the difference. Successive z draws are redrawn (up to 20 attempts)
// when they fall within 3b of the previous pair's location.
class FdtTester : public Tester {
public:
    FdtTester(double sigma_s2, double bandwidth, double noise_var)
        : v_(FdtHypothesisVariances::from_model(sigma_s2, noise_var)), delta_(3.0 * bandwidth) {
        if (delta_ >= 2.0) throw InvalidInput("FdtTester: probe offset 3b exceeds the domain");
    }

    const FdtHypothesisVariances& variances() const { return v_; }
    double probe_offset() const { return delta_; }

    void reset(Node& node) override {
        node.tester_state = std::make_unique<State>();
        node.llr = 0.0;
    }

    double step(Node& node, Oracle& oracle, const Eigen::VectorXd& background, Rng& rng) override {
        auto& st = state(node);
        double z = draw_location(st, rng);
        const double y1 = oracle.eval_noisy(project_point(node.dims, z, background));
        const double y2 = oracle.eval_noisy(project_point(node.dims, z + delta_, background));
        const double inc = fdt_llr_increment(y1 - y2, v_);
        st.last_z = z;
        st.pair_count += 1;
        node.samples_used += 2;
        node.llr += inc;
        return inc;
    }

    double index(const Node& node) const override { return node.llr; }
    int evals_per_step() const override { return 2; }

private:
    struct State : TesterState {
        int pair_count = 0;
        double last_z = std::numeric_limits<double>::quiet_NaN();
    };
    State& state(Node& node) {
        if (!node.tester_state) reset(node);
        return static_cast<State&>(*node.tester_state);
    }

    double draw_location(const State& st, Rng& rng) const {
        double z = rng.uniform(-1.0, 1.0 - delta_);
        if (std::isnan(st.last_z)) return z;
        for (int attempt = 0; attempt < 20 && std::abs(z - st.last_z) < delta_; ++attempt)
            z = rng.uniform(-1.0, 1.0 - delta_);
        return z;
    }

    FdtHypothesisVariances v_;
    double delta_;
};

// Non-sequential finite-difference tester: collects a fixed number of pairs per
// node, then decides by comparing X_n against the chi-squared threshold. The
// decision is surfaced by moving the node's LLR onto the matching boundary.
class FdtFixedTester : public Tester {
public:
    FdtFixedTester(double bandwidth, double noise_var, int pairs, double alpha, double theta1,
                   double theta0)
        : delta_(3.0 * bandwidth), noise_var_(noise_var), pairs_(pairs),
          threshold_(fdt_threshold(pairs, alpha)), theta1_(theta1), theta0_(theta0) {
        if (pairs_ < 1) throw InvalidInput("FdtFixedTester: pairs must be >= 1");
        if (delta_ >= 2.0) throw InvalidInput("FdtFixedTester: probe offset 3b exceeds the domain");
    }

    void reset(Node& node) override {
        node.tester_state = std::make_unique<State>();
        node.llr = 0.0;
    }

    double step(Node& node, Oracle& oracle, const Eigen::VectorXd& background, Rng& rng) override {
        auto& st = state(node);
        const double z = rng.uniform(-1.0, 1.0 - delta_);
        const double y1 = oracle.eval_noisy(project_point(node.dims, z, background));
        const double y2 = oracle.eval_noisy(project_point(node.dims, z + delta_, background));
        st.diffs.push_back(y1 - y2);
        node.samples_used += 2;
        if (static_cast<int>(st.diffs.size()) < pairs_) return 0.0;
        const double x_n = fdt_statistic(st.diffs, noise_var_);
        const double target = x_n > threshold_ ? theta1_ : theta0_;
        const double delta_llr = target - node.llr;
        node.llr = target;
        return delta_llr;
    }

    // Round-robin over least-sampled nodes.
    double index(const Node& node) const override { return -node.samples_used; }
    int evals_per_step() const override { return 2; }

private:
    struct State : TesterState {
        std::vector<double> diffs;
    };
    State& state(Node& node) {
        if (!node.tester_state) reset(node);
        return static_cast<State&>(*node.tester_state);
    }

    double delta_;
    double noise_var_;
    int pairs_;
    double threshold_;
    double theta1_, theta0_;
};

}  // namespace hdsopt
