#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "hdsopt/errors.hpp"
#include "hdsopt/gp.hpp"
#include "hdsopt/hds.hpp"
#include "hdsopt/stats.hpp"

namespace hdsopt {

// Exact log-density difference log N(y | m1) - log N(y | m0).
inline double gpt_llr_increment(double y, const PosteriorMoments& m0, const PosteriorMoments& m1) {
    return gauss_log_pdf(y, m1.mean, m1.variance) - gauss_log_pdf(y, m0.mean, m0.variance);
}

// Law of the next-sample LLR under the alternative: a shifted scaled noncentral
// chi-squared w2 * chi^2(1, lambda) + w0, plus its first two moments.
struct LlrPredictiveMoments {
    double w2 = 0.0;
    double w0 = 0.0;
    double lambda = 0.0;
    double mean = 0.0;
    double var = 0.0;
};

inline LlrPredictiveMoments llr_predictive_moments(const PosteriorMoments& m0,
                                                   const PosteriorMoments& m1) {
    if (!(m0.variance > 0.0 && m1.variance > 0.0))
        throw InvalidInput("llr_predictive_moments: variances must be positive");
    LlrPredictiveMoments out;
    const double dmu = m1.mean - m0.mean;
    const double dvar = m1.variance - m0.variance;
    if (std::abs(dvar) <= 1e-12 * m1.variance) {
        // Equal-variance limit: the LLR is linear in y, hence Gaussian.
        const double v = m1.variance;
        out.mean = dmu * dmu / (2.0 * v);
        out.var = dmu * dmu / v;
        return out;
    }
    out.w2 = 0.5 * (m1.variance / m0.variance - 1.0);
    const double s1 = std::sqrt(m1.variance);
    const double root = s1 * dmu / dvar;
    out.lambda = root * root;
    out.w0 = 0.5 * std::log(m0.variance / m1.variance) - dmu * dmu / (2.0 * dvar);
    out.mean = out.w2 * (1.0 + out.lambda) + out.w0;
    out.var = 2.0 * out.w2 * out.w2 * (1.0 + 2.0 * out.lambda);
    return out;
}

// Sampling index E[LLR] + sqrt(V[LLR]) for a prospective sample.
inline double ucb_index(const PosteriorMoments& m0, const PosteriorMoments& m1) {
    const LlrPredictiveMoments m = llr_predictive_moments(m0, m1);
    return m.mean + std::sqrt(m.var);
}

// GP sequential likelihood-ratio tester. Per node it keeps two posteriors over
// the node's one-dimensional diagonal, one under the constant (a = 0) kernel and
// one under the a = 1 kernel, conditioned on the same history. Each step samples
// the grid location with the largest index, observes once, and accumulates the
// exact log-density difference.
class GptTester : public Tester {
public:
    static constexpr int kGridSize = 101;
    static constexpr int kHistoryCap = 500;

    GptTester(double sigma_s2, double bandwidth, double noise_var)
        : sigma_s2_(sigma_s2), bandwidth_(bandwidth), noise_var_(noise_var) {
        grid_.reserve(kGridSize);
        for (int i = 0; i < kGridSize; ++i) {
            Eigen::VectorXd z(1);
            z[0] = -1.0 + 2.0 * static_cast<double>(i) / (kGridSize - 1);
            grid_.push_back(z);
        }
    }

    void reset(Node& node) override {
        auto st = std::make_unique<State>(
            IncrementalPosterior(KernelSpec::projected(sigma_s2_, bandwidth_, 0), noise_var_),
            IncrementalPosterior(KernelSpec::projected(sigma_s2_, bandwidth_, 1), noise_var_));
        st->h0.register_candidates(grid_);
        st->h1.register_candidates(grid_);
        node.tester_state = std::move(st);
        node.llr = 0.0;
    }

    double step(Node& node, Oracle& oracle, const Eigen::VectorXd& background, Rng&) override {
        auto& st = state(node);
        if (st.h1.size() >= kHistoryCap)
            throw NumericalError("GptTester: node history exceeded the 500-point cap");
        st.h0.candidate_moments(m0_);
        st.h1.candidate_moments(m1_);
        int pick = 0;
        double best = ucb_index(m0_[0], m1_[0]);
        for (int j = 1; j < kGridSize; ++j) {
            const double v = ucb_index(m0_[j], m1_[j]);
            if (v > best) {
                best = v;
                pick = j;
            }
        }
        const double z = grid_[pick][0];
        const double y = oracle.eval_noisy(project_point(node.dims, z, background));
        const double inc = gpt_llr_increment(y, m0_[pick], m1_[pick]);
        st.h0.extend(grid_[pick], y);
        st.h1.extend(grid_[pick], y);
        st.h0.candidate_moments(m0_);
        st.h1.candidate_moments(m1_);
        double idx = ucb_index(m0_[0], m1_[0]);
        for (int j = 1; j < kGridSize; ++j) idx = std::max(idx, ucb_index(m0_[j], m1_[j]));
        st.cached_index = idx;
        node.samples_used += 1;
        node.llr += inc;
        return inc;
    }

    double index(const Node& node) const override {
        if (!node.tester_state) return 0.0;
        return static_cast<const State&>(*node.tester_state).cached_index;
    }
    int evals_per_step() const override { return 1; }

    // History access for bookkeeping checks.
    struct State : TesterState {
        State(IncrementalPosterior p0, IncrementalPosterior p1)
            : h0(std::move(p0)), h1(std::move(p1)) {}
        IncrementalPosterior h0;
        IncrementalPosterior h1;
        double cached_index = 0.0;
    };
    static const State& node_state(const Node& node) {
        return static_cast<const State&>(*node.tester_state);
    }

private:
    State& state(Node& node) {
        if (!node.tester_state) reset(node);
        return static_cast<State&>(*node.tester_state);
    }

    double sigma_s2_, bandwidth_, noise_var_;
    std::vector<Eigen::VectorXd> grid_;
    std::vector<PosteriorMoments> m0_, m1_;
};

}  // namespace hdsopt
