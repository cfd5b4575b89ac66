#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hdsopt/errors.hpp"
#include "hdsopt/gp.hpp"
#include "hdsopt/rng.hpp"
#include "hdsopt/stats.hpp"

namespace hdsopt {

// Noisy black-box objective over [-1, 1]^dim. eval_noisy is the only channel the
// selection and optimization algorithms may use; eval_true exists for regret
// accounting and tests and does not touch the sample counter.
class Oracle {
public:
    Oracle(int dim, std::function<double(const Eigen::VectorXd&)> f, double noise_var, Rng noise_rng)
        : dim_(dim), f_(std::move(f)), noise_var_(noise_var), noise_rng_(std::move(noise_rng)) {
        if (dim_ < 1) throw InvalidInput("Oracle: dim must be >= 1");
        if (!(noise_var_ >= 0.0)) throw InvalidInput("Oracle: noise_var must be >= 0");
    }

    int dim() const { return dim_; }
    double noise_var() const { return noise_var_; }
    long eval_count() const { return eval_count_; }

    double eval_noisy(const Eigen::VectorXd& x) {
        ++eval_count_;
        const double y = f_(x);
        return noise_var_ > 0.0 ? y + noise_rng_.normal(0.0, std::sqrt(noise_var_)) : y;
    }

    double eval_true(const Eigen::VectorXd& x) const { return f_(x); }

private:
    int dim_;
    std::function<double(const Eigen::VectorXd&)> f_;
    double noise_var_;
    Rng noise_rng_;
    long eval_count_ = 0;
};

enum class NodeState { undetermined, active, inactive };

struct TesterState {
    virtual ~TesterState() = default;
};

// One node of the bisection tree: a subset of dimensions plus its test progress.
struct Node {
    std::vector<int> dims;
    NodeState state = NodeState::undetermined;
    double llr = 0.0;
    int samples_used = 0;
    int depth = 0;
    std::unique_ptr<TesterState> tester_state;

    bool singleton() const { return dims.size() == 1; }
};

// Background vector supplying coordinates outside the probed subset; drawn once
// per run, before any observation.
inline Eigen::VectorXd draw_background(std::uint64_t seed, int dim) {
    Rng rng = Rng(seed).child("background");
    Eigen::VectorXd bg(dim);
    for (int i = 0; i < dim; ++i) bg[i] = rng.uniform(-1.0, 1.0);
    return bg;
}

// Embed the scalar z on the diagonal of the node's dimensions, holding every
// other coordinate at the background value.
inline Eigen::VectorXd project_point(const std::vector<int>& dims, double z,
                                     const Eigen::VectorXd& background) {
    if (dims.empty()) throw InvalidInput("project_point: node must be nonempty");
    if (!(z >= -1.0 && z <= 1.0)) throw InvalidInput("project_point: z out of [-1, 1]");
    Eigen::VectorXd x = background;
    for (int i : dims) {
        if (i < 0 || i >= background.size())
            throw InvalidInput("project_point: dimension index out of range");
        x[i] = z;
    }
    return x;
}

// Index-order halving: first ceil(n/2) indices left, rest right.
inline std::pair<std::vector<int>, std::vector<int>> split_node(const std::vector<int>& dims) {
    if (dims.size() < 2) throw InvalidInput("split_node: cannot split a singleton");
    const std::size_t left_n = (dims.size() + 1) / 2;
    std::vector<int> left(dims.begin(), dims.begin() + left_n);
    std::vector<int> right(dims.begin() + left_n, dims.end());
    return {std::move(left), std::move(right)};
}

// Pluggable testing block. step() consumes a bounded number of oracle
// evaluations, adds the per-step LLR increment onto node.llr and returns it;
// index() is the priority used to pick the next node to sample.
class Tester {
public:
    virtual ~Tester() = default;
    virtual void reset(Node& node) = 0;
    virtual double step(Node& node, Oracle& oracle, const Eigen::VectorXd& background, Rng& rng) = 0;
    virtual double index(const Node& node) const = 0;
    virtual int evals_per_step() const = 0;
};

enum class TesterKind { fdt_sequential, fdt_fixed, gpt, stub };

struct HdsConfig {
    long budget = 2000;
    double theta1 = 10.0;
    double theta0 = -10.0;
    TesterKind tester = TesterKind::fdt_sequential;
    KernelSpec kernel;       // projection kernel parameters (sigma_s2, bandwidth)
    double noise_var = 0.1;
    int fixed_pairs = 32;    // fdt_fixed: pairs collected per node
    double fixed_alpha = 0.05;

    void validate() const {
        if (budget < 0) throw InvalidInput("HdsConfig: budget must be >= 0");
        if (!(theta1 > 0.0)) throw InvalidInput("HdsConfig: theta1 must be positive");
        if (!(theta0 < 0.0)) throw InvalidInput("HdsConfig: theta0 must be negative");
        if (!(noise_var > 0.0)) throw InvalidInput("HdsConfig: noise_var must be positive");
        if (fixed_pairs < 1) throw InvalidInput("HdsConfig: fixed_pairs must be >= 1");
        if (!(fixed_alpha > 0.0 && fixed_alpha < 1.0))
            throw InvalidInput("HdsConfig: fixed_alpha must be in (0, 1)");
    }
};

enum class TerminationCause { tree_empty, budget };

struct NodeRecord {
    std::vector<int> dims;
    NodeState state = NodeState::undetermined;
    double llr = 0.0;
    int samples_used = 0;
    int depth = 0;
};

struct HdsResult {
    std::vector<int> recovered;  // emitted singleton dimensions, sorted
    std::vector<NodeRecord> nodes;
    TerminationCause terminated_by = TerminationCause::tree_empty;
    long evals_used = 0;
};

// Ground-truth stub tester for accounting and bound checks: decides a node after
// a fixed number of probe steps, flipping the true answer with a configurable
// error rate. Each step burns one oracle evaluation so sample accounting stays
// exercised end to end.
class StubTester : public Tester {
public:
    StubTester(std::vector<int> active_dims, double theta1, double theta0, double error_rate = 0.0,
               int steps_to_decide = 1, std::uint64_t seed = 0)
        : active_(std::move(active_dims)), theta1_(theta1), theta0_(theta0),
          error_rate_(error_rate), steps_(steps_to_decide), rng_(Rng(seed).child("stub")) {
        std::sort(active_.begin(), active_.end());
    }

    void reset(Node& node) override {
        node.tester_state = std::make_unique<State>();
        node.llr = 0.0;
    }

    double step(Node& node, Oracle& oracle, const Eigen::VectorXd& background, Rng&) override {
        auto& st = state(node);
        oracle.eval_noisy(project_point(node.dims, 0.0, background));
        node.samples_used += 1;
        ++st.taken;
        if (st.taken < steps_) return 0.0;
        bool truth = false;
        for (int d : node.dims)
            if (std::binary_search(active_.begin(), active_.end(), d)) truth = true;
        bool answer = truth;
        if (error_rate_ > 0.0 && rng_.uniform() < error_rate_) answer = !answer;
        ++decisions_;
        if (answer != truth) ++errors_;
        const double delta = answer ? theta1_ - node.llr : theta0_ - node.llr;
        node.llr += delta;
        return delta;
    }

    double index(const Node& node) const override { return node.llr; }
    int evals_per_step() const override { return 1; }

    long decisions() const { return decisions_; }
    long errors() const { return errors_; }
    double observed_error_rate() const {
        return decisions_ > 0 ? static_cast<double>(errors_) / static_cast<double>(decisions_) : 0.0;
    }

private:
    struct State : TesterState {
        int taken = 0;
    };
    State& state(Node& node) {
        if (!node.tester_state) reset(node);
        return static_cast<State&>(*node.tester_state);
    }

    std::vector<int> active_;
    double theta1_, theta0_;
    double error_rate_;
    int steps_;
    Rng rng_;
    long decisions_ = 0;
    long errors_ = 0;
};

// Outer sampling loop: keep one tree of undetermined nodes, repeatedly step the
// node with the largest tester priority (ties to the lexicographically smallest
// dimension set), and resolve nodes whose cumulative LLR crosses a threshold.
// A step that could not be paid for from the remaining budget is not started.
inline HdsResult hds_run(Oracle& oracle, const HdsConfig& cfg, std::uint64_t seed, Tester& tester,
                         const Eigen::VectorXd& background) {
    cfg.validate();
    if (background.size() != oracle.dim()) throw InvalidInput("hds_run: background dimension mismatch");

    HdsResult result;
    const long evals_at_start = oracle.eval_count();
    Rng rng = Rng(seed).child("hds");

    std::deque<Node> nodes;
    {
        Node root;
        root.dims.resize(oracle.dim());
        for (int i = 0; i < oracle.dim(); ++i) root.dims[i] = i;
        tester.reset(root);
        nodes.push_back(std::move(root));
    }
    std::vector<Node*> live;
    live.push_back(&nodes.back());

    result.terminated_by = TerminationCause::tree_empty;
    while (!live.empty()) {
        const long used = oracle.eval_count() - evals_at_start;
        if (used + tester.evals_per_step() > cfg.budget) {
            result.terminated_by = TerminationCause::budget;
            break;
        }
        Node* pick = live.front();
        double best = tester.index(*pick);
        for (Node* n : live) {
            const double v = tester.index(*n);
            if (v > best || (v == best && std::lexicographical_compare(
                                              n->dims.begin(), n->dims.end(),
                                              pick->dims.begin(), pick->dims.end()))) {
                best = v;
                pick = n;
            }
        }

        tester.step(*pick, oracle, background, rng);

        if (pick->llr >= cfg.theta1) {
            pick->state = NodeState::active;
            live.erase(std::find(live.begin(), live.end(), pick));
            if (pick->singleton()) {
                result.recovered.push_back(pick->dims.front());
            } else {
                auto [ldims, rdims] = split_node(pick->dims);
                Node left, right;
                left.dims = std::move(ldims);
                right.dims = std::move(rdims);
                left.depth = right.depth = pick->depth + 1;
                tester.reset(left);
                tester.reset(right);
                nodes.push_back(std::move(left));
                live.push_back(&nodes.back());
                nodes.push_back(std::move(right));
                live.push_back(&nodes.back());
            }
        } else if (pick->llr <= cfg.theta0) {
            pick->state = NodeState::inactive;
            live.erase(std::find(live.begin(), live.end(), pick));
        }
    }

    std::sort(result.recovered.begin(), result.recovered.end());
    result.evals_used = oracle.eval_count() - evals_at_start;
    for (const Node& n : nodes)
        result.nodes.push_back({n.dims, n.state, n.llr, n.samples_used, n.depth});
    return result;
}

}  // namespace hdsopt
