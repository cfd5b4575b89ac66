#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "hdsopt/errors.hpp"
#include "hdsopt/rng.hpp"

namespace hdsopt {

// Squared-exponential kernel K(x, x') = sigma_s2 * exp(-sum_{i in A} (x_i - x'_i)^2 / b^2).
// Only the coordinates listed in active_dims enter the distance; for kernels on
// one-dimensional projected inputs the size of active_dims plays the role of the
// active count, so {} gives the constant kernel and {0} the a = 1 kernel.
struct KernelSpec {
    double sigma_s2 = 1.0;
    double bandwidth = 0.1;
    std::vector<int> active_dims;

    int active_count() const { return static_cast<int>(active_dims.size()); }

    void validate() const {
        if (!(sigma_s2 > 0.0)) throw InvalidInput("KernelSpec: sigma_s2 must be positive");
        if (!(bandwidth > 0.0)) throw InvalidInput("KernelSpec: bandwidth must be positive");
        for (std::size_t i = 0; i < active_dims.size(); ++i) {
            if (active_dims[i] < 0) throw InvalidInput("KernelSpec: negative dimension index");
            for (std::size_t j = i + 1; j < active_dims.size(); ++j)
                if (active_dims[i] == active_dims[j])
                    throw InvalidInput("KernelSpec: duplicate dimension index");
        }
    }

    static KernelSpec projected(double sigma_s2, double bandwidth, int active_count) {
        KernelSpec spec;
        spec.sigma_s2 = sigma_s2;
        spec.bandwidth = bandwidth;
        for (int i = 0; i < active_count; ++i) spec.active_dims.push_back(i);
        return spec;
    }
};

inline double se_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime,
                        const KernelSpec& spec) {
    if (x.size() != x_prime.size()) throw InvalidInput("se_kernel: dimension mismatch");
    double q = 0.0;
    for (int i : spec.active_dims) {
        if (i >= x.size()) throw InvalidInput("se_kernel: active dimension out of range");
        const double d = x[i] - x_prime[i];
        q += d * d;
    }
    return spec.sigma_s2 * std::exp(-q / (spec.bandwidth * spec.bandwidth));
}

struct PosteriorMoments {
    double mean = 0.0;
    double variance = 0.0;  // includes the observation-noise term
};

struct Dataset {
    std::vector<Eigen::VectorXd> points;
    std::vector<double> responses;
    double noise_var = 0.0;

    void validate() const {
        if (points.size() != responses.size())
            throw InvalidInput("Dataset: points and responses differ in length");
        if (!(noise_var > 0.0)) throw InvalidInput("Dataset: noise_var must be positive");
    }
};

// K + noise_var * I over the given points.
inline Eigen::MatrixXd gram_matrix(const std::vector<Eigen::VectorXd>& points,
                                   const KernelSpec& spec, double noise_var) {
    if (points.empty()) throw InvalidInput("gram_matrix: points must be nonempty");
    const int n = static_cast<int>(points.size());
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i) {
        K(i, i) = spec.sigma_s2 + noise_var;
        for (int j = i + 1; j < n; ++j) {
            const double v = se_kernel(points[i], points[j], spec);
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

namespace detail {

constexpr double kJitterStartScale = 1e-10;
constexpr double kJitterMaxScale = 1e-4;

// Lower Cholesky factor with jitter escalation: starting at 1e-10 * sigma_s2 the
// jitter doubles until the factorization succeeds or exceeds 1e-4 * sigma_s2.
// Returns the factor and the jitter that was used (0 when none was needed).
inline std::pair<Eigen::MatrixXd, double> cholesky_with_jitter(const Eigen::MatrixXd& m,
                                                               double sigma_s2) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return {Eigen::MatrixXd(llt.matrixL()), 0.0};
    double jitter = kJitterStartScale * sigma_s2;
    const double max_jitter = kJitterMaxScale * sigma_s2;
    while (jitter <= max_jitter) {
        Eigen::MatrixXd mj = m;
        mj.diagonal().array() += jitter;
        llt.compute(mj);
        if (llt.info() == Eigen::Success) return {Eigen::MatrixXd(llt.matrixL()), jitter};
        jitter *= 2.0;
    }
    throw NumericalError("cholesky_with_jitter: matrix not positive definite after jitter escalation");
}

}  // namespace detail

// Gaussian-process posterior with O(t^2) incremental updates. Maintains the
// lower Cholesky factor of K + sigma^2 I and the half-solve of the responses, so
// appending an observation costs one triangular solve instead of a refactorization.
// An optional candidate set keeps its half-solves cached, making repeated
// predictive sweeps over a fixed grid O(t * n_candidates) per new observation.
class IncrementalPosterior {
public:
    IncrementalPosterior(KernelSpec spec, double noise_var)
        : spec_(std::move(spec)), noise_var_(noise_var) {
        spec_.validate();
        if (!(noise_var_ > 0.0)) throw InvalidInput("IncrementalPosterior: noise_var must be positive");
    }

    int size() const { return static_cast<int>(points_.size()); }
    const KernelSpec& kernel() const { return spec_; }
    double noise_var() const { return noise_var_; }
    const std::vector<Eigen::VectorXd>& points() const { return points_; }
    const std::vector<double>& responses() const { return y_; }

    void extend(const Eigen::VectorXd& x, double y) {
        const int t = size();
        if (t == 0) {
            points_.push_back(x);
            y_.push_back(y);
            L_.resize(1, 1);
            const double d2 = spec_.sigma_s2 + noise_var_ + jitter_;
            L_(0, 0) = std::sqrt(d2);
            w_.resize(1);
            w_[0] = y / L_(0, 0);
            append_candidate_row_(x);
            return;
        }
        Eigen::VectorXd k(t);
        for (int i = 0; i < t; ++i) k[i] = se_kernel(points_[i], x, spec_);
        Eigen::VectorXd v = L_.topLeftCorner(t, t).triangularView<Eigen::Lower>().solve(k);
        double d2 = spec_.sigma_s2 + noise_var_ + jitter_ - v.squaredNorm();
        if (d2 <= 0.0) {
            escalate_jitter_and_rebuild_(x, y);
            return;
        }
        points_.push_back(x);
        y_.push_back(y);
        const double l = std::sqrt(d2);
        L_.conservativeResize(t + 1, t + 1);
        L_.row(t).head(t) = v.transpose();
        L_(t, t) = l;
        L_.col(t).head(t).setZero();
        const double wn = (y - v.dot(w_.head(t))) / l;
        w_.conservativeResize(t + 1);
        w_[t] = wn;
        append_candidate_row_(x);
    }

    PosteriorMoments moments(const Eigen::VectorXd& x) const {
        PosteriorMoments out;
        const int t = size();
        if (t == 0) {
            out.mean = 0.0;
            out.variance = noise_var_ + spec_.sigma_s2;
            return out;
        }
        Eigen::VectorXd k(t);
        for (int i = 0; i < t; ++i) k[i] = se_kernel(points_[i], x, spec_);
        Eigen::VectorXd v = L_.triangularView<Eigen::Lower>().solve(k);
        out.mean = v.dot(w_);
        out.variance = noise_var_ + spec_.sigma_s2 - v.squaredNorm();
        if (out.variance < 1e-12 * (noise_var_ + spec_.sigma_s2))
            out.variance = 1e-12 * (noise_var_ + spec_.sigma_s2);
        return out;
    }

    // Fix a candidate set whose predictive moments will be queried repeatedly.
    // Means and residual norms are carried incrementally: the Cholesky factor,
    // the half-solved responses and the half-solved candidate kernel block only
    // ever gain rows, so each extension updates every cached moment in O(1).
    void register_candidates(std::vector<Eigen::VectorXd> candidates) {
        cand_ = std::move(candidates);
        const int n = static_cast<int>(cand_.size());
        const int t = size();
        V_.resize(t, n);
        if (t > 0) {
            Eigen::MatrixXd Kc(t, n);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < t; ++i) Kc(i, j) = se_kernel(points_[i], cand_[j], spec_);
            V_ = L_.triangularView<Eigen::Lower>().solve(Kc);
            cand_means_ = V_.transpose() * w_;
            cand_sq_ = V_.colwise().squaredNorm();
        } else {
            cand_means_ = Eigen::VectorXd::Zero(n);
            cand_sq_ = Eigen::VectorXd::Zero(n);
        }
    }

    int candidate_count() const { return static_cast<int>(cand_.size()); }
    const Eigen::VectorXd& candidate(int j) const { return cand_[j]; }

    void candidate_moments(std::vector<PosteriorMoments>& out) const {
        const int n = candidate_count();
        out.resize(n);
        const double prior = noise_var_ + spec_.sigma_s2;
        for (int j = 0; j < n; ++j) {
            double var = prior - cand_sq_[j];
            if (var < 1e-12 * prior) var = 1e-12 * prior;
            out[j] = {cand_means_[j], var};
        }
    }

private:
    void append_candidate_row_(const Eigen::VectorXd& x) {
        const int n = candidate_count();
        if (n == 0) return;
        const int t = size();  // already includes the new point
        V_.conservativeResize(t, n);
        const double l = L_(t - 1, t - 1);
        if (t == 1) {
            for (int j = 0; j < n; ++j) V_(0, j) = se_kernel(x, cand_[j], spec_) / l;
        } else {
            Eigen::VectorXd kc(n);
            for (int j = 0; j < n; ++j) kc[j] = se_kernel(x, cand_[j], spec_);
            V_.row(t - 1) = (kc.transpose() - L_.row(t - 1).head(t - 1) * V_.topRows(t - 1)) / l;
        }
        const double wt = w_[t - 1];
        cand_means_ += wt * V_.row(t - 1).transpose();
        cand_sq_ += V_.row(t - 1).array().square().matrix();
    }

    // Refactorize from scratch with a growing diagonal jitter, then retry the
    // pending extension. Near-duplicate points in sequential designs get here.
    void escalate_jitter_and_rebuild_(const Eigen::VectorXd& x, double y) {
        double jitter = std::max(jitter_ * 2.0, detail::kJitterStartScale * spec_.sigma_s2);
        const double max_jitter = detail::kJitterMaxScale * spec_.sigma_s2;
        std::vector<Eigen::VectorXd> pts = points_;
        pts.push_back(x);
        Eigen::MatrixXd K = gram_matrix(pts, spec_, noise_var_);
        while (jitter <= max_jitter) {
            Eigen::MatrixXd Kj = K;
            Kj.diagonal().array() += jitter;
            Eigen::LLT<Eigen::MatrixXd> llt(Kj);
            if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
                jitter_ = jitter;
                points_ = std::move(pts);
                y_.push_back(y);
                L_ = llt.matrixL();
                Eigen::Map<const Eigen::VectorXd> ym(y_.data(), static_cast<int>(y_.size()));
                w_ = L_.triangularView<Eigen::Lower>().solve(ym);
                if (!cand_.empty()) register_candidates(std::move(cand_));
                return;
            }
            jitter *= 2.0;
        }
        throw NumericalError("IncrementalPosterior: Gram factorization failed after jitter escalation");
    }

    KernelSpec spec_;
    double noise_var_;
    std::vector<Eigen::VectorXd> points_;
    std::vector<double> y_;
    Eigen::MatrixXd L_;
    Eigen::VectorXd w_;  // L^{-1} y
    double jitter_ = 0.0;
    std::vector<Eigen::VectorXd> cand_;
    Eigen::MatrixXd V_;           // L^{-1} K(X, candidates)
    Eigen::VectorXd cand_means_;  // V^T w
    Eigen::VectorXd cand_sq_;     // column squared norms of V
};

// Batch posterior predictive at a single query point.
inline PosteriorMoments posterior_moments(const Dataset& data, const KernelSpec& spec,
                                          const Eigen::VectorXd& x_query) {
    spec.validate();
    if (data.points.empty()) {
        if (!(data.noise_var > 0.0)) throw InvalidInput("posterior_moments: noise_var must be positive");
        return {0.0, data.noise_var + spec.sigma_s2};
    }
    data.validate();
    IncrementalPosterior post(spec, data.noise_var);
    for (std::size_t i = 0; i < data.points.size(); ++i) post.extend(data.points[i], data.responses[i]);
    return post.moments(x_query);
}

// Ground-truth function realized on a regular lattice over [-1, 1]^dims with
// multilinear interpolation between lattice nodes. The global maximum of such an
// interpolant is attained at a node, which keeps regret references exact.
struct LatticeFunction {
    int dims = 0;
    int resolution = 0;
    std::vector<double> values;  // row-major, last axis fastest

    double axis_coord(int idx) const {
        return -1.0 + 2.0 * static_cast<double>(idx) / static_cast<double>(resolution - 1);
    }

    double eval(const Eigen::VectorXd& x) const {
        if (x.size() != dims) throw InvalidInput("LatticeFunction: query dimension mismatch");
        std::vector<int> base(dims);
        std::vector<double> frac(dims);
        for (int k = 0; k < dims; ++k) {
            double u = (std::clamp(x[k], -1.0, 1.0) + 1.0) * 0.5 * (resolution - 1);
            int i = static_cast<int>(std::floor(u));
            i = std::clamp(i, 0, resolution - 2);
            base[k] = i;
            frac[k] = u - i;
        }
        double acc = 0.0;
        const int corners = 1 << dims;
        for (int c = 0; c < corners; ++c) {
            double wgt = 1.0;
            std::size_t idx = 0;
            for (int k = 0; k < dims; ++k) {
                const int bit = (c >> k) & 1;
                wgt *= bit ? frac[k] : 1.0 - frac[k];
                idx = idx * resolution + (base[k] + bit);
            }
            acc += wgt * values[idx];
        }
        return acc;
    }

    // Arg-max over lattice nodes (which is the interpolant's global max).
    std::pair<Eigen::VectorXd, double> max_point() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] > values[best]) best = i;
        Eigen::VectorXd loc(dims);
        std::size_t rem = best;
        for (int k = dims - 1; k >= 0; --k) {
            loc[k] = axis_coord(static_cast<int>(rem % resolution));
            rem /= resolution;
        }
        return {loc, values[best]};
    }
};

// Seeded draw from the GP prior restricted to the lattice nodes. The
// squared-exponential kernel factorizes over axes on a tensor grid, so the draw
// uses per-axis Cholesky factors instead of one factorization of the full Gram.
inline LatticeFunction sample_gp_lattice(const KernelSpec& spec, int dims, int resolution,
                                         std::uint64_t seed) {
    spec.validate();
    if (dims < 1) throw InvalidInput("sample_gp_lattice: dims must be >= 1");
    if (resolution < 2) throw InvalidInput("sample_gp_lattice: resolution must be >= 2");
    double total = 1.0;
    for (int k = 0; k < dims; ++k) total *= resolution;
    if (total > 20000.0) throw InvalidInput("sample_gp_lattice: lattice exceeds 20000 points");
    const std::size_t n = static_cast<std::size_t>(total);

    LatticeFunction f;
    f.dims = dims;
    f.resolution = resolution;
    f.values.resize(n);

    // Unit-variance correlation matrix along one axis.
    Eigen::MatrixXd C(resolution, resolution);
    for (int i = 0; i < resolution; ++i) {
        for (int j = 0; j < resolution; ++j) {
            const double d = 2.0 * static_cast<double>(i - j) / static_cast<double>(resolution - 1);
            C(i, j) = std::exp(-d * d / (spec.bandwidth * spec.bandwidth));
        }
    }
    auto [L, jitter] = detail::cholesky_with_jitter(C, 1.0);
    (void)jitter;

    Rng rng = Rng(seed).child("gp_lattice");
    Eigen::VectorXd z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();

    // Apply the axis factor along each tensor mode.
    std::vector<double> buf(n);
    std::vector<double> cur(z.data(), z.data() + n);
    std::size_t stride = n / resolution;  // stride of axis 0 in row-major order
    for (int axis = 0; axis < dims; ++axis) {
        const std::size_t blocks = n / (stride * resolution);
        for (std::size_t b = 0; b < blocks; ++b) {
            for (std::size_t s = 0; s < stride; ++s) {
                const std::size_t off = b * stride * resolution + s;
                for (int i = 0; i < resolution; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j <= i; ++j) acc += L(i, j) * cur[off + j * stride];
                    buf[off + i * stride] = acc;
                }
            }
        }
        cur.swap(buf);
        stride /= resolution;
    }
    const double scale = std::sqrt(spec.sigma_s2);
    for (std::size_t i = 0; i < n; ++i) f.values[i] = scale * cur[i];
    return f;
}

}  // namespace hdsopt
