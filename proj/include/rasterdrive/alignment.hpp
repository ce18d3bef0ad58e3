#pragma once

// Raster-to-real feature alignment at desk scale.
//
// A TinyEncoder (fixed 8x8 patch average followed by a two-layer tanh
// projector) maps an image to an N x d' FeatureMap. Two losses tie the real
// and raster domains together:
//
//   spatial: (1/N) sum_j ||F^r_j - F^s_j||^2, raster side detached
//   global:  binary cross-entropy of a DomainClassifier on the pooled
//            features, fed through a gradient reversal layer
//
// and the training objective is L = L_task + lambda_s L_spatial + lambda_g L_global.
// All backward passes are written out by hand.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rasterdrive/error.hpp"
#include "rasterdrive/rasterizer.hpp"
#include "rasterdrive/rng.hpp"

namespace rasterdrive::align {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// N spatial locations (rows) by d' feature channels (columns).
struct FeatureMap {
    Matrix values;

    Eigen::Index locations() const { return values.rows(); }
    Eigen::Index channels() const { return values.cols(); }
};

inline void require_same_shape(const FeatureMap& a, const FeatureMap& b) {
    if (a.locations() != b.locations() || a.channels() != b.channels() || a.locations() < 1 || a.channels() < 1)
        throw InvariantError("feature maps must share a non-empty N x d' shape");
}

// ---------------------------------------------------------------------------
// Losses and layers

inline double spatial_loss(const FeatureMap& real, const FeatureMap& raster) {
    require_same_shape(real, raster);
    return (real.values - raster.values).squaredNorm() / static_cast<double>(real.locations());
}

struct SpatialGrad {
    Matrix real;
    /// Always zero: raster features are treated as constants.
    Matrix raster;
};

inline SpatialGrad spatial_loss_grad(const FeatureMap& real, const FeatureMap& raster) {
    require_same_shape(real, raster);
    const double scale = 2.0 / static_cast<double>(real.locations());
    return {scale * (real.values - raster.values), Matrix::Zero(raster.locations(), raster.channels())};
}

/// Column mean over the N locations.
inline Vector global_pool(const FeatureMap& f) {
    if (f.locations() < 1) throw InvariantError("global_pool: empty feature map");
    return f.values.colwise().mean().transpose();
}

/// d(pool)/dF applied to an upstream gradient on the pooled vector.
inline Matrix global_pool_backward(const Vector& upstream, Eigen::Index locations) {
    return (upstream / static_cast<double>(locations)).transpose().replicate(locations, 1);
}

/// Gradient reversal: identity forward.
inline Vector grl_forward(const Vector& x) { return x; }

/// Gradient reversal backward: -lambda * upstream.
inline Vector grl_backward(const Vector& upstream, double lambda) { return -lambda * upstream; }

struct AnnealState {
    double progress = 0.0;
    double gamma = 10.0;
    double scale = 0.1;
};

/// lambda(p) = scale * (2 / (1 + exp(-gamma p)) - 1), p in [0, 1].
inline double anneal_lambda(const AnnealState& s) {
    if (!(s.progress >= 0.0 && s.progress <= 1.0)) throw RangeError("anneal_lambda: progress outside [0, 1]");
    if (!(s.gamma > 0.0)) throw RangeError("anneal_lambda: gamma must be positive");
    return s.scale * (2.0 / (1.0 + std::exp(-s.gamma * s.progress)) - 1.0);
}

struct LossWeights {
    double lambda_s = 0.002;
    double lambda_g = 0.1;
};

inline double total_loss(double task, double spatial, double global, const LossWeights& w) {
    return task + w.lambda_s * spatial + w.lambda_g * global;
}

// ---------------------------------------------------------------------------
// Parameterized modules

inline constexpr double kLogitClamp = 30.0;

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Image -> FeatureMap. The first stage averages non-overlapping patches of
/// the RGB image (scaled to [0, 1]) and has no parameters; the projector is
/// F = W2 tanh(W1 x + b1) + b2 applied per patch.
class TinyEncoder {
public:
    static constexpr int kInputs = 3;

    TinyEncoder(int hidden = 16, int out = 8) : hidden_(hidden), out_(out), params_(Vector::Zero(size())) {}

    static TinyEncoder random(Rng& rng, int hidden = 16, int out = 8, double scale = 0.5) {
        TinyEncoder e(hidden, out);
        for (Eigen::Index i = 0; i < e.params_.size(); ++i) e.params_[i] = scale * (2.0 * rng.uniform() - 1.0);
        return e;
    }

    int hidden() const { return hidden_; }
    int out() const { return out_; }
    Eigen::Index size() const { return hidden_ * kInputs + hidden_ + out_ * hidden_ + out_; }

    Vector& params() { return params_; }
    const Vector& params() const { return params_; }

    struct Cache {
        Matrix input;   // N x 3
        Matrix hidden;  // N x h, post-tanh
    };

    FeatureMap forward(const Matrix& patches, Cache* cache = nullptr) const {
        const Matrix h = ((patches * w1().transpose()).rowwise() + b1().transpose()).array().tanh().matrix();
        FeatureMap f{(h * w2().transpose()).rowwise() + b2().transpose()};
        if (cache) *cache = {patches, h};
        return f;
    }

    /// Parameter gradient for an upstream gradient on the FeatureMap.
    Vector backward(const Matrix& d_features, const Cache& cache) const {
        Vector g(size());
        const Matrix d_hidden = d_features * w2();
        const Matrix d_pre = (d_hidden.array() * (1.0 - cache.hidden.array().square())).matrix();
        Eigen::Index o = 0;
        Eigen::Map<Matrix>(g.data() + o, hidden_, kInputs) = d_pre.transpose() * cache.input;
        o += hidden_ * kInputs;
        g.segment(o, hidden_) = d_pre.colwise().sum().transpose();
        o += hidden_;
        Eigen::Map<Matrix>(g.data() + o, out_, hidden_) = d_features.transpose() * cache.hidden;
        o += out_ * hidden_;
        g.segment(o, out_) = d_features.colwise().sum().transpose();
        return g;
    }

private:
    Eigen::Map<const Matrix> w1() const { return {params_.data(), hidden_, kInputs}; }
    Eigen::Map<const Vector> b1() const { return {params_.data() + hidden_ * kInputs, hidden_}; }
    Eigen::Map<const Matrix> w2() const { return {params_.data() + hidden_ * kInputs + hidden_, out_, hidden_}; }
    Eigen::Map<const Vector> b2() const {
        return {params_.data() + hidden_ * kInputs + hidden_ + out_ * hidden_, out_};
    }

    int hidden_;
    int out_;
    Vector params_;
};

/// g -> D(g) = sigmoid(clamp(v . tanh(U g + c) + b, +-30)).
class DomainClassifier {
public:
    DomainClassifier(int in = 8, int hidden = 8) : in_(in), hidden_(hidden), params_(Vector::Zero(size())) {}

    static DomainClassifier random(Rng& rng, int in = 8, int hidden = 8, double scale = 0.5) {
        DomainClassifier d(in, hidden);
        for (Eigen::Index i = 0; i < d.params_.size(); ++i) d.params_[i] = scale * (2.0 * rng.uniform() - 1.0);
        return d;
    }

    Eigen::Index size() const { return hidden_ * in_ + hidden_ + hidden_ + 1; }
    int inputs() const { return in_; }
    Vector& params() { return params_; }
    const Vector& params() const { return params_; }

    double logit(const Vector& g, Vector* hidden = nullptr) const {
        const Vector h = ((u() * g) + c()).array().tanh().matrix();
        if (hidden) *hidden = h;
        return v().dot(h) + params_[params_.size() - 1];
    }

    /// Probability strictly inside (0, 1).
    double operator()(const Vector& g) const { return sigmoid(std::clamp(logit(g), -kLogitClamp, kLogitClamp)); }

    struct Grad {
        Vector params;
        Vector input;
        double loss = 0.0;
    };

    /// -[y log D(g) + (1 - y) log(1 - D(g))] and its gradients, scaled by
    /// `weight`.
    Grad bce(const Vector& g, int y, double weight = 1.0) const {
        Vector h;
        const double z = logit(g, &h);
        const double zc = std::clamp(z, -kLogitClamp, kLogitClamp);
        Grad out;
        out.loss = weight * (y == 1 ? softplus(-zc) : softplus(zc));
        double dz = weight * (sigmoid(zc) - static_cast<double>(y));
        if (z <= -kLogitClamp || z >= kLogitClamp) dz = 0.0;
        out.params.resize(size());
        const Vector da = (dz * v()).array() * (1.0 - h.array().square());
        Eigen::Map<Matrix>(out.params.data(), hidden_, in_) = da * g.transpose();
        out.params.segment(hidden_ * in_, hidden_) = da;
        out.params.segment(hidden_ * in_ + hidden_, hidden_) = dz * h;
        out.params[size() - 1] = dz;
        out.input = u().transpose() * da;
        return out;
    }

private:
    Eigen::Map<const Matrix> u() const { return {params_.data(), hidden_, in_}; }
    Eigen::Map<const Vector> c() const { return {params_.data() + hidden_ * in_, hidden_}; }
    Eigen::Map<const Vector> v() const { return {params_.data() + hidden_ * in_ + hidden_, hidden_}; }

    int in_;
    int hidden_;
    Vector params_;
};

inline double global_loss(const Vector& g, int y, const DomainClassifier& d) { return d.bce(g, y).loss; }

/// Linear regression head on the pooled features: w . g + b.
struct TaskHead {
    Vector params;  // d' weights followed by the bias

    explicit TaskHead(int in = 8) : params(Vector::Zero(in + 1)) {}
    double operator()(const Vector& g) const { return params.head(g.size()).dot(g) + params[g.size()]; }
};

// ---------------------------------------------------------------------------
// Batched objective

/// Patch matrices of one batch. Pairs share scene content; raster targets
/// drive the task loss.
struct AlignmentBatch {
    std::vector<Matrix> real;
    std::vector<Matrix> raster;
    std::vector<double> raster_targets;
    /// real[i] is paired with raster[i] for i < pairs.
    std::size_t pairs = 0;
};

inline constexpr int kRealLabel = 1;
inline constexpr int kRasterLabel = 0;

/// How the domain-loss gradient reaches the encoder.
enum class GlobalPath : std::uint8_t {
    reversed,  ///< through the gradient reversal layer
    identity,  ///< plain backprop, for checking the reversal
};

struct ObjectiveResult {
    double task = 0.0;
    double spatial = 0.0;
    double global = 0.0;
    double total = 0.0;
    Vector grad_encoder;
    Vector grad_classifier;
    /// Gradient of L_global alone w.r.t. the classifier, independent of lambda_g.
    Vector grad_classifier_own;
    Vector grad_head;
    /// Per-sample gradient on the pooled features delivered to the encoder by
    /// the global branch (after the GRL when reversed); real samples first.
    std::vector<Vector> global_feature_grads;
    /// Gradient reaching the raster-side FeatureMaps from the spatial loss.
    std::vector<Matrix> raster_spatial_grads;
    /// Separate encoder gradients of each term (already weighted).
    Vector grad_encoder_task;
    Vector grad_encoder_spatial;
    Vector grad_encoder_global;
};

/// Which terms contribute gradients.
struct ObjectiveTerms {
    bool task = true;
    bool spatial = true;
    bool global = true;
};

inline ObjectiveResult evaluate_objective(const TinyEncoder& enc, const DomainClassifier& cls, const TaskHead& head,
                                          const AlignmentBatch& batch, const LossWeights& w, double grl_lambda,
                                          GlobalPath path, ObjectiveTerms terms = {}) {
    if (batch.real.empty() && batch.raster.empty()) throw InvariantError("evaluate_objective: empty batch");
    if (batch.pairs > batch.real.size() || batch.pairs > batch.raster.size())
        throw InvariantError("evaluate_objective: more pairs than samples");
    if (batch.raster_targets.size() != batch.raster.size())
        throw InvariantError("evaluate_objective: one target per raster sample required");

    ObjectiveResult r;
    r.grad_encoder_task = Vector::Zero(enc.size());
    r.grad_encoder_spatial = Vector::Zero(enc.size());
    r.grad_encoder_global = Vector::Zero(enc.size());
    r.grad_classifier = Vector::Zero(cls.size());
    r.grad_classifier_own = Vector::Zero(cls.size());
    r.grad_head = Vector::Zero(head.params.size());

    const std::size_t nr = batch.real.size(), ns = batch.raster.size();
    std::vector<TinyEncoder::Cache> real_cache(nr), raster_cache(ns);
    std::vector<FeatureMap> real_f(nr), raster_f(ns);
    for (std::size_t i = 0; i < nr; ++i) real_f[i] = enc.forward(batch.real[i], &real_cache[i]);
    for (std::size_t i = 0; i < ns; ++i) raster_f[i] = enc.forward(batch.raster[i], &raster_cache[i]);

    std::vector<Matrix> d_real(nr), d_raster(ns);
    for (std::size_t i = 0; i < nr; ++i) d_real[i] = Matrix::Zero(real_f[i].locations(), real_f[i].channels());
    for (std::size_t i = 0; i < ns; ++i) d_raster[i] = Matrix::Zero(raster_f[i].locations(), raster_f[i].channels());

    auto accumulate = [&](Vector& into, const std::vector<Matrix>& d, const std::vector<TinyEncoder::Cache>& cache) {
        for (std::size_t i = 0; i < d.size(); ++i)
            if (d[i].size() > 0 && !d[i].isZero(0.0)) into += enc.backward(d[i], cache[i]);
    };

    // Task: mean squared error of the head on raster samples.
    if (ns > 0) {
        std::vector<Matrix> dt(ns);
        for (std::size_t i = 0; i < ns; ++i) {
            const Vector g = global_pool(raster_f[i]);
            const double e = head(g) - batch.raster_targets[i];
            r.task += e * e / static_cast<double>(ns);
            const double de = 2.0 * e / static_cast<double>(ns);
            if (terms.task) {
                r.grad_head.head(g.size()) += de * g;
                r.grad_head[g.size()] += de;
            }
            dt[i] = global_pool_backward(de * head.params.head(g.size()), raster_f[i].locations());
        }
        if (terms.task) accumulate(r.grad_encoder_task, dt, raster_cache);
    }

    // Spatial: paired samples, gradient into the real branch only.
    if (batch.pairs > 0) {
        std::vector<Matrix> ds(nr);
        for (std::size_t i = 0; i < nr; ++i) ds[i] = Matrix::Zero(real_f[i].locations(), real_f[i].channels());
        for (std::size_t i = 0; i < batch.pairs; ++i) {
            r.spatial += spatial_loss(real_f[i], raster_f[i]) / static_cast<double>(batch.pairs);
            SpatialGrad sg = spatial_loss_grad(real_f[i], raster_f[i]);
            ds[i] = (w.lambda_s / static_cast<double>(batch.pairs)) * sg.real;
            r.raster_spatial_grads.push_back(std::move(sg.raster));
        }
        if (terms.spatial) accumulate(r.grad_encoder_spatial, ds, real_cache);
    }

    // Global: domain classification of every pooled feature vector.
    {
        const double n = static_cast<double>(nr + ns);
        std::vector<Matrix> dg_real(nr), dg_raster(ns);
        auto domain_term = [&](const FeatureMap& f, int y, Matrix& d_out) {
            const Vector g = grl_forward(global_pool(f));
            const DomainClassifier::Grad cg = cls.bce(g, y, 1.0 / n);
            r.global += cg.loss;
            if (terms.global) {
                r.grad_classifier += w.lambda_g * cg.params;
                r.grad_classifier_own += cg.params;
            }
            const Vector upstream = w.lambda_g * cg.input;
            const Vector to_encoder = path == GlobalPath::reversed ? grl_backward(upstream, grl_lambda) : upstream;
            r.global_feature_grads.push_back(to_encoder);
            d_out = global_pool_backward(to_encoder, f.locations());
        };
        for (std::size_t i = 0; i < nr; ++i) domain_term(real_f[i], kRealLabel, dg_real[i]);
        for (std::size_t i = 0; i < ns; ++i) domain_term(raster_f[i], kRasterLabel, dg_raster[i]);
        if (terms.global) {
            accumulate(r.grad_encoder_global, dg_real, real_cache);
            accumulate(r.grad_encoder_global, dg_raster, raster_cache);
        }
    }

    r.total = total_loss(r.task, r.spatial, r.global, w);
    r.grad_encoder = r.grad_encoder_task + r.grad_encoder_spatial + r.grad_encoder_global;
    return r;
}

/// Objective value only, used by finite-difference checks.
inline double objective_value(const TinyEncoder& enc, const DomainClassifier& cls, const TaskHead& head,
                              const AlignmentBatch& batch, const LossWeights& w) {
    return evaluate_objective(enc, cls, head, batch, w, 0.0, GlobalPath::identity,
                              ObjectiveTerms{false, false, false})
        .total;
}

// ---------------------------------------------------------------------------
// Image features

/// Averages non-overlapping `patch` x `patch` blocks of the color buffer,
/// scaled to [0, 1]. Rows are locations in row-major block order.
inline Matrix patch_average(const Framebuffer& fb, int patch = 8) {
    const int bw = fb.width() / patch;
    const int bh = fb.height() / patch;
    if (bw < 1 || bh < 1) throw InvariantError("patch_average: image smaller than one patch");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(bw) * bh, 3);
    const double norm = 1.0 / (255.0 * patch * patch);
    for (int by = 0; by < bh; ++by)
        for (int bx = 0; bx < bw; ++bx) {
            const Eigen::Index row = static_cast<Eigen::Index>(by) * bw + bx;
            for (int y = by * patch; y < (by + 1) * patch; ++y)
                for (int x = bx * patch; x < (bx + 1) * patch; ++x) {
                    const Rgb c = fb.color(x, y);
                    out(row, 0) += c.r;
                    out(row, 1) += c.g;
                    out(row, 2) += c.b;
                }
            out.row(row) *= norm;
        }
    return out;
}

}  // namespace rasterdrive::align
