#pragma once

// Desk-scale raster-to-real alignment experiment.
//
// Scenes with a single vehicle ahead are rendered twice: a "raster" view with
// the default palette, black background and depth fade, and a stand-in
// "real" view with a different palette, sky/ground background, no fade and
// pixel noise. The task is regressing 10 / distance from pooled features on
// raster samples only. A baseline run trains the task alone; the aligned run
// adds the spatial loss on pairs and the reversed domain loss.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rasterdrive/alignment.hpp"
#include "rasterdrive/rasterizer.hpp"
#include "rasterdrive/rng.hpp"
#include "rasterdrive/scene.hpp"

namespace rasterdrive::align {

struct DemoConfig {
    std::uint64_t seed = 0;
    int steps = 600;
    double learning_rate = 0.2;
    double classifier_learning_rate = 0.5;
    /// Desk-scale weights; the full-scale defaults are LossWeights{}.
    LossWeights weights{1.0, 1.0};
    /// GRL on (aligned run) or off (baseline, which also zeroes the weights).
    bool adversarial = true;
    AnnealState anneal{};
    int train_pairs = 64;
    int heldout_pairs = 64;
    int image_width = 64;
    int image_height = 32;
    int patch = 8;
    int hidden = 16;
    int features = 8;
    int classifier_hidden = 8;
    double real_noise = 8.0;

    static DemoConfig baseline(std::uint64_t seed) {
        DemoConfig c;
        c.seed = seed;
        c.weights = {0.0, 0.0};
        c.adversarial = false;
        return c;
    }
};

struct StepRecord {
    int step = 0;
    double task = 0.0;
    double spatial = 0.0;
    double global = 0.0;
    double total = 0.0;
    double lambda = 0.0;
    double domain_accuracy = 0.0;
};

struct DemoReport {
    DemoConfig config;
    std::vector<StepRecord> trace;
    double heldout_domain_accuracy = 0.0;
    /// Mean squared error of a ridge probe fit on raster features.
    double probe_error_real = 0.0;
    double probe_error_raster = 0.0;
};

struct DemoSample {
    Matrix real;
    Matrix raster;
    double target = 0.0;
};

inline Palette real_palette() {
    Palette p = default_palette();
    p[SemanticClass::road_surface] = {118, 112, 104};
    p[SemanticClass::lane_line] = {235, 235, 225};
    p[SemanticClass::vehicle] = {182, 40, 48};
    return p;
}

/// Renders `count` paired samples. Deterministic in `seed`.
inline std::vector<DemoSample> make_demo_samples(std::uint64_t seed, int count, const DemoConfig& cfg) {
    Rng rng(seed);
    CameraRig rig;
    rig.intrinsics = {cfg.image_width * 0.5, cfg.image_width * 0.5, cfg.image_width * 0.5, cfg.image_height * 0.5};
    rig.width = cfg.image_width;
    rig.height = cfg.image_height;
    rig.world_to_camera = mounted_extrinsics(SE3Pose::identity(), camera_mount(Vec3(0.0, 0.0, 1.6)));

    RenderConfig raster_cfg;
    RenderConfig real_cfg;
    real_cfg.palette = real_palette();
    real_cfg.background = Background::sky_ground;
    real_cfg.depth_decay = false;

    Polyline road{{Vec3(0.0, -6.0, 0.0), Vec3(200.0, -6.0, 0.0), Vec3(200.0, 6.0, 0.0), Vec3(0.0, 6.0, 0.0)},
                  SemanticClass::road_surface, true};

    std::vector<DemoSample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double distance = rng.uniform(6.0, 30.0);
        const double lateral = rng.uniform(-2.5, 2.5);
        const double yaw = rng.uniform(-0.3, 0.3);
        SceneFrame frame;
        frame.map = {road};
        frame.actors = {Cuboid{4.5, 1.9, 1.6, SE3Pose::from_yaw(yaw, Vec3(distance, lateral, 0.0)),
                               SemanticClass::vehicle}};
        frame.rigs = {rig};

        Framebuffer raster = render_frame(frame, 0, raster_cfg);
        Framebuffer real = render_frame(frame, 0, real_cfg);
        for (auto& b : real.color_bytes()) {
            const double noisy = b + cfg.real_noise * (2.0 * rng.uniform() - 1.0);
            b = static_cast<std::uint8_t>(std::clamp(std::round(noisy), 0.0, 255.0));
        }
        out.push_back({patch_average(real, cfg.patch), patch_average(raster, cfg.patch), 10.0 / distance});
    }
    return out;
}

inline double domain_accuracy(const TinyEncoder& enc, const DomainClassifier& cls, const std::vector<Matrix>& real,
                              const std::vector<Matrix>& raster) {
    std::size_t correct = 0;
    for (const auto& x : real) correct += cls(global_pool(enc.forward(x))) > 0.5 ? 1 : 0;
    for (const auto& x : raster) correct += cls(global_pool(enc.forward(x))) <= 0.5 ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(real.size() + raster.size());
}

namespace detail {

inline Matrix pooled_design(const TinyEncoder& enc, const std::vector<Matrix>& xs) {
    Matrix a(static_cast<Eigen::Index>(xs.size()), enc.out() + 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        a.row(static_cast<Eigen::Index>(i)).head(enc.out()) = global_pool(enc.forward(xs[i])).transpose();
        a(static_cast<Eigen::Index>(i), enc.out()) = 1.0;
    }
    return a;
}

}  // namespace detail

/// Ridge-regression probe fit on `fit_x`, evaluated as mean squared error on
/// `eval_x`.
inline double probe_error(const TinyEncoder& enc, const std::vector<Matrix>& fit_x, const std::vector<double>& fit_y,
                          const std::vector<Matrix>& eval_x, const std::vector<double>& eval_y,
                          double ridge = 1e-3) {
    const Matrix a = detail::pooled_design(enc, fit_x);
    const Vector y = Eigen::Map<const Vector>(fit_y.data(), static_cast<Eigen::Index>(fit_y.size()));
    Matrix normal = a.transpose() * a;
    normal.diagonal().array() += ridge;
    const Vector w = normal.ldlt().solve(a.transpose() * y);
    const Vector pred = detail::pooled_design(enc, eval_x) * w;
    const Vector truth = Eigen::Map<const Vector>(eval_y.data(), static_cast<Eigen::Index>(eval_y.size()));
    return (pred - truth).squaredNorm() / static_cast<double>(eval_y.size());
}

/// Trains encoder, task head and domain classifier with plain gradient
/// descent. The classifier always descends its own cross-entropy so the
/// baseline still measures how separable the domains are.
inline DemoReport align_demo(const DemoConfig& cfg) {
    if (cfg.train_pairs < 1 || cfg.heldout_pairs < 1 || cfg.steps < 1)
        throw InvariantError("align_demo: empty inputs");

    const auto train = make_demo_samples(splitmix64(cfg.seed ^ 0x7472616Eull), cfg.train_pairs, cfg);
    const auto held = make_demo_samples(splitmix64(cfg.seed ^ 0x68656C64ull), cfg.heldout_pairs, cfg);

    AlignmentBatch batch;
    batch.pairs = train.size();
    for (const auto& s : train) {
        batch.real.push_back(s.real);
        batch.raster.push_back(s.raster);
        batch.raster_targets.push_back(s.target);
    }

    Rng init(splitmix64(cfg.seed ^ 0x696E6974ull));
    TinyEncoder enc = TinyEncoder::random(init, cfg.hidden, cfg.features);
    DomainClassifier cls = DomainClassifier::random(init, cfg.features, cfg.classifier_hidden);
    TaskHead head(cfg.features);

    const LossWeights weights = cfg.adversarial ? cfg.weights : LossWeights{0.0, 0.0};

    DemoReport report;
    report.config = cfg;
    for (int step = 0; step < cfg.steps; ++step) {
        AnnealState a = cfg.anneal;
        a.progress = static_cast<double>(step) / static_cast<double>(cfg.steps);
        const double lambda = cfg.adversarial ? anneal_lambda(a) : 0.0;
        const ObjectiveResult r = evaluate_objective(enc, cls, head, batch, weights, lambda, GlobalPath::reversed);

        report.trace.push_back({step, r.task, r.spatial, r.global, r.total, lambda,
                                domain_accuracy(enc, cls, batch.real, batch.raster)});

        enc.params() -= cfg.learning_rate * r.grad_encoder;
        head.params -= cfg.learning_rate * r.grad_head;
        cls.params() -= cfg.classifier_learning_rate * r.grad_classifier_own;
    }

    std::vector<Matrix> held_real, held_raster;
    std::vector<double> held_y;
    for (const auto& s : held) {
        held_real.push_back(s.real);
        held_raster.push_back(s.raster);
        held_y.push_back(s.target);
    }
    report.heldout_domain_accuracy = domain_accuracy(enc, cls, held_real, held_raster);
    report.probe_error_real = probe_error(enc, batch.raster, batch.raster_targets, held_real, held_y);
    report.probe_error_raster = probe_error(enc, batch.raster, batch.raster_targets, held_raster, held_y);
    return report;
}

}  // namespace rasterdrive::align
