#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "rasterdrive/augmentation.hpp"

using namespace rasterdrive;

namespace {

Trajectory make_traj(const std::string& id, double t0, double t1, double dt,
                     const std::function<Vec3(double)>& pos) {
    Trajectory tr;
    tr.agent_id = id;
    const auto n = static_cast<int>(std::llround((t1 - t0) / dt));
    for (int k = 0; k <= n; ++k) {
        const double t = t0 + k * dt;
        const Vec3 p = pos(t), q = pos(t + 1e-3);
        tr.samples.push_back({t, SE3Pose::from_yaw(std::atan2(q.y() - p.y(), q.x() - p.x()), p)});
    }
    return tr;
}

Trajectory accelerating(const std::string& id, double t_end, double y) {
    // Stationary until t = 2, then a = 1 m/s^2 along x.
    return make_traj(id, 0.0, t_end, 0.5, [y](double t) {
        const double s = t > 2.0 ? 0.5 * (t - 2.0) * (t - 2.0) : 0.0;
        return Vec3(20.0 + s, y, 0.0);
    });
}

RigMount small_rig() {
    RigMount m;
    m.intrinsics = {48, 48, 48, 27};
    m.width = 96;
    m.height = 54;
    m.mount = camera_mount(Vec3(1.0, 0.0, 1.5));
    return m;
}

SceneLog make_log(double duration, int accelerating_agents = 2) {
    SceneLog log;
    log.log_id = "log_a";
    log.ego_id = "ego";
    log.map.push_back({{Vec3(-10, -6, 0), Vec3(400, -6, 0), Vec3(400, 6, 0), Vec3(-10, 6, 0)},
                       SemanticClass::road_surface, true});
    log.map.push_back({{Vec3(-10, 0, 0), Vec3(400, 0, 0)}, SemanticClass::lane_line, false});
    log.tracks.push_back({"ego", SemanticClass::vehicle, 4.5, 1.9, 1.6,
                          make_traj("ego", 0.0, duration, 0.5, [](double t) { return Vec3(5.0 * t, 0, 0); })});
    // Constant-velocity agent, filtered out by the ADE curation.
    log.tracks.push_back({"steady", SemanticClass::vehicle, 4.5, 1.9, 1.6,
                          make_traj("steady", 0.0, duration, 0.5, [](double t) { return Vec3(30 + 5.0 * t, 3, 0); })});
    for (int i = 0; i < accelerating_agents; ++i) {
        // Periodic speed changes keep every clip above the ADE threshold.
        const double y = -3.0 + 6.0 * i;
        log.tracks.push_back({"acc" + std::to_string(i), SemanticClass::vehicle, 4.5, 1.9, 1.6,
                              make_traj("acc" + std::to_string(i), 0.0, duration, 0.5, [y](double t) {
                                  return Vec3(10 + 4 * t + 8 * std::sin(t * 0.9), y, 0.0);
                              })});
    }
    log.rigs.push_back(small_rig());
    for (double t = 0; t <= duration + 1e-9; t += 0.5) log.frame_timestamps.push_back(t);
    return log;
}

}  // namespace

// ---------------------------------------------------------------------------
// Perturbation

TEST(Perturb, ZeroSpecIsIdentity) {
    const Trajectory t = make_traj("a", 0, 7, 0.5, [](double s) { return Vec3(s * s, std::sin(s), 0.1 * s); });
    const Trajectory p = perturb_trajectory(t, PerturbationSpec::zero());
    ASSERT_EQ(p.samples.size(), t.samples.size());
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
        EXPECT_EQ(p.samples[i].t, t.samples[i].t);
        EXPECT_EQ(p.samples[i].pose.rotation, t.samples[i].pose.rotation);
        EXPECT_EQ(p.samples[i].pose.translation, t.samples[i].pose.translation);
    }
}

TEST(Perturb, LateralOffsetOnEastboundPath) {
    const Trajectory t = make_traj("a", 0, 7, 0.5, [](double s) { return Vec3(3 * s, 0, 0); });
    PerturbationSpec spec = PerturbationSpec::zero();
    spec.lat_min = spec.lat_max = 1.0;
    const Trajectory p = perturb_trajectory(t, spec);
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
        EXPECT_NEAR(p.samples[i].pose.translation.x(), t.samples[i].pose.translation.x(), 1e-12);
        EXPECT_NEAR(p.samples[i].pose.translation.y(), 1.0, 1e-12);
        EXPECT_NEAR(p.samples[i].pose.yaw(), 0.0, 1e-12);
    }
}

TEST(Perturb, LongitudinalOffsetAndRamp) {
    const Trajectory t = make_traj("a", 0, 7, 0.5, [](double s) { return Vec3(0, 3 * s, 0); });  // northbound
    PerturbationSpec spec = PerturbationSpec::zero();
    spec.long_min = spec.long_max = 2.0;
    spec.profile = OffsetProfile::ramp;
    spec.ramp_duration = 2.0;
    const Trajectory p = perturb_trajectory(t, spec);
    EXPECT_NEAR(p.samples[0].pose.translation.y(), 0.0, 1e-12);
    EXPECT_NEAR(p.samples[2].pose.translation.y() - t.samples[2].pose.translation.y(), 1.0, 1e-12);
    EXPECT_NEAR(p.samples[10].pose.translation.y() - t.samples[10].pose.translation.y(), 2.0, 1e-12);
    for (const auto& s : p.samples) EXPECT_NEAR(s.pose.translation.x(), 0.0, 1e-12);
}

TEST(Perturb, HeadingsFollowPerturbedMotion) {
    const Trajectory t = make_traj("a", 0, 7, 0.5, [](double s) { return Vec3(3 * s, 0, 0); });
    PerturbationSpec spec;
    spec.seed = 5;
    spec.noise_sigma = 0.3;
    const Trajectory p = perturb_trajectory(t, spec);
    for (std::size_t i = 1; i + 1 < p.samples.size(); ++i) {
        const Vec3 d = p.samples[i + 1].pose.translation - p.samples[i - 1].pose.translation;
        EXPECT_NEAR(p.samples[i].pose.yaw(), std::atan2(d.y(), d.x()), 1e-9);
        EXPECT_TRUE(p.samples[i].pose.is_valid());
    }
}

TEST(Perturb, DrawStatisticsAndDeviationBound) {
    const Trajectory t = make_traj("a", 0, 7, 0.5, [](double s) { return Vec3(3 * s, 0.2 * s * s, 0); });
    PerturbationSpec spec;  // lat [-1, 1], long [-2, 2], sigma 0.1
    double lat_lo = 1e9, lat_hi = -1e9, long_lo = 1e9, long_hi = -1e9, sum2 = 0, sum = 0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        spec.seed = seed;
        const PerturbedTrajectory p = perturb(t, spec);
        lat_lo = std::min(lat_lo, p.delta_lat);
        lat_hi = std::max(lat_hi, p.delta_lat);
        long_lo = std::min(long_lo, p.delta_long);
        long_hi = std::max(long_hi, p.delta_long);
        for (std::size_t i = 0; i < t.samples.size(); ++i) {
            for (int k = 0; k < 2; ++k) {
                sum += p.noise[i][k];
                sum2 += p.noise[i][k] * p.noise[i][k];
                ++n;
            }
            const double dev = (p.trajectory.samples[i].pose.translation - t.samples[i].pose.translation).norm();
            EXPECT_LE(dev, 1.0 + 2.0 + 6.0 * spec.noise_sigma);
        }
    }
    EXPECT_GE(lat_lo, -1.0);
    EXPECT_LE(lat_hi, 1.0);
    EXPECT_GE(long_lo, -2.0);
    EXPECT_LE(long_hi, 2.0);
    EXPECT_LT(lat_lo, -0.99);
    EXPECT_GT(lat_hi, 0.99);
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    EXPECT_NEAR(sd, spec.noise_sigma, 0.05 * spec.noise_sigma);
}

TEST(Perturb, DeterministicAndErrors) {
    const Trajectory t = make_traj("a", 0, 3, 0.5, [](double s) { return Vec3(s, 0, 0); });
    PerturbationSpec spec;
    spec.seed = 42;
    const Trajectory a = perturb_trajectory(t, spec), b = perturb_trajectory(t, spec);
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        EXPECT_EQ(a.samples[i].pose.translation, b.samples[i].pose.translation);
    Trajectory still{"s", {{0, SE3Pose::identity()}, {1, SE3Pose::identity()}}};
    EXPECT_THROW(perturb_trajectory(still, spec), InvariantError);
    const Trajectory kept = perturb_trajectory(still, PerturbationSpec::zero());
    EXPECT_EQ(kept.samples[1].pose.translation, Vec3::Zero());
    Trajectory one{"o", {{0, SE3Pose::identity()}}};
    EXPECT_THROW(perturb_trajectory(one, spec), InvariantError);
    spec.lat_min = 2.0;
    EXPECT_THROW(perturb_trajectory(t, spec), InvariantError);
}

// ---------------------------------------------------------------------------
// Constant-velocity ADE and curation

TEST(Ade, ConstantVelocityIsZero) {
    const Trajectory t = make_traj("a", 0, 7, 0.5, [](double s) { return Vec3(2 * s + 1, -s, 0); });
    EXPECT_NEAR(constant_velocity_ade(t, 2.0, 5.0), 0.0, 1e-12);
}

TEST(Ade, ConstantAccelerationClosedForm) {
    const Trajectory t = accelerating("a", 7.0, 0.0);
    EXPECT_NEAR(constant_velocity_ade(t, 2.0, 5.0), 4.8125, 1e-9);
}

TEST(Ade, RigidInvariance) {
    const Trajectory t = make_traj("a", 0, 7, 0.5, [](double s) { return Vec3(s * s * 0.3, std::sin(s), 0); });
    const double base = constant_velocity_ade(t, 2.0, 5.0);
    const SE3Pose g = SE3Pose::from_yaw(1.1, Vec3(100, -40, 3));
    Trajectory moved = t;
    for (auto& s : moved.samples) s.pose = compose(g, s.pose);
    EXPECT_NEAR(constant_velocity_ade(moved, 2.0, 5.0), base, 1e-9);
}

TEST(Ade, Errors) {
    const Trajectory t = make_traj("a", 0, 7, 0.5, [](double s) { return Vec3(s, 0, 0); });
    EXPECT_THROW(constant_velocity_ade(t, 2.0, 0.0), RangeError);
    EXPECT_THROW(constant_velocity_ade(t, 0.2, 5.0), RangeError);
    EXPECT_THROW(constant_velocity_ade(t, 2.0, 6.0), RangeError);
}

TEST(Curate, KeepsExactlyAboveThreshold) {
    const ClipConfig cfg;
    const ClipSample zero = make_clip("l", make_traj("z", 0, 7, 0.5, [](double s) { return Vec3(s, 0, 0); }), 0, 0.0, cfg);
    const ClipSample acc = make_clip("l", accelerating("a", 7.0, 0.0), 0, 0.0, cfg);
    Trajectory gap = accelerating("g", 7.0, 0.0);
    gap.samples.erase(gap.samples.begin() + 9);
    const ClipSample missing = make_clip("l", gap, 0, 0.0, cfg);
    ASSERT_TRUE(zero.valid && acc.valid);
    EXPECT_FALSE(missing.valid);
    EXPECT_NEAR(*acc.ade, 4.8125, 1e-9);

    const std::vector<ClipSample> clips{zero, acc, missing};
    const auto kept = curate(clips, 0.5);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].agent_id, "a");
    EXPECT_TRUE(curate(clips, std::numeric_limits<double>::infinity()).empty());
    EXPECT_EQ(curate(clips, -1.0).size(), 2u);
}

TEST(Clip, WindowsAndFutureFrame) {
    const ClipConfig cfg;
    const auto starts = clip_starts(0.0, 21.0, cfg);
    EXPECT_EQ(starts, (std::vector<double>{0.0, 7.0, 14.0}));
    const ClipSample c = make_clip("l", make_traj("a", 0, 7, 0.5, [](double s) { return Vec3(0, 2 * s, 0); }), 0, 0.0, cfg);
    ASSERT_EQ(c.history_ts.size(), 5u);
    ASSERT_EQ(c.future_ts.size(), 10u);
    // Northbound: future points lie straight ahead on the body x axis.
    EXPECT_NEAR(c.future_local[0].x(), 1.0, 1e-9);
    EXPECT_NEAR(c.future_local[0].y(), 0.0, 1e-9);
    EXPECT_NEAR(c.future_local.back().x(), 10.0, 1e-9);
}

// ---------------------------------------------------------------------------
// Cross-agent view synthesis and dataset assembly

TEST(CrossAgent, EgoSwapIsThePlainEgoJob) {
    const SceneLog log = make_log(7.0);
    const ClipConfig clip;
    const RenderJob a = cross_agent_job(log, "ego", 0, 0.0, clip, RenderConfig{});
    EXPECT_EQ(a.provenance.kind, ProvenanceKind::ego);
    EXPECT_EQ(a.job_id, "log_a/000/ego");
    EXPECT_EQ(a.observer_id, "ego");
    const auto frames = render_job(log, a);
    ASSERT_EQ(frames.size(), 5u);
    // Plain ego pipeline: scene from the ego pose without the ego body.
    for (const auto& f : frames) {
        const SceneFrame s = scene_at(log, f.timestamp, interpolate(log.ego().trajectory, f.timestamp), log.rigs, "ego");
        EXPECT_EQ(render_frame(s, 0, RenderConfig{}), f.image);
    }
}

TEST(CrossAgent, ShiftedTrackEqualsShiftedCamera) {
    SceneLog log = make_log(7.0, 0);
    log.tracks.resize(1);
    Trajectory shifted = log.ego().trajectory;
    shifted.agent_id = "twin";
    for (auto& s : shifted.samples) s.pose.translation.y() += 3.5;
    log.tracks.push_back({"twin", SemanticClass::vehicle, 4.5, 1.9, 1.6, shifted});
    const RenderJob job = cross_agent_job(log, "twin", 0, 0.0, ClipConfig{}, RenderConfig{});
    EXPECT_EQ(job.provenance.label(), "cross_agent_twin");
    SceneLog static_log = log;
    static_log.tracks.resize(1);  // static scene: map only, ego hidden
    for (double t : job.frame_timestamps) {
        SceneFrame direct;
        direct.map = log.map;
        CameraRig rig = log.rigs[0].rig_for(SE3Pose::from_translation(Vec3(5.0 * t, 3.5, 0)));
        direct.rigs = {rig};
        const SceneFrame via_job = scene_at(static_log, t, interpolate(job.trajectory, t), job.rigs, "ego");
        EXPECT_EQ(render_frame(via_job, 0, RenderConfig{}), render_frame(direct, 0, RenderConfig{}));
    }
}

TEST(CrossAgent, OneJobPerAgentAndErrors) {
    const SceneLog log = make_log(7.0);
    std::set<std::string> ids;
    for (const auto& t : log.tracks) ids.insert(cross_agent_job(log, t.id, 0, 0.0, ClipConfig{}, RenderConfig{}).job_id);
    EXPECT_EQ(ids.size(), log.tracks.size());
    EXPECT_THROW(cross_agent_job(log, "nobody", 0, 0.0, ClipConfig{}, RenderConfig{}), RangeError);
    EXPECT_THROW(cross_agent_job(log, "ego", 1, 3.0, ClipConfig{}, RenderConfig{}), RangeError);
}

TEST(Dataset, OneClipTwoAgents) {
    DatasetConfig cfg;
    cfg.fraction_perturbed = 0.0;
    const auto entries = build_dataset({make_log(7.0)}, cfg);
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].job.job_id, "log_a/000/cross_agent_acc0");
    EXPECT_EQ(entries[1].job.job_id, "log_a/000/cross_agent_acc1");
    EXPECT_EQ(entries[2].job.job_id, "log_a/000/ego");
    EXPECT_EQ(entries[2].filter, "validity");

    cfg.fraction_perturbed = 1.0;
    const auto all = build_dataset({make_log(21.0)}, cfg);
    std::size_t ego = 0, pert = 0;
    for (const auto& e : all) {
        ego += e.job.provenance.kind == ProvenanceKind::ego;
        pert += e.job.provenance.kind == ProvenanceKind::perturbed;
    }
    EXPECT_EQ(ego, 3u);
    EXPECT_EQ(pert, 3u);
}

TEST(Dataset, SeededFractionSelectsExactlyTenOfHundred) {
    DatasetConfig cfg;
    cfg.seed = 99;
    SceneLog log = make_log(700.0, 0);
    log.tracks.resize(1);
    const auto a = build_dataset({log}, cfg);
    const auto b = build_dataset({log}, cfg);
    std::vector<std::string> pa, pb;
    for (const auto& e : a)
        if (e.job.provenance.kind == ProvenanceKind::perturbed) pa.push_back(e.job.job_id);
    for (const auto& e : b)
        if (e.job.provenance.kind == ProvenanceKind::perturbed) pb.push_back(e.job.job_id);
    EXPECT_EQ(a.size(), 110u);
    EXPECT_EQ(pa.size(), 10u);
    EXPECT_EQ(pa, pb);
    cfg.seed = 100;
    std::vector<std::string> pc;
    for (const auto& e : build_dataset({log}, cfg))
        if (e.job.provenance.kind == ProvenanceKind::perturbed) pc.push_back(e.job.job_id);
    EXPECT_EQ(pc.size(), 10u);
    EXPECT_NE(pa, pc);
}

TEST(Dataset, PerturbedJobsRecordOverlap) {
    SceneLog log = make_log(7.0, 0);
    // A parked car right next to the ego lane: a +2 m lateral shift hits it.
    log.tracks.push_back({"parked", SemanticClass::vehicle, 4.5, 1.9, 1.6,
                          make_traj("parked", 0, 7, 0.5, [](double) { return Vec3(10, 2.2, 0); })});
    PerturbationSpec spec = PerturbationSpec::zero();
    spec.lat_min = spec.lat_max = 2.0;
    const RenderJob hit = perturbed_job(log, 0, 0.0, ClipConfig{}, RenderConfig{}, spec);
    ASSERT_TRUE(hit.perturbation);
    EXPECT_TRUE(hit.perturbation->overlaps_actor);
    spec.lat_min = spec.lat_max = -2.0;
    const RenderJob miss = perturbed_job(log, 0, 0.0, ClipConfig{}, RenderConfig{}, spec);
    EXPECT_FALSE(miss.perturbation->overlaps_actor);
    EXPECT_EQ(miss.job_id, "log_a/000/perturbed");
}

TEST(Seeds, DerivedSeedsAreStable) {
    EXPECT_EQ(job_seed(7, "log", 3, 1), job_seed(7, "log", 3, 1));
    EXPECT_NE(job_seed(7, "log", 3, 1), job_seed(7, "log", 3, 0));
    EXPECT_NE(job_seed(7, "log", 3, 1), job_seed(8, "log", 3, 1));
    EXPECT_NE(job_seed(7, "log", 3, 1), job_seed(7, "loh", 3, 1));
}
