#pragma once

// Dataset augmentation: recovery-oriented perturbation of the ego path,
// cross-agent view synthesis, constant-velocity ADE curation and the batch
// job builder that ties them together.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rasterdrive/error.hpp"
#include "rasterdrive/geometry.hpp"
#include "rasterdrive/rasterizer.hpp"
#include "rasterdrive/rng.hpp"
#include "rasterdrive/scene.hpp"
#include "rasterdrive/scene_log.hpp"

namespace rasterdrive {

// ---------------------------------------------------------------------------
// Recovery-oriented perturbation

enum class OffsetProfile : std::uint8_t {
    /// One drawn offset applied over the whole clip.
    constant_offset,
    /// Offset ramps linearly from 0 at the first sample to full strength after
    /// `ramp_duration` seconds.
    ramp,
};

struct PerturbationSpec {
    double lat_min = -1.0;
    double lat_max = 1.0;
    double long_min = -2.0;
    double long_max = 2.0;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
    OffsetProfile profile = OffsetProfile::constant_offset;
    double ramp_duration = 2.0;

    void validate() const {
        if (!(lat_min <= lat_max) || !(long_min <= long_max))
            throw InvariantError("perturbation ranges must satisfy min <= max");
        if (!(noise_sigma >= 0.0)) throw InvariantError("perturbation noise_sigma must be >= 0");
        if (profile == OffsetProfile::ramp && !(ramp_duration > 0.0))
            throw InvariantError("perturbation ramp_duration must be positive");
    }

    static PerturbationSpec zero() { return {0.0, 0.0, 0.0, 0.0, 0.0, 0, OffsetProfile::constant_offset, 2.0}; }
};

struct PerturbedTrajectory {
    Trajectory trajectory;
    double delta_lat = 0.0;
    double delta_long = 0.0;
    /// Per-sample ground-plane noise that was added.
    std::vector<Vec3> noise;
};

namespace detail {

// Ground-plane direction of motion at sample i: central difference, widening
// the stencil over stationary stretches.
inline Vec3 motion_direction(const std::vector<Vec3>& pos, std::size_t i) {
    const std::size_t n = pos.size();
    for (std::size_t r = 1; r < n; ++r) {
        const std::size_t lo = i >= r ? i - r : 0;
        const std::size_t hi = std::min(n - 1, i + r);
        Vec3 d = pos[hi] - pos[lo];
        d.z() = 0.0;
        const double len = d.norm();
        if (len > 1e-9) return d / len;
    }
    throw InvariantError("perturb_trajectory: degenerate trajectory, heading undefined");
}

}  // namespace detail

/// tau~(t) = tau*(t) + delta_lat(t) + delta_long(t) + eps_t with the offsets
/// drawn once from their ranges and eps_t i.i.d. Gaussian in the ground
/// plane. Lateral is to the left of the direction of motion. Headings are
/// re-derived from the perturbed positions.
inline PerturbedTrajectory perturb(const Trajectory& traj, const PerturbationSpec& spec) {
    spec.validate();
    if (traj.samples.size() < 2)
        throw InvariantError("perturb_trajectory: need at least 2 samples to define a heading");

    Rng rng(spec.seed);
    PerturbedTrajectory out;
    out.delta_lat = rng.uniform(spec.lat_min, spec.lat_max);
    out.delta_long = rng.uniform(spec.long_min, spec.long_max);

    const std::size_t n = traj.samples.size();
    if (out.delta_lat == 0.0 && out.delta_long == 0.0 && spec.noise_sigma == 0.0) {
        // Nothing moves, so no heading is needed; stationary tracks pass through.
        out.trajectory = traj;
        out.noise.assign(n, Vec3::Zero());
        return out;
    }
    std::vector<Vec3> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = traj.samples[i].pose.translation;

    std::vector<Vec3> moved(n);
    out.noise.assign(n, Vec3::Zero());
    const double t0 = traj.samples.front().t;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 fwd = detail::motion_direction(pos, i);
        const Vec3 left(-fwd.y(), fwd.x(), 0.0);
        double s = 1.0;
        if (spec.profile == OffsetProfile::ramp)
            s = std::clamp((traj.samples[i].t - t0) / spec.ramp_duration, 0.0, 1.0);
        if (spec.noise_sigma > 0.0) {
            const double ex = spec.noise_sigma * rng.normal();
            const double ey = spec.noise_sigma * rng.normal();
            out.noise[i] = Vec3(ex, ey, 0.0);
        }
        moved[i] = pos[i] + s * (out.delta_lat * left + out.delta_long * fwd) + out.noise[i];
    }

    out.trajectory.agent_id = traj.agent_id;
    out.trajectory.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 old_dir = detail::motion_direction(pos, i);
        const Vec3 new_dir = detail::motion_direction(moved, i);
        const double dyaw = std::atan2(new_dir.y(), new_dir.x()) - std::atan2(old_dir.y(), old_dir.x());
        SE3Pose p = traj.samples[i].pose;
        if (dyaw != 0.0) p.rotation = Eigen::AngleAxisd(dyaw, Vec3::UnitZ()).toRotationMatrix() * p.rotation;
        p.translation = moved[i];
        out.trajectory.samples[i] = {traj.samples[i].t, p};
    }
    return out;
}

inline Trajectory perturb_trajectory(const Trajectory& traj, const PerturbationSpec& spec) {
    return perturb(traj, spec).trajectory;
}

// ---------------------------------------------------------------------------
// Constant-velocity baseline and curation

/// Position at t, using the stored sample when t hits a timestamp (within
/// 1e-6 s) and interpolating otherwise.
inline Vec3 position_at(const Trajectory& traj, double t) {
    if (auto i = traj.find_sample(t)) return traj.samples[*i].pose.translation;
    return interpolate(traj, t).translation;
}

/// ADE of straight-line extrapolation from split_t. Velocity is the finite
/// difference over the last history step of length dt; the future is sampled
/// every dt up to split_t + horizon.
inline double constant_velocity_ade(const Trajectory& traj, double split_t, double horizon,
                                    double dt = 0.5) {
    if (!(horizon > 0.0)) throw RangeError("constant_velocity_ade: empty future window");
    if (!(dt > 0.0)) throw RangeError("constant_velocity_ade: dt must be positive");
    constexpr double tol = 1e-6;
    if (traj.samples.empty() || split_t - dt < traj.start_time() - tol)
        throw RangeError("constant_velocity_ade: insufficient history to estimate velocity");
    const auto steps = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
    if (steps == 0) throw RangeError("constant_velocity_ade: empty future window");
    if (split_t + steps * dt > traj.end_time() + tol)
        throw RangeError("constant_velocity_ade: trajectory does not cover the future window");

    auto clamp_t = [&](double t) { return std::clamp(t, traj.start_time(), traj.end_time()); };
    const Vec3 p_now = position_at(traj, clamp_t(split_t));
    const Vec3 velocity = (p_now - position_at(traj, clamp_t(split_t - dt))) / dt;
    double total = 0.0;
    for (std::size_t k = 1; k <= steps; ++k) {
        const double tau = static_cast<double>(k) * dt;
        const Vec3 predicted = p_now + velocity * tau;
        total += (predicted - position_at(traj, clamp_t(split_t + tau))).norm();
    }
    return total / static_cast<double>(steps);
}

struct ClipConfig {
    double history = 2.0;
    double future = 5.0;
    double dt = 0.5;

    double length() const { return history + future; }
    std::size_t history_steps() const { return static_cast<std::size_t>(std::llround(history / dt)); }
    std::size_t future_steps() const { return static_cast<std::size_t>(std::llround(future / dt)); }

    void validate() const {
        if (!(dt > 0.0) || !(history >= dt) || !(future > 0.0))
            throw InvariantError("clip config needs dt > 0, history >= dt, future > 0");
    }
};

/// One history/future window of one agent.
struct ClipSample {
    std::string log_id;
    std::string agent_id;
    std::size_t clip_index = 0;
    double start_t = 0.0;
    double split_t = 0.0;
    std::vector<double> history_ts;
    std::vector<double> future_ts;
    /// Future positions in the agent's body frame at split_t.
    std::vector<Vec3> future_local;
    std::optional<double> ade;
    bool valid = false;
    std::string invalid_reason;
};

/// Start times of consecutive non-overlapping clip windows inside [t0, t1].
inline std::vector<double> clip_starts(double t0, double t1, const ClipConfig& cfg) {
    std::vector<double> starts;
    for (std::size_t k = 0;; ++k) {
        const double s = t0 + static_cast<double>(k) * cfg.length();
        if (s + cfg.length() > t1 + 1e-6) break;
        starts.push_back(s);
    }
    return starts;
}

/// Builds the clip of `traj` starting at `start`. A clip is valid when every
/// dt-grid timestamp of the window has a recorded sample with a finite pose.
inline ClipSample make_clip(const std::string& log_id, const Trajectory& traj, std::size_t clip_index,
                            double start, const ClipConfig& cfg) {
    ClipSample c;
    c.log_id = log_id;
    c.agent_id = traj.agent_id;
    c.clip_index = clip_index;
    c.start_t = start;
    c.split_t = start + static_cast<double>(cfg.history_steps()) * cfg.dt;
    for (std::size_t k = 0; k <= cfg.history_steps(); ++k) c.history_ts.push_back(start + k * cfg.dt);
    for (std::size_t k = 1; k <= cfg.future_steps(); ++k) c.future_ts.push_back(c.split_t + k * cfg.dt);

    c.valid = true;
    auto check = [&](double t) {
        if (!c.valid) return;
        auto i = traj.find_sample(t);
        if (!i) {
            c.valid = false;
            c.invalid_reason = "missing sample at t=" + std::to_string(t);
        } else if (!traj.samples[*i].pose.is_valid(1e-6)) {
            c.valid = false;
            c.invalid_reason = "non-finite or invalid pose at t=" + std::to_string(t);
        }
    };
    for (double t : c.history_ts) check(t);
    for (double t : c.future_ts) check(t);
    if (!c.valid) return c;

    const SE3Pose to_local = invert(traj.samples[*traj.find_sample(c.split_t)].pose);
    for (double t : c.future_ts) c.future_local.push_back(to_local.apply(position_at(traj, t)));
    c.ade = constant_velocity_ade(traj, c.split_t, cfg.future, cfg.dt);
    return c;
}

/// Keeps valid clips whose constant-velocity ADE exceeds `threshold`.
inline std::vector<ClipSample> curate(const std::vector<ClipSample>& clips, double threshold = 0.5) {
    std::vector<ClipSample> kept;
    for (const auto& c : clips)
        if (c.valid && c.ade && std::isfinite(*c.ade) && *c.ade > threshold) kept.push_back(c);
    return kept;
}

// ---------------------------------------------------------------------------
// Render jobs

enum class ProvenanceKind : std::uint8_t { ego, perturbed, cross_agent };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::ego;
    std::string agent_id;

    /// Directory label: "ego", "perturbed" or "cross_agent_<id>".
    std::string label() const {
        switch (kind) {
            case ProvenanceKind::ego: return "ego";
            case ProvenanceKind::perturbed: return "perturbed";
            case ProvenanceKind::cross_agent: return "cross_agent_" + agent_id;
        }
        return "ego";
    }
    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct PerturbationRecord {
    PerturbationSpec spec;
    double delta_lat = 0.0;
    double delta_long = 0.0;
    /// The perturbed footprint intersects another actor at a rendered frame.
    bool overlaps_actor = false;
};

struct RenderJob {
    std::string job_id;
    std::string source_log;
    std::size_t clip_index = 0;
    /// Path that carries the cameras.
    Trajectory trajectory;
    /// Track excluded from rendering (the observer's own body).
    std::string observer_id;
    std::vector<RigMount> rigs;
    std::vector<double> frame_timestamps;
    RenderConfig cfg;
    Provenance provenance;
    std::uint64_t seed = 0;
    std::optional<PerturbationRecord> perturbation;
};

namespace detail {

inline Trajectory slice(const Trajectory& traj, double t0, double t1) {
    Trajectory out;
    out.agent_id = traj.agent_id;
    for (const auto& s : traj.samples)
        if (s.t >= t0 - 1e-6 && s.t <= t1 + 1e-6) out.samples.push_back(s);
    return out;
}

inline std::string pad3(std::size_t i) {
    std::string s = std::to_string(i);
    return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

}  // namespace detail

/// Job that carries the log's camera mounts along `agent_id`'s track over the
/// clip window starting at `start`. Using the ego id yields the plain ego job.
inline RenderJob cross_agent_job(const SceneLog& log, const std::string& agent_id, std::size_t clip_index,
                                 double start, const ClipConfig& clip_cfg, const RenderConfig& cfg,
                                 bool draw_observer = false) {
    const AgentTrack* track = log.find_track(agent_id);
    if (!track) throw RangeError("cross_agent_job: no track '" + agent_id + "' in log '" + log.log_id + "'");
    const double end = start + clip_cfg.length();
    if (!track->trajectory.covers(start) || !track->trajectory.covers(end))
        throw RangeError("cross_agent_job: track '" + agent_id + "' does not span the clip window");

    RenderJob job;
    job.source_log = log.log_id;
    job.clip_index = clip_index;
    job.trajectory = detail::slice(track->trajectory, start, end);
    job.observer_id = draw_observer ? std::string() : agent_id;
    job.rigs = log.rigs;
    for (std::size_t k = 0; k <= clip_cfg.history_steps(); ++k) job.frame_timestamps.push_back(start + k * clip_cfg.dt);
    job.cfg = cfg;
    job.provenance = agent_id == log.ego_id ? Provenance{ProvenanceKind::ego, agent_id}
                                            : Provenance{ProvenanceKind::cross_agent, agent_id};
    job.job_id = log.log_id + "/" + detail::pad3(clip_index) + "/" + job.provenance.label();
    return job;
}

namespace detail {

// Separating-axis overlap test of two ground-plane footprints.
inline bool footprints_overlap(const Cuboid& a, const Cuboid& b) {
    auto footprint = [](const Cuboid& c) {
        auto k = corners(c);
        return std::array<Vec3, 4>{k[0], k[1], k[2], k[3]};
    };
    const auto pa = footprint(a), pb = footprint(b);
    auto separated = [](const std::array<Vec3, 4>& p, const std::array<Vec3, 4>& q) {
        for (std::size_t i = 0; i < 4; ++i) {
            const Vec3 e = p[(i + 1) % 4] - p[i];
            const double nx = -e.y(), ny = e.x();
            double pmin = 1e300, pmax = -1e300, qmin = 1e300, qmax = -1e300;
            for (const auto& v : p) {
                const double d = nx * v.x() + ny * v.y();
                pmin = std::min(pmin, d);
                pmax = std::max(pmax, d);
            }
            for (const auto& v : q) {
                const double d = nx * v.x() + ny * v.y();
                qmin = std::min(qmin, d);
                qmax = std::max(qmax, d);
            }
            if (pmax < qmin || qmax < pmin) return true;
        }
        return false;
    };
    return !separated(pa, pb) && !separated(pb, pa);
}

}  // namespace detail

/// Ego job whose carrier path is the perturbed ego trajectory.
inline RenderJob perturbed_job(const SceneLog& log, std::size_t clip_index, double start,
                               const ClipConfig& clip_cfg, const RenderConfig& cfg,
                               const PerturbationSpec& spec, bool draw_observer = false) {
    RenderJob job = cross_agent_job(log, log.ego_id, clip_index, start, clip_cfg, cfg, draw_observer);
    const PerturbedTrajectory p = perturb(job.trajectory, spec);
    job.trajectory = p.trajectory;
    job.provenance = {ProvenanceKind::perturbed, log.ego_id};
    job.job_id = log.log_id + "/" + detail::pad3(clip_index) + "/" + job.provenance.label();
    job.seed = spec.seed;

    PerturbationRecord rec{spec, p.delta_lat, p.delta_long, false};
    const AgentTrack& ego = log.ego();
    for (double t : job.frame_timestamps) {
        const Cuboid self{ego.length, ego.width, ego.height, interpolate(job.trajectory, t), ego.cls};
        for (const auto& other : log.tracks) {
            if (other.id == ego.id || !other.trajectory.covers(t)) continue;
            if (detail::footprints_overlap(self, other.cuboid_at(t))) rec.overlaps_actor = true;
        }
    }
    job.perturbation = rec;
    return job;
}

struct RenderedFrame {
    double timestamp = 0.0;
    std::string rig_name;
    Framebuffer image;
};

/// SceneFrame of `job` at time t: the log scene with cameras carried by the
/// job's trajectory.
inline SceneFrame job_frame(const SceneLog& log, const RenderJob& job, double t) {
    return scene_at(log, t, interpolate(job.trajectory, t), job.rigs, job.observer_id);
}

inline std::vector<RenderedFrame> render_job(const SceneLog& log, const RenderJob& job) {
    std::vector<RenderedFrame> out;
    for (double t : job.frame_timestamps) {
        const SceneFrame frame = job_frame(log, job, t);
        for (std::size_t r = 0; r < frame.rigs.size(); ++r)
            out.push_back({t, job.rigs[r].name, render_frame(frame, r, job.cfg)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset assembly

struct DatasetConfig {
    ClipConfig clip;
    RenderConfig render;
    /// Template; ranges and profile are used, the seed is replaced per job.
    PerturbationSpec perturbation;
    double fraction_perturbed = 0.10;
    double ade_threshold = 0.5;
    std::uint64_t seed = 0;
    bool draw_observer = false;
};

struct DatasetEntry {
    ClipSample clip;
    RenderJob job;
    /// "validity" for ego clips, "cv_ade>threshold" for other agents.
    std::string filter;
};

/// Seed slot of a job within its clip: ego 0, perturbed 1, cross-agent 2 + track index.
inline std::uint64_t job_seed(std::uint64_t root, const std::string& log_id, std::size_t clip_index,
                              std::size_t slot) {
    return derive_seed(root, log_id, static_cast<std::uint64_t>(clip_index) * 4096u + slot);
}

/// Ego jobs for every valid ego clip, perturbed twins for a seeded random
/// round(fraction * n) subset of them, and cross-agent jobs for every other
/// track whose clip is valid and passes the constant-velocity ADE filter.
/// Output is sorted by job id.
inline std::vector<DatasetEntry> build_dataset(const std::vector<SceneLog>& logs, const DatasetConfig& cfg) {
    cfg.clip.validate();
    cfg.render.validate();
    if (!(cfg.fraction_perturbed >= 0.0 && cfg.fraction_perturbed <= 1.0))
        throw InvariantError("fraction_perturbed must lie in [0, 1]");

    std::vector<DatasetEntry> entries;
    std::vector<std::size_t> ego_entries;

    for (const auto& log : logs) {
        const AgentTrack& ego = log.ego();
        const auto starts = clip_starts(ego.trajectory.start_time(), ego.trajectory.end_time(), cfg.clip);
        for (std::size_t ci = 0; ci < starts.size(); ++ci) {
            const double start = starts[ci];
            ClipSample ego_clip = make_clip(log.log_id, ego.trajectory, ci, start, cfg.clip);
            if (ego_clip.valid) {
                RenderJob job = cross_agent_job(log, ego.id, ci, start, cfg.clip, cfg.render, cfg.draw_observer);
                job.seed = job_seed(cfg.seed, log.log_id, ci, 0);
                ego_entries.push_back(entries.size());
                entries.push_back({ego_clip, std::move(job), "validity"});
            }
            for (std::size_t ti = 0; ti < log.tracks.size(); ++ti) {
                const AgentTrack& track = log.tracks[ti];
                if (track.id == ego.id) continue;
                if (!track.trajectory.covers(start) || !track.trajectory.covers(start + cfg.clip.length())) continue;
                ClipSample clip = make_clip(log.log_id, track.trajectory, ci, start, cfg.clip);
                if (curate({clip}, cfg.ade_threshold).empty()) continue;
                RenderJob job = cross_agent_job(log, track.id, ci, start, cfg.clip, cfg.render, cfg.draw_observer);
                job.seed = job_seed(cfg.seed, log.log_id, ci, 2 + ti);
                entries.push_back({clip, std::move(job), "cv_ade>" + std::to_string(cfg.ade_threshold)});
            }
        }
    }

    // Seeded selection of exactly round(fraction * n) ego clips.
    const std::size_t n = ego_entries.size();
    const auto k = static_cast<std::size_t>(std::llround(cfg.fraction_perturbed * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng pick(splitmix64(cfg.seed ^ 0x5045525455524252ull));
    for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + pick.below(n - i)]);
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());

    for (std::size_t c : chosen) {
        const DatasetEntry& base = entries[ego_entries[c]];
        const SceneLog* log = nullptr;
        for (const auto& l : logs)
            if (l.log_id == base.job.source_log) log = &l;
        PerturbationSpec spec = cfg.perturbation;
        spec.seed = job_seed(cfg.seed, log->log_id, base.clip.clip_index, 1);
        RenderJob job = perturbed_job(*log, base.clip.clip_index, base.clip.start_t, cfg.clip, cfg.render, spec,
                                      cfg.draw_observer);
        entries.push_back({base.clip, std::move(job), "validity"});
    }

    std::sort(entries.begin(), entries.end(),
              [](const DatasetEntry& a, const DatasetEntry& b) { return a.job.job_id < b.job.job_id; });
    return entries;
}

}  // namespace rasterdrive
