#pragma once

// A driving log: static map, agent tracks, traffic-light state timelines and
// the camera mounts of the recording vehicle. SceneFrames are reconstructed
// from it at arbitrary timestamps.

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rasterdrive/error.hpp"
#include "rasterdrive/geometry.hpp"
#include "rasterdrive/scene.hpp"

namespace rasterdrive {

struct AgentTrack {
    std::string id;
    SemanticClass cls = SemanticClass::vehicle;
    double length = 4.5;
    double width = 1.9;
    double height = 1.6;
    Trajectory trajectory;

    Cuboid cuboid_at(double t) const { return {length, width, height, interpolate(trajectory, t), cls}; }
};

struct LightTrack {
    std::string id;
    SE3Pose pose;
    /// (time, state) change points, sorted by time. The state holds until the
    /// next change point; before the first one the first state applies.
    std::vector<std::pair<double, LightState>> states;

    LightState state_at(double t) const {
        LightState s = states.front().second;
        for (const auto& [ts, st] : states) {
            if (ts > t) break;
            s = st;
        }
        return s;
    }
};

/// A camera rigidly attached to the carrier vehicle.
struct RigMount {
    std::string name = "front";
    CameraIntrinsics intrinsics;
    /// Camera pose in the carrier body frame (x forward, y left, z up).
    SE3Pose mount;
    double z_near = kDefaultZNear;
    int width = 1024;
    int height = 576;

    CameraRig rig_for(const SE3Pose& carrier) const {
        return {intrinsics, mounted_extrinsics(carrier, mount), z_near, width, height};
    }
};

struct SceneLog {
    std::string log_id;
    std::string ego_id;
    std::vector<Polyline> map;
    std::vector<AgentTrack> tracks;
    std::vector<LightTrack> lights;
    std::vector<RigMount> rigs;
    std::vector<double> frame_timestamps;

    const AgentTrack* find_track(std::string_view id) const {
        for (const auto& t : tracks)
            if (t.id == id) return &t;
        return nullptr;
    }

    const AgentTrack& ego() const {
        const AgentTrack* e = find_track(ego_id);
        if (!e) throw SchemaError("log '" + log_id + "': ego track '" + ego_id + "' not found");
        return *e;
    }

    /// Geometric and referential invariants. Ordering problems are schema
    /// errors and are reported by the loader before this runs.
    void validate() const {
        if (log_id.empty()) throw SchemaError("log id is empty");
        if (!find_track(ego_id)) throw SchemaError("log '" + log_id + "': ego track '" + ego_id + "' not found");
        for (std::size_t i = 0; i < map.size(); ++i) {
            try {
                map[i].validate();
            } catch (const InvariantError& e) {
                throw InvariantError("log '" + log_id + "' map[" + std::to_string(i) + "]: " + e.what());
            }
        }
        for (std::size_t i = 0; i < tracks.size(); ++i) {
            const auto& t = tracks[i];
            for (std::size_t j = 0; j < i; ++j)
                if (tracks[j].id == t.id) throw SchemaError("log '" + log_id + "': duplicate track id '" + t.id + "'");
            if (!(t.length > 0.0 && t.width > 0.0 && t.height > 0.0))
                throw InvariantError("track '" + t.id + "': dimensions must be positive");
            t.trajectory.validate();
        }
        for (const auto& l : lights) {
            if (l.states.empty()) throw SchemaError("light '" + l.id + "' has no states");
            if (!l.pose.is_valid(1e-6)) throw InvariantError("light '" + l.id + "': invalid pose");
        }
        if (rigs.empty()) throw SchemaError("log '" + log_id + "' has no camera rigs");
        for (const auto& r : rigs) r.rig_for(SE3Pose::identity()).validate();
    }
};

/// Scene at time t seen from cameras carried by `carrier`. Tracks that do not
/// cover t are absent; the track named `observer` is skipped.
inline SceneFrame scene_at(const SceneLog& log, double t, const SE3Pose& carrier,
                           std::span<const RigMount> mounts, std::string_view observer) {
    SceneFrame f;
    f.timestamp = t;
    f.map = log.map;
    for (const auto& track : log.tracks) {
        if (track.id == observer || !track.trajectory.covers(t)) continue;
        f.actors.push_back(track.cuboid_at(t));
    }
    for (const auto& l : log.lights) f.lights.push_back({l.pose, l.state_at(t)});
    for (const auto& m : mounts) f.rigs.push_back(m.rig_for(carrier));
    return f;
}

}  // namespace rasterdrive
