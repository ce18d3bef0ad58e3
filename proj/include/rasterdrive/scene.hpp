#pragma once

// Annotated scene primitives: map polylines, actor cuboids, traffic lights,
// trajectories and the per-instant SceneFrame consumed by the rasterizer.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rasterdrive/error.hpp"
#include "rasterdrive/geometry.hpp"

namespace rasterdrive {

enum class SemanticClass : std::uint8_t {
    road_surface,
    crosswalk,
    lane_line,
    vehicle,
    bicycle,
    pedestrian,
    traffic_cone,
    barrier,
    construction_sign,
    generic_object,
    traffic_light_red,
    traffic_light_yellow,
    traffic_light_green,
};

inline constexpr std::size_t kNumClasses = 13;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "road_surface", "crosswalk",         "lane_line",         "vehicle",
    "bicycle",      "pedestrian",        "traffic_cone",      "barrier",
    "construction_sign", "generic_object", "traffic_light_red", "traffic_light_yellow",
    "traffic_light_green",
};

inline std::string_view to_string(SemanticClass c) {
    return kClassNames[static_cast<std::size_t>(c)];
}

inline std::optional<SemanticClass> parse_class(std::string_view name) {
    for (std::size_t i = 0; i < kNumClasses; ++i)
        if (kClassNames[i] == name) return static_cast<SemanticClass>(i);
    return std::nullopt;
}

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// One color per semantic class.
struct Palette {
    std::array<Rgb, kNumClasses> colors;

    const Rgb& operator[](SemanticClass c) const { return colors[static_cast<std::size_t>(c)]; }
    Rgb& operator[](SemanticClass c) { return colors[static_cast<std::size_t>(c)]; }
    friend bool operator==(const Palette&, const Palette&) = default;
};

inline Palette default_palette() {
    return Palette{{{
        {64, 64, 64},     // road_surface: dark gray
        {255, 255, 255},  // crosswalk: white
        {255, 220, 0},    // lane_line: yellow
        {0, 90, 255},     // vehicle: blue
        {0, 220, 220},    // bicycle: cyan
        {230, 30, 30},    // pedestrian: red
        {255, 140, 0},    // traffic_cone: orange
        {220, 0, 220},    // barrier: magenta
        {140, 80, 20},    // construction_sign: brown
        {160, 160, 160},  // generic_object: gray
        {255, 0, 0},      // traffic_light_red
        {255, 255, 0},    // traffic_light_yellow
        {0, 255, 0},      // traffic_light_green
    }}};
}

struct Polyline {
    std::vector<Vec3> vertices;
    SemanticClass cls = SemanticClass::lane_line;
    /// Closed polylines bound filled areas (road surface, crosswalk).
    bool closed = false;

    void validate() const {
        if (vertices.size() < 2) throw InvariantError("polyline needs at least 2 vertices");
        if (closed && vertices.size() < 3)
            throw InvariantError("closed polyline needs at least 3 vertices");
        for (const auto& v : vertices)
            if (!is_finite(v)) throw InvariantError("polyline vertex is not finite");
    }
};

/// Oriented box. The pose origin sits at the center of the bottom face.
struct Cuboid {
    double length = 1.0;
    double width = 1.0;
    double height = 1.0;
    SE3Pose pose;
    SemanticClass cls = SemanticClass::vehicle;

    void validate() const {
        if (!(length > 0.0 && width > 0.0 && height > 0.0))
            throw InvariantError("cuboid dimensions must be positive");
        if (!pose.is_valid(1e-6)) throw InvariantError("cuboid pose is not a rigid transform");
    }
};

/// The eight corners: bottom face counter-clockwise seen from above starting
/// at front-right (+l/2, -w/2), then the top face in the same order.
inline std::array<Vec3, 8> corners(const Cuboid& box) {
    const double hl = box.length / 2.0;
    const double hw = box.width / 2.0;
    const std::array<std::array<double, 2>, 4> base = {{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
    std::array<Vec3, 8> out;
    for (std::size_t i = 0; i < 4; ++i) {
        out[i] = box.pose.apply(Vec3(base[i][0], base[i][1], 0.0));
        out[i + 4] = box.pose.apply(Vec3(base[i][0], base[i][1], box.height));
    }
    return out;
}

using Quad = std::array<Vec3, 4>;

/// Corner indices of the six faces, wound counter-clockwise seen from outside:
/// bottom, top, front (+x), left (+y), back (-x), right (-y).
inline constexpr std::array<std::array<int, 4>, 6> kFaceCorners = {{
    {0, 3, 2, 1},
    {4, 5, 6, 7},
    {0, 1, 5, 4},
    {1, 2, 6, 5},
    {2, 3, 7, 6},
    {3, 0, 4, 7},
}};

/// The twelve edges as corner index pairs.
inline constexpr std::array<std::array<int, 2>, 12> kBoxEdges = {{
    {0, 1}, {1, 2}, {2, 3}, {3, 0},
    {4, 5}, {5, 6}, {6, 7}, {7, 4},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

inline std::array<Quad, 6> cuboid_faces(const Cuboid& box) {
    const auto c = corners(box);
    std::array<Quad, 6> faces;
    for (std::size_t f = 0; f < 6; ++f)
        for (std::size_t k = 0; k < 4; ++k) faces[f][k] = c[kFaceCorners[f][k]];
    return faces;
}

enum class LightState : std::uint8_t { red, yellow, green };

inline std::string_view to_string(LightState s) {
    switch (s) {
        case LightState::red: return "red";
        case LightState::yellow: return "yellow";
        case LightState::green: return "green";
    }
    return "red";
}

inline std::optional<LightState> parse_light_state(std::string_view s) {
    if (s == "red") return LightState::red;
    if (s == "yellow") return LightState::yellow;
    if (s == "green") return LightState::green;
    return std::nullopt;
}

struct TrafficLight {
    static constexpr double kLength = 0.4;
    static constexpr double kWidth = 0.4;
    static constexpr double kHeight = 1.2;

    SE3Pose pose;
    LightState state = LightState::red;
};

inline Cuboid light_as_cuboid(const TrafficLight& light) {
    SemanticClass cls = SemanticClass::traffic_light_red;
    if (light.state == LightState::yellow) cls = SemanticClass::traffic_light_yellow;
    if (light.state == LightState::green) cls = SemanticClass::traffic_light_green;
    return {TrafficLight::kLength, TrafficLight::kWidth, TrafficLight::kHeight, light.pose, cls};
}

struct TimedPose {
    double t = 0.0;
    SE3Pose pose;
};

struct Trajectory {
    std::string agent_id;
    std::vector<TimedPose> samples;

    double start_time() const { return samples.front().t; }
    double end_time() const { return samples.back().t; }

    bool covers(double t) const {
        return !samples.empty() && t >= samples.front().t && t <= samples.back().t;
    }

    /// Index of a sample whose timestamp is within `tol` of t.
    std::optional<std::size_t> find_sample(double t, double tol = 1e-6) const {
        auto it = std::lower_bound(samples.begin(), samples.end(), t - tol,
                                   [](const TimedPose& s, double x) { return s.t < x; });
        if (it != samples.end() && std::abs(it->t - t) <= tol)
            return static_cast<std::size_t>(it - samples.begin());
        return std::nullopt;
    }

    void validate() const {
        if (samples.empty()) throw InvariantError("trajectory '" + agent_id + "' has no samples");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (!std::isfinite(samples[i].t))
                throw InvariantError("trajectory '" + agent_id + "' has a non-finite timestamp");
            if (i > 0 && !(samples[i].t > samples[i - 1].t))
                throw InvariantError("trajectory '" + agent_id +
                                     "' timestamps are not strictly increasing");
            if (!samples[i].pose.is_valid(1e-6))
                throw InvariantError("trajectory '" + agent_id + "' has an invalid pose");
        }
    }
};

/// Pose at time t. Exact at sample timestamps; geodesic in between.
inline SE3Pose interpolate(const Trajectory& traj, double t) {
    if (traj.samples.empty()) throw RangeError("interpolate: empty trajectory");
    if (!(t >= traj.start_time() && t <= traj.end_time()))
        throw RangeError("interpolate: t=" + std::to_string(t) + " outside trajectory '" +
                         traj.agent_id + "'");
    auto it = std::lower_bound(traj.samples.begin(), traj.samples.end(), t,
                               [](const TimedPose& s, double x) { return s.t < x; });
    if (it->t == t) return it->pose;
    const TimedPose& hi = *it;
    const TimedPose& lo = *(it - 1);
    return interpolate_pose(lo.pose, hi.pose, (t - lo.t) / (hi.t - lo.t));
}

/// Everything visible at one instant.
struct SceneFrame {
    double timestamp = 0.0;
    std::vector<Polyline> map;
    std::vector<Cuboid> actors;
    std::vector<TrafficLight> lights;
    std::vector<CameraRig> rigs;

    void validate() const {
        for (const auto& p : map) p.validate();
        for (const auto& a : actors) a.validate();
        for (const auto& l : lights)
            if (!l.pose.is_valid(1e-6)) throw InvariantError("traffic light pose is invalid");
        for (const auto& r : rigs) r.validate();
    }
};

}  // namespace rasterdrive
