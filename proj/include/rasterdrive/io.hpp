#pragma once

// JSON encodings of scene logs, configuration, manifests and reports.
// Saved documents are canonical: keys sorted, rotations written as full 3x3
// matrices, numbers in shortest round-trip form.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rasterdrive/align_demo.hpp"
#include "rasterdrive/augmentation.hpp"
#include "rasterdrive/error.hpp"
#include "rasterdrive/rasterizer.hpp"
#include "rasterdrive/scene_log.hpp"

namespace rasterdrive::io {

using json = nlohmann::json;

namespace detail {

/// Config objects reject keys they do not know, so typos fail loudly.
inline void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
    if (!obj.is_object()) throw SchemaError(path + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw SchemaError(path + "/" + key + ": unknown key");
    }
}

inline const json& field(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw SchemaError(path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + ": missing field '" + key + "'");
    return *it;
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError(path + ": expected a number");
    return j.get<double>();
}

inline double number(const json& obj, const char* key, const std::string& path) {
    return number(field(obj, key, path), path + "/" + key);
}

inline double number_or(const json& obj, const char* key, double fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    return number(obj.at(key), path + "/" + key);
}

inline std::string string(const json& obj, const char* key, const std::string& path) {
    const json& j = field(obj, key, path);
    if (!j.is_string()) throw SchemaError(path + "/" + key + ": expected a string");
    return j.get<std::string>();
}

inline bool boolean_or(const json& obj, const char* key, bool fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_boolean()) throw SchemaError(path + "/" + key + ": expected a boolean");
    return obj.at(key).get<bool>();
}

inline int integer(const json& obj, const char* key, const std::string& path) {
    const json& j = field(obj, key, path);
    if (!j.is_number_integer()) throw SchemaError(path + "/" + key + ": expected an integer");
    return j.get<int>();
}

inline const json& array(const json& obj, const char* key, const std::string& path) {
    const json& j = field(obj, key, path);
    if (!j.is_array()) throw SchemaError(path + "/" + key + ": expected an array");
    return j;
}

inline Vec3 vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) throw SchemaError(path + ": expected [x, y, z]");
    return {number(j[0], path + "/0"), number(j[1], path + "/1"), number(j[2], path + "/2")};
}

inline json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline SemanticClass semantic_class(const json& obj, const std::string& path) {
    const std::string name = string(obj, "class", path);
    auto c = parse_class(name);
    if (!c) throw SchemaError(path + "/class: unknown semantic class '" + name + "'");
    return *c;
}

}  // namespace detail

/// {"rotation": [[...],[...],[...]], "translation": [x, y, z]}; input may give
/// "yaw" (radians about z) instead of "rotation".
inline SE3Pose pose_from_json(const json& j, const std::string& path) {
    SE3Pose p;
    p.translation = detail::vec3(detail::field(j, "translation", path), path + "/translation");
    if (j.contains("rotation")) {
        const json& r = j.at("rotation");
        if (!r.is_array() || r.size() != 3) throw SchemaError(path + "/rotation: expected a 3x3 matrix");
        for (int i = 0; i < 3; ++i) {
            const Vec3 row = detail::vec3(r[i], path + "/rotation/" + std::to_string(i));
            p.rotation.row(i) = row.transpose();
        }
    } else if (j.contains("yaw")) {
        p.rotation = SE3Pose::from_yaw(detail::number(j, "yaw", path)).rotation;
    } else {
        throw SchemaError(path + ": pose needs 'rotation' or 'yaw'");
    }
    if (!p.is_valid(1e-6)) throw InvariantError(path + ": rotation is not orthonormal with det +1");
    return p;
}

inline json to_json(const SE3Pose& p) {
    json rot = json::array();
    for (int i = 0; i < 3; ++i) rot.push_back(json::array({p.rotation(i, 0), p.rotation(i, 1), p.rotation(i, 2)}));
    return {{"rotation", rot}, {"translation", detail::to_json(p.translation)}};
}

/// Camera mount: a full pose, or {"position": [...], "yaw": a, "pitch": b}
/// relative to the carrier's forward axis.
inline SE3Pose mount_from_json(const json& j, const std::string& path) {
    if (j.contains("rotation")) return pose_from_json(j, path);
    const Vec3 pos = detail::vec3(detail::field(j, "position", path), path + "/position");
    return camera_mount(pos, detail::number_or(j, "yaw", 0.0, path), detail::number_or(j, "pitch", 0.0, path));
}

inline SceneLog log_from_json(const json& root) {
    const std::string p = "";
    SceneLog log;
    log.log_id = detail::string(root, "log_id", p);
    log.ego_id = detail::string(root, "ego_id", p);

    const json& ts = detail::array(root, "frame_timestamps", p);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        log.frame_timestamps.push_back(detail::number(ts[i], "/frame_timestamps/" + std::to_string(i)));
        if (i > 0 && !(log.frame_timestamps[i] > log.frame_timestamps[i - 1]))
            throw SchemaError("/frame_timestamps/" + std::to_string(i) + ": frame timestamps are not strictly increasing");
    }

    const json& map = detail::array(root, "map", p);
    for (std::size_t i = 0; i < map.size(); ++i) {
        const std::string mp = "/map/" + std::to_string(i);
        Polyline line;
        line.cls = detail::semantic_class(map[i], mp);
        line.closed = detail::boolean_or(map[i], "closed", false, mp);
        const json& vs = detail::array(map[i], "vertices", mp);
        for (std::size_t k = 0; k < vs.size(); ++k) line.vertices.push_back(detail::vec3(vs[k], mp + "/vertices/" + std::to_string(k)));
        try {
            line.validate();
        } catch (const InvariantError& e) {
            throw InvariantError(mp + ": " + e.what());
        }
        log.map.push_back(std::move(line));
    }

    const json& tracks = detail::array(root, "tracks", p);
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        const std::string tp = "/tracks/" + std::to_string(i);
        AgentTrack t;
        t.id = detail::string(tracks[i], "id", tp);
        t.cls = detail::semantic_class(tracks[i], tp);
        const Vec3 dims = detail::vec3(detail::field(tracks[i], "dims", tp), tp + "/dims");
        t.length = dims.x();
        t.width = dims.y();
        t.height = dims.z();
        if (!(t.length > 0.0 && t.width > 0.0 && t.height > 0.0))
            throw InvariantError(tp + "/dims: track '" + t.id + "' dimensions must be positive");
        t.trajectory.agent_id = t.id;
        const json& samples = detail::array(tracks[i], "samples", tp);
        if (samples.empty()) throw SchemaError(tp + "/samples: track '" + t.id + "' has no samples");
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const std::string sp = tp + "/samples/" + std::to_string(k);
            TimedPose s{detail::number(samples[k], "t", sp), pose_from_json(detail::field(samples[k], "pose", sp), sp + "/pose")};
            if (!t.trajectory.samples.empty() && !(s.t > t.trajectory.samples.back().t))
                throw SchemaError(sp + "/t: track '" + t.id + "' timestamps are not strictly increasing");
            t.trajectory.samples.push_back(s);
        }
        log.tracks.push_back(std::move(t));
    }

    if (root.contains("lights")) {
        const json& lights = detail::array(root, "lights", p);
        for (std::size_t i = 0; i < lights.size(); ++i) {
            const std::string lp = "/lights/" + std::to_string(i);
            LightTrack l;
            l.id = detail::string(lights[i], "id", lp);
            l.pose = pose_from_json(detail::field(lights[i], "pose", lp), lp + "/pose");
            const json& states = detail::array(lights[i], "states", lp);
            for (std::size_t k = 0; k < states.size(); ++k) {
                const std::string sp = lp + "/states/" + std::to_string(k);
                const std::string name = detail::string(states[k], "state", sp);
                auto st = parse_light_state(name);
                if (!st) throw SchemaError(sp + "/state: unknown light state '" + name + "'");
                const double t = detail::number(states[k], "t", sp);
                if (!l.states.empty() && !(t > l.states.back().first))
                    throw SchemaError(sp + "/t: light '" + l.id + "' state times are not strictly increasing");
                l.states.emplace_back(t, *st);
            }
            log.lights.push_back(std::move(l));
        }
    }

    const json& rigs = detail::array(root, "rigs", p);
    for (std::size_t i = 0; i < rigs.size(); ++i) {
        const std::string rp = "/rigs/" + std::to_string(i);
        RigMount m;
        m.name = detail::string(rigs[i], "name", rp);
        const json& k = detail::field(rigs[i], "intrinsics", rp);
        m.intrinsics = {detail::number(k, "fx", rp + "/intrinsics"), detail::number(k, "fy", rp + "/intrinsics"),
                        detail::number(k, "cx", rp + "/intrinsics"), detail::number(k, "cy", rp + "/intrinsics")};
        m.mount = mount_from_json(detail::field(rigs[i], "mount", rp), rp + "/mount");
        m.width = detail::integer(rigs[i], "width", rp);
        m.height = detail::integer(rigs[i], "height", rp);
        m.z_near = detail::number_or(rigs[i], "z_near", kDefaultZNear, rp);
        try {
            m.rig_for(SE3Pose::identity()).validate();
        } catch (const InvariantError& e) {
            throw InvariantError(rp + ": " + e.what());
        }
        log.rigs.push_back(std::move(m));
    }

    log.validate();
    return log;
}

inline json to_json(const SceneLog& log) {
    json map = json::array();
    for (const auto& line : log.map) {
        json vs = json::array();
        for (const auto& v : line.vertices) vs.push_back(detail::to_json(v));
        map.push_back({{"class", std::string(to_string(line.cls))}, {"closed", line.closed}, {"vertices", vs}});
    }
    json tracks = json::array();
    for (const auto& t : log.tracks) {
        json samples = json::array();
        for (const auto& s : t.trajectory.samples) samples.push_back({{"t", s.t}, {"pose", to_json(s.pose)}});
        tracks.push_back({{"id", t.id},
                          {"class", std::string(to_string(t.cls))},
                          {"dims", json::array({t.length, t.width, t.height})},
                          {"samples", samples}});
    }
    json lights = json::array();
    for (const auto& l : log.lights) {
        json states = json::array();
        for (const auto& [t, s] : l.states) states.push_back({{"t", t}, {"state", std::string(to_string(s))}});
        lights.push_back({{"id", l.id}, {"pose", to_json(l.pose)}, {"states", states}});
    }
    json rigs = json::array();
    for (const auto& m : log.rigs) {
        rigs.push_back({{"name", m.name},
                        {"intrinsics", {{"fx", m.intrinsics.fx}, {"fy", m.intrinsics.fy}, {"cx", m.intrinsics.cx}, {"cy", m.intrinsics.cy}}},
                        {"mount", to_json(m.mount)},
                        {"width", m.width},
                        {"height", m.height},
                        {"z_near", m.z_near}});
    }
    return {{"log_id", log.log_id}, {"ego_id", log.ego_id}, {"frame_timestamps", log.frame_timestamps},
            {"map", map},           {"tracks", tracks},     {"lights", lights},
            {"rigs", rigs}};
}

inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Parses a scene log; schema and invariant errors carry the JSON path of
/// the offending field, parse errors the line and column.
inline SceneLog parse_log(const std::string& text, const std::string& origin = "<memory>") {
    const json root = parse_json(text, origin);
    try {
        return log_from_json(root);
    } catch (const SchemaError& e) {
        throw SchemaError(origin + ": " + e.what());
    } catch (const InvariantError& e) {
        throw InvariantError(origin + ": " + e.what());
    }
}

inline SceneLog load_log(const std::string& path) { return parse_log(read_file(path), path); }

/// Adapter from an external log format to SceneLog. Implementations live
/// outside this library; the result is validated like any loaded log.
class LogConverter {
public:
    virtual ~LogConverter() = default;
    virtual std::string format() const = 0;
    virtual SceneLog convert(const std::string& path) const = 0;

    SceneLog load(const std::string& path) const {
        SceneLog log = convert(path);
        log.validate();
        return log;
    }
};

/// Canonical text: two-space indent, sorted keys, trailing newline.
inline std::string dump_log(const SceneLog& log) { return to_json(log).dump(2) + "\n"; }

inline void save_log(const SceneLog& log, const std::string& path) { write_file(path, dump_log(log)); }

// ---------------------------------------------------------------------------
// Configuration

inline RenderConfig render_config_from_json(const json& j, const std::string& path = "/render") {
    RenderConfig c;
    if (j.is_null()) return c;
    detail::reject_unknown(j, {"face_mode", "background", "depth_decay", "d_max", "line_width", "draw_wireframe",
                               "decay_exempt", "palette"}, path);
    if (j.contains("face_mode")) {
        const std::string m = detail::string(j, "face_mode", path);
        if (m == "colored") c.face_mode = FaceMode::colored;
        else if (m == "transparent") c.face_mode = FaceMode::transparent;
        else throw SchemaError(path + "/face_mode: expected 'colored' or 'transparent'");
    }
    if (j.contains("background")) {
        const std::string b = detail::string(j, "background", path);
        if (b == "black") c.background = Background::black;
        else if (b == "sky_ground") c.background = Background::sky_ground;
        else throw SchemaError(path + "/background: expected 'black' or 'sky_ground'");
    }
    c.depth_decay = detail::boolean_or(j, "depth_decay", c.depth_decay, path);
    c.d_max = detail::number_or(j, "d_max", c.d_max, path);
    c.line_width = detail::number_or(j, "line_width", c.line_width, path);
    c.draw_wireframe = detail::boolean_or(j, "draw_wireframe", c.draw_wireframe, path);
    if (j.contains("decay_exempt")) {
        const json& ex = detail::array(j, "decay_exempt", path);
        for (const auto& name : ex) {
            auto cls = name.is_string() ? parse_class(name.get<std::string>()) : std::nullopt;
            if (!cls) throw SchemaError(path + "/decay_exempt: unknown class");
            c.decay_exempt.set(static_cast<std::size_t>(*cls));
        }
    }
    if (j.contains("palette")) {
        const json& pal = j.at("palette");
        if (!pal.is_object()) throw SchemaError(path + "/palette: expected an object");
        for (const auto& [name, rgb] : pal.items()) {
            auto cls = parse_class(name);
            if (!cls) throw SchemaError(path + "/palette: unknown class '" + name + "'");
            if (!rgb.is_array() || rgb.size() != 3) throw SchemaError(path + "/palette/" + name + ": expected [r, g, b]");
            auto channel = [&](int i) {
                if (!rgb[i].is_number_integer() || rgb[i].get<int>() < 0 || rgb[i].get<int>() > 255)
                    throw SchemaError(path + "/palette/" + name + ": channels must be integers in [0, 255]");
                return static_cast<std::uint8_t>(rgb[i].get<int>());
            };
            c.palette[*cls] = {channel(0), channel(1), channel(2)};
        }
    }
    c.validate();
    return c;
}

inline json to_json(const RenderConfig& c) {
    json exempt = json::array();
    for (std::size_t i = 0; i < kNumClasses; ++i)
        if (c.decay_exempt.test(i)) exempt.push_back(std::string(kClassNames[i]));
    json palette = json::object();
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        const Rgb& rgb = c.palette.colors[i];
        palette[std::string(kClassNames[i])] = json::array({rgb.r, rgb.g, rgb.b});
    }
    return {{"face_mode", c.face_mode == FaceMode::colored ? "colored" : "transparent"},
            {"background", c.background == Background::black ? "black" : "sky_ground"},
            {"depth_decay", c.depth_decay},
            {"d_max", c.d_max},
            {"line_width", c.line_width},
            {"draw_wireframe", c.draw_wireframe},
            {"decay_exempt", exempt},
            {"palette", palette}};
}

inline PerturbationSpec perturbation_from_json(const json& j, const std::string& path = "/perturbation") {
    PerturbationSpec s;
    if (j.is_null()) return s;
    detail::reject_unknown(j, {"lat_range", "long_range", "noise_sigma", "ramp_duration", "seed", "profile"}, path);
    auto range = [&](const char* key, double& lo, double& hi) {
        if (!j.contains(key)) return;
        const json& r = j.at(key);
        if (!r.is_array() || r.size() != 2) throw SchemaError(path + "/" + key + ": expected [min, max]");
        lo = detail::number(r[0], path + "/" + key + "/0");
        hi = detail::number(r[1], path + "/" + key + "/1");
    };
    range("lat_range", s.lat_min, s.lat_max);
    range("long_range", s.long_min, s.long_max);
    s.noise_sigma = detail::number_or(j, "noise_sigma", s.noise_sigma, path);
    s.ramp_duration = detail::number_or(j, "ramp_duration", s.ramp_duration, path);
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw SchemaError(path + "/seed: expected an unsigned integer");
        s.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("profile")) {
        const std::string p = detail::string(j, "profile", path);
        if (p == "constant_offset") s.profile = OffsetProfile::constant_offset;
        else if (p == "ramp") s.profile = OffsetProfile::ramp;
        else throw SchemaError(path + "/profile: expected 'constant_offset' or 'ramp'");
    }
    s.validate();
    return s;
}

inline json to_json(const PerturbationSpec& s) {
    return {{"lat_range", json::array({s.lat_min, s.lat_max})},
            {"long_range", json::array({s.long_min, s.long_max})},
            {"noise_sigma", s.noise_sigma},
            {"seed", s.seed},
            {"profile", s.profile == OffsetProfile::constant_offset ? "constant_offset" : "ramp"},
            {"ramp_duration", s.ramp_duration}};
}

/// Everything that determines a batch run.
struct RunConfig {
    DatasetConfig dataset;
    std::string out_dir = "out";
    int workers = 1;
    bool write_depth = false;

    void validate() const {
        dataset.clip.validate();
        dataset.render.validate();
        dataset.perturbation.validate();
        if (!(dataset.fraction_perturbed >= 0.0 && dataset.fraction_perturbed <= 1.0))
            throw InvariantError("fraction_perturbed must lie in [0, 1]");
        if (workers < 1) throw InvariantError("workers must be >= 1");
        if (out_dir.empty()) throw InvariantError("output directory is empty");
    }
};

inline RunConfig run_config_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("config: expected an object");
    detail::reject_unknown(j, {"render", "perturbation", "clip", "fraction_perturbed", "ade_threshold", "draw_observer",
                               "seed", "out", "workers", "write_depth"}, "");
    RunConfig c;
    if (j.contains("render")) c.dataset.render = render_config_from_json(j.at("render"));
    if (j.contains("perturbation")) c.dataset.perturbation = perturbation_from_json(j.at("perturbation"));
    if (j.contains("clip")) {
        const json& cl = j.at("clip");
        detail::reject_unknown(cl, {"history", "future", "dt"}, "/clip");
        c.dataset.clip.history = detail::number_or(cl, "history", c.dataset.clip.history, "/clip");
        c.dataset.clip.future = detail::number_or(cl, "future", c.dataset.clip.future, "/clip");
        c.dataset.clip.dt = detail::number_or(cl, "dt", c.dataset.clip.dt, "/clip");
    }
    c.dataset.fraction_perturbed = detail::number_or(j, "fraction_perturbed", c.dataset.fraction_perturbed, "");
    c.dataset.ade_threshold = detail::number_or(j, "ade_threshold", c.dataset.ade_threshold, "");
    c.dataset.draw_observer = detail::boolean_or(j, "draw_observer", c.dataset.draw_observer, "");
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw SchemaError("/seed: expected an unsigned integer");
        c.dataset.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("out")) c.out_dir = detail::string(j, "out", "");
    if (j.contains("workers")) c.workers = detail::integer(j, "workers", "");
    c.write_depth = detail::boolean_or(j, "write_depth", c.write_depth, "");
    c.validate();
    return c;
}

/// The run configuration as recorded in the output tree. Worker count and
/// output location are omitted so the artifact is independent of both.
inline json to_json(const RunConfig& c) {
    return {{"render", to_json(c.dataset.render)},
            {"perturbation", to_json(c.dataset.perturbation)},
            {"clip", {{"history", c.dataset.clip.history}, {"future", c.dataset.clip.future}, {"dt", c.dataset.clip.dt}}},
            {"fraction_perturbed", c.dataset.fraction_perturbed},
            {"ade_threshold", c.dataset.ade_threshold},
            {"draw_observer", c.dataset.draw_observer},
            {"seed", c.dataset.seed},
            {"write_depth", c.write_depth}};
}

// ---------------------------------------------------------------------------
// Manifest

inline std::string format_timestamp(double t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", t);
    return buf;
}

/// Relative image path {log_id}/{provenance}/{frame_ts}.ppm, with the rig
/// name appended when the job has more than one camera.
inline std::string image_path(const RenderJob& job, double t, const std::string& rig, std::size_t rig_count) {
    std::string name = format_timestamp(t);
    if (rig_count > 1) name += "_" + rig;
    return job.source_log + "/" + job.provenance.label() + "/" + name + ".ppm";
}

inline json clip_to_json(const ClipSample& c) {
    json fut = json::array();
    for (const auto& p : c.future_local) fut.push_back(detail::to_json(p));
    return {{"agent_id", c.agent_id},
            {"clip_index", c.clip_index},
            {"start_t", c.start_t},
            {"split_t", c.split_t},
            {"history_ts", c.history_ts},
            {"future_ts", c.future_ts},
            {"future_local", fut},
            {"ade", c.ade ? json(*c.ade) : json(nullptr)},
            {"valid", c.valid}};
}

inline const char* provenance_kind_name(ProvenanceKind k) {
    switch (k) {
        case ProvenanceKind::ego: return "ego";
        case ProvenanceKind::perturbed: return "perturbed";
        case ProvenanceKind::cross_agent: return "cross_agent";
    }
    return "ego";
}

inline json manifest_line(const DatasetEntry& e) {
    const RenderJob& job = e.job;
    json frames = json::array();
    for (double t : job.frame_timestamps)
        for (const auto& r : job.rigs)
            frames.push_back({{"t", t}, {"rig", r.name}, {"image", image_path(job, t, r.name, job.rigs.size())}});
    json traj = json::array();
    for (const auto& s : job.trajectory.samples) traj.push_back({{"t", s.t}, {"pose", to_json(s.pose)}});
    json pert = nullptr;
    if (job.perturbation) {
        pert = {{"spec", to_json(job.perturbation->spec)},
                {"delta_lat", job.perturbation->delta_lat},
                {"delta_long", job.perturbation->delta_long},
                {"overlaps_actor", job.perturbation->overlaps_actor}};
    }
    return {{"job_id", job.job_id},
            {"source_log", job.source_log},
            {"clip_index", job.clip_index},
            {"provenance", {{"kind", provenance_kind_name(job.provenance.kind)}, {"agent_id", job.provenance.agent_id}}},
            {"seed", job.seed},
            {"filter", e.filter},
            {"observer", job.observer_id},
            {"clip", clip_to_json(e.clip)},
            {"trajectory", traj},
            {"frames", frames},
            {"perturbation", pert}};
}

// ---------------------------------------------------------------------------
// Alignment report

inline json to_json(const align::DemoReport& r) {
    json trace = json::array();
    for (const auto& s : r.trace)
        trace.push_back({{"step", s.step}, {"task", s.task}, {"spatial", s.spatial}, {"global", s.global},
                         {"total", s.total}, {"lambda", s.lambda}, {"domain_accuracy", s.domain_accuracy}});
    const auto& c = r.config;
    return {{"seed", c.seed},
            {"config", {{"steps", c.steps}, {"learning_rate", c.learning_rate},
                        {"classifier_learning_rate", c.classifier_learning_rate},
                        {"lambda_s", c.weights.lambda_s}, {"lambda_g", c.weights.lambda_g},
                        {"adversarial", c.adversarial}, {"gamma", c.anneal.gamma}, {"anneal_scale", c.anneal.scale},
                        {"train_pairs", c.train_pairs}, {"heldout_pairs", c.heldout_pairs}}},
            {"trace", trace},
            {"heldout_domain_accuracy", r.heldout_domain_accuracy},
            {"probe_error_real", r.probe_error_real},
            {"probe_error_raster", r.probe_error_raster}};
}

inline std::string trace_csv(const align::DemoReport& r) {
    std::ostringstream out;
    out.precision(17);
    out << "step,task,spatial,global,total,lambda,domain_accuracy\n";
    for (const auto& s : r.trace)
        out << s.step << ',' << s.task << ',' << s.spatial << ',' << s.global << ',' << s.total << ',' << s.lambda << ','
            << s.domain_accuracy << '\n';
    return out.str();
}

}  // namespace rasterdrive::io
