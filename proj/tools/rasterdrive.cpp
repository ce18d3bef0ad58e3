// rasterdrive command-line interface.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rasterdrive/align_demo.hpp"
#include "rasterdrive/augmentation.hpp"
#include "rasterdrive/batch.hpp"
#include "rasterdrive/error.hpp"
#include "rasterdrive/io.hpp"

namespace rd = rasterdrive;
using nlohmann::json;

namespace {

struct Common {
    std::vector<std::string> logs;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
};

rd::io::RunConfig load_config(const Common& c) {
    json j = json::object();
    if (!c.config.empty()) j = rd::io::parse_json(rd::io::read_file(c.config), c.config);
    if (!j.is_object()) throw rd::SchemaError(c.config + ": expected an object");
    const bool has_workers = j.contains("workers");
    if (c.seed) j["seed"] = *c.seed;
    if (!c.out.empty()) j["out"] = c.out;
    if (c.workers) j["workers"] = *c.workers;
    rd::io::RunConfig cfg = rd::io::run_config_from_json(j);
    if (!c.workers && !has_workers) cfg.workers = rd::default_workers();
    return cfg;
}

std::vector<rd::SceneLog> load_logs(const std::vector<std::string>& paths) {
    std::vector<rd::SceneLog> logs;
    for (const auto& p : paths) logs.push_back(rd::io::load_log(p));
    return logs;
}

void emit(const json& j, const std::string& path) {
    if (path.empty())
        std::cout << j.dump(2) << "\n";
    else
        rd::io::write_file(path, j.dump(2) + "\n");
}

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driving-scene rasterizer and augmentation toolkit"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub, bool logs_required) {
        auto* opt = sub->add_option("--log", common.logs, "Scene log JSON file (repeatable)");
        if (logs_required) opt->required();
        sub->add_option("--config", common.config, "Run configuration JSON");
        sub->add_option("--seed", common.seed, "Root seed (overrides the config)");
        sub->add_option("--workers", common.workers, "Worker threads (default: RASTERDRIVE_WORKERS or 1)")
            ->check(CLI::Range(1, 1024));
    };

    auto* validate = app.add_subcommand("validate", "Load logs and check all invariants");
    add_common(validate, true);

    auto* render = app.add_subcommand("render", "Render one frame to PPM");
    add_common(render, true);
    double time = 0.0;
    std::string rig_name, agent, depth_out;
    render->add_option("--time", time, "Timestamp in seconds")->required();
    render->add_option("--rig", rig_name, "Camera rig name (default: first rig)");
    render->add_option("--agent", agent, "Carrier track (default: ego)");
    render->add_option("--out", common.out, "Output PPM path")->required();
    render->add_option("--depth", depth_out, "Optional raw depth output path");

    auto* augment = app.add_subcommand("augment", "Build and render the augmented dataset");
    add_common(augment, false);
    augment->add_option("--out", common.out, "Output directory");
    bool write_depth = false;
    augment->add_flag("--depth", write_depth, "Also write raw depth files");

    auto* curate = app.add_subcommand("curate", "Report the constant-velocity ADE filter per clip");
    add_common(curate, true);
    curate->add_option("--out", common.out, "Report path (default: stdout)");
    std::optional<double> threshold;
    curate->add_option("--threshold", threshold, "ADE threshold in metres");

    auto* demo = app.add_subcommand("align-demo", "Desk-scale raster-to-real alignment training");
    demo->add_option("--seed", common.seed, "Seed");
    demo->add_option("--config", common.config, "Unused; accepted for uniformity");
    demo->add_option("--workers", common.workers, "Unused; training is single-threaded");
    demo->add_option("--out", common.out, "Report path (default: stdout)");
    int steps = rd::align::DemoConfig{}.steps;
    std::string csv;
    bool baseline = false;
    demo->add_option("--steps", steps, "Training steps")->check(CLI::PositiveNumber);
    demo->add_option("--csv", csv, "Per-step trace CSV path");
    demo->add_flag("--baseline", baseline, "Train without alignment losses or gradient reversal");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        if (validate->parsed()) {
            json out = json::array();
            for (const auto& log : load_logs(common.logs))
                out.push_back({{"log_id", log.log_id}, {"tracks", log.tracks.size()},
                               {"polylines", log.map.size()}, {"rigs", log.rigs.size()}, {"ok", true}});
            std::cout << out.dump() << "\n";
        } else if (render->parsed()) {
            if (common.logs.size() != 1) throw rd::InvariantError("render takes exactly one --log");
            const rd::io::RunConfig cfg = load_config(common);
            const rd::SceneLog log = rd::io::load_log(common.logs.front());
            const rd::AgentTrack* carrier = agent.empty() ? &log.ego() : log.find_track(agent);
            if (!carrier) throw rd::RangeError("no track '" + agent + "'");
            std::size_t rig = 0;
            if (!rig_name.empty()) {
                while (rig < log.rigs.size() && log.rigs[rig].name != rig_name) ++rig;
                if (rig == log.rigs.size()) throw rd::RangeError("no rig '" + rig_name + "'");
            }
            const std::string observer = cfg.dataset.draw_observer ? std::string() : carrier->id;
            const rd::SceneFrame frame =
                rd::scene_at(log, time, rd::interpolate(carrier->trajectory, time), log.rigs, observer);
            const rd::Framebuffer fb = rd::render_frame(frame, rig, cfg.dataset.render);
            rd::io::write_file(common.out, rd::encode_ppm(fb));
            if (!depth_out.empty()) rd::io::write_file(depth_out, rd::encode_depth(fb));
        } else if (augment->parsed()) {
            rd::io::RunConfig cfg = load_config(common);
            if (write_depth) cfg.write_depth = true;
            const rd::BatchResult r = rd::run_batch(cfg, load_logs(common.logs));
            std::cout << json{{"out", cfg.out_dir}, {"jobs", r.entries.size()}, {"images", r.images}}.dump() << "\n";
        } else if (curate->parsed()) {
            const rd::io::RunConfig cfg = load_config(common);
            const double thr = threshold.value_or(cfg.dataset.ade_threshold);
            json clips = json::array();
            std::size_t kept = 0, total = 0;
            for (const auto& log : load_logs(common.logs)) {
                const auto& ego = log.ego();
                const auto starts = rd::clip_starts(ego.trajectory.start_time(), ego.trajectory.end_time(),
                                                    cfg.dataset.clip);
                for (std::size_t ci = 0; ci < starts.size(); ++ci) {
                    for (const auto& track : log.tracks) {
                        if (!track.trajectory.covers(starts[ci]) ||
                            !track.trajectory.covers(starts[ci] + cfg.dataset.clip.length()))
                            continue;
                        const auto clip = rd::make_clip(log.log_id, track.trajectory, ci, starts[ci], cfg.dataset.clip);
                        const bool keep = !rd::curate({clip}, thr).empty();
                        ++total;
                        kept += keep ? 1 : 0;
                        clips.push_back({{"log_id", log.log_id}, {"agent_id", track.id}, {"clip_index", ci},
                                         {"start_t", clip.start_t}, {"valid", clip.valid},
                                         {"ade", clip.ade ? json(*clip.ade) : json(nullptr)}, {"kept", keep}});
                    }
                }
            }
            emit({{"threshold", thr}, {"total", total}, {"kept", kept}, {"clips", clips}}, common.out);
        } else if (demo->parsed()) {
            const std::uint64_t seed = common.seed.value_or(0);
            rd::align::DemoConfig cfg = baseline ? rd::align::DemoConfig::baseline(seed) : rd::align::DemoConfig{};
            cfg.seed = seed;
            cfg.steps = steps;
            const rd::align::DemoReport report = rd::align::align_demo(cfg);
            emit(rd::io::to_json(report), common.out);
            if (!csv.empty()) rd::io::write_file(csv, rd::io::trace_csv(report));
        }
    } catch (const rd::Error& e) {
        return fail(e.kind(), e.what(), 1);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
