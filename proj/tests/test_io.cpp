#include <gtest/gtest.h>

#include <filesystem>

#include "rasterdrive/io.hpp"

using namespace rasterdrive;
using namespace rasterdrive::io;
using json = nlohmann::json;

namespace {

json minimal_log() {
    return json::parse(R"({
      "log_id": "mini", "ego_id": "ego",
      "frame_timestamps": [0.0, 0.5, 1.0],
      "map": [{"class": "lane_line", "vertices": [[0,0,0],[10,0,0]]}],
      "tracks": [{"id": "ego", "class": "vehicle", "dims": [4.5, 1.9, 1.6],
                  "samples": [{"t": 0.0, "pose": {"yaw": 0.0, "translation": [0,0,0]}},
                              {"t": 1.0, "pose": {"yaw": 0.1, "translation": [5,0,0]}}]}],
      "rigs": [{"name": "front", "intrinsics": {"fx": 50, "fy": 50, "cx": 32, "cy": 18},
                "width": 64, "height": 36, "mount": {"position": [1.5, 0, 1.6]}}]
    })");
}

template <class E>
std::string message_of(const std::string& text) {
    try {
        parse_log(text);
    } catch (const E& e) {
        return e.what();
    } catch (const std::exception& e) {
        return std::string("wrong type: ") + e.what();
    }
    return "no error";
}

}  // namespace

TEST(LogIo, MinimalLogLoads) {
    const SceneLog log = parse_log(minimal_log().dump());
    EXPECT_EQ(log.log_id, "mini");
    ASSERT_EQ(log.tracks.size(), 1u);
    EXPECT_NEAR(log.tracks[0].trajectory.samples[1].pose.yaw(), 0.1, 1e-15);
    ASSERT_EQ(log.rigs.size(), 1u);
    EXPECT_EQ(log.rigs[0].z_near, kDefaultZNear);
}

TEST(LogIo, NonMonotoneTrackTimestampsNameTheTrack) {
    json j = minimal_log();
    j["tracks"][0]["samples"][1]["t"] = 0.0;
    const std::string msg = message_of<SchemaError>(j.dump());
    EXPECT_NE(msg.find("'ego'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("/tracks/0/samples/1/t"), std::string::npos) << msg;
}

TEST(LogIo, ErrorKindsAreDistinguished) {
    EXPECT_THROW(parse_log("{\"log_id\": "), ParseError);
    json missing = minimal_log();
    missing.erase("rigs");
    EXPECT_THROW(parse_log(missing.dump()), SchemaError);
    json badclass = minimal_log();
    badclass["map"][0]["class"] = "dragon";
    EXPECT_THROW(parse_log(badclass.dump()), SchemaError);
    json dims = minimal_log();
    dims["tracks"][0]["dims"] = {4.5, -1.0, 1.6};
    EXPECT_THROW(parse_log(dims.dump()), InvariantError);
    json rot = minimal_log();
    rot["tracks"][0]["samples"][0]["pose"] = json::parse(R"({"rotation": [[2,0,0],[0,1,0],[0,0,1]], "translation": [0,0,0]})");
    EXPECT_THROW(parse_log(rot.dump()), InvariantError);
    json ego = minimal_log();
    ego["ego_id"] = "nobody";
    EXPECT_THROW(parse_log(ego.dump()), Error);
    EXPECT_THROW(load_log("/nonexistent/log.json"), IoError);
}

TEST(LogIo, CanonicalRoundTrip) {
    const SceneLog a = load_log(std::string(RASTERDRIVE_SOURCE_DIR) + "/data/sample_log.json");
    const std::string text = dump_log(a);
    const SceneLog b = parse_log(text);
    EXPECT_EQ(dump_log(b), text);
    ASSERT_EQ(a.tracks.size(), b.tracks.size());
    for (std::size_t i = 0; i < a.tracks.size(); ++i)
        for (std::size_t k = 0; k < a.tracks[i].trajectory.samples.size(); ++k)
            EXPECT_EQ(a.tracks[i].trajectory.samples[k].pose.matrix(), b.tracks[i].trajectory.samples[k].pose.matrix());
}

TEST(RunConfigIo, RoundTripAndValidation) {
    json j = json::parse(R"({"seed": 7, "fraction_perturbed": 0.34, "ade_threshold": 0.75, "workers": 3,
                              "out": "x", "write_depth": true, "clip": {"history": 1.5},
                              "perturbation": {"lat_range": [-0.5, 0.5], "noise_sigma": 0.05}})");
    const io::RunConfig c = io::run_config_from_json(j);
    EXPECT_EQ(c.dataset.seed, 7u);
    EXPECT_EQ(c.workers, 3);
    EXPECT_EQ(c.dataset.clip.history, 1.5);
    EXPECT_EQ(c.dataset.perturbation.lat_max, 0.5);
    const json back = io::to_json(c);
    EXPECT_FALSE(back.contains("workers"));
    const io::RunConfig d = io::run_config_from_json(back);
    EXPECT_EQ(io::to_json(d), back);

    EXPECT_THROW(io::run_config_from_json(json::parse(R"({"fraction_perturbed": 1.5})")), InvariantError);
    EXPECT_THROW(io::run_config_from_json(json::parse(R"({"seed": -3})")), SchemaError);
    EXPECT_THROW(io::run_config_from_json(json::parse(R"({"workers": 0})")), InvariantError);
    EXPECT_THROW(io::run_config_from_json(json::parse("[]")), SchemaError);
    EXPECT_THROW(io::run_config_from_json(json::parse(R"({"fracton_perturbed": 0.2})")), SchemaError);
    EXPECT_THROW(io::run_config_from_json(json::parse(R"({"perturbation": {"lat_min": 0}})")), SchemaError);
    EXPECT_THROW(io::run_config_from_json(json::parse(R"({"render": {"dmax": 40}})")), SchemaError);
}

TEST(Manifest, ImagePathsAndLines) {
    RenderJob job;
    job.source_log = "log";
    job.provenance = {ProvenanceKind::cross_agent, "car"};
    EXPECT_EQ(io::image_path(job, 1.5, "front", 1), "log/cross_agent_car/1.500.ppm");
    EXPECT_EQ(io::image_path(job, 1.5, "front", 2), "log/cross_agent_car/1.500_front.ppm");
    EXPECT_EQ(std::string(io::provenance_kind_name(ProvenanceKind::perturbed)), "perturbed");
}
