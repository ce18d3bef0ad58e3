#pragma once

// Batch execution: jobs from build_dataset rendered across a worker pool,
// images and a JSON-lines manifest written under one output directory.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "rasterdrive/augmentation.hpp"
#include "rasterdrive/error.hpp"
#include "rasterdrive/io.hpp"
#include "rasterdrive/rasterizer.hpp"
#include "rasterdrive/scene_log.hpp"

namespace rasterdrive {

namespace fs = std::filesystem;

/// Worker count from RASTERDRIVE_WORKERS, else 1.
inline int default_workers() {
    const char* env = std::getenv("RASTERDRIVE_WORKERS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024) throw InvariantError("RASTERDRIVE_WORKERS must be an integer in [1, 1024]");
    return static_cast<int>(n);
}

struct BatchResult {
    std::vector<DatasetEntry> entries;
    std::size_t images = 0;
};

namespace detail {

inline const SceneLog& log_for(const std::vector<SceneLog>& logs, const std::string& id) {
    for (const auto& l : logs)
        if (l.log_id == id) return l;
    throw InvariantError("no log '" + id + "'");
}

inline std::string depth_path(const std::string& ppm_path) {
    return ppm_path.substr(0, ppm_path.size() - 4) + ".depth";
}

inline void write_job(const fs::path& root, const SceneLog& log, const RenderJob& job, bool write_depth) {
    for (const auto& f : render_job(log, job)) {
        const std::string rel = io::image_path(job, f.timestamp, f.rig_name, job.rigs.size());
        const fs::path p = root / rel;
        fs::create_directories(p.parent_path());
        io::write_file(p.string(), encode_ppm(f.image));
        if (write_depth) io::write_file((root / depth_path(rel)).string(), encode_depth(f.image));
    }
}

}  // namespace detail

/// Renders every job of the dataset into cfg.out_dir, which must be absent or
/// empty. The tree depends only on (config, logs): the manifest is sorted by
/// job id and every file is written by exactly one job. On any failure the
/// directory is removed and the error rethrown.
inline BatchResult run_batch(const io::RunConfig& cfg, const std::vector<SceneLog>& logs) {
    cfg.validate();
    for (std::size_t i = 0; i < logs.size(); ++i) {
        logs[i].validate();
        for (std::size_t j = 0; j < i; ++j)
            if (logs[j].log_id == logs[i].log_id) throw SchemaError("duplicate log id '" + logs[i].log_id + "'");
    }

    const fs::path root(cfg.out_dir);
    if (fs::exists(root) && (!fs::is_directory(root) || !fs::is_empty(root)))
        throw IoError("output directory '" + cfg.out_dir + "' exists and is not empty");

    BatchResult result;
    result.entries = build_dataset(logs, cfg.dataset);

    std::set<std::string> paths;
    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        const RenderJob& job = result.entries[i].job;
        if (i > 0 && result.entries[i - 1].job.job_id == job.job_id)
            throw InvariantError("duplicate job id '" + job.job_id + "'");
        for (double t : job.frame_timestamps)
            for (const auto& r : job.rigs)
                if (!paths.insert(io::image_path(job, t, r.name, job.rigs.size())).second)
                    throw InvariantError("image path collision in job '" + job.job_id + "'");
    }
    result.images = paths.size();

    try {
        fs::create_directories(root);
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= result.entries.size()) return;
                {
                    std::lock_guard lock(failure_mutex);
                    if (failure) return;
                }
                try {
                    const RenderJob& job = result.entries[i].job;
                    detail::write_job(root, detail::log_for(logs, job.source_log), job, cfg.write_depth);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        };
        const int n = std::max(1, std::min<int>(cfg.workers, static_cast<int>(result.entries.size())));
        std::vector<std::thread> pool;
        for (int w = 1; w < n; ++w) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);

        std::string manifest;
        for (const auto& e : result.entries) manifest += io::manifest_line(e).dump() + "\n";
        io::write_file((root / "manifest.jsonl").string(), manifest);
        io::write_file((root / "run_config.json").string(), io::to_json(cfg).dump(2) + "\n");
    } catch (const fs::filesystem_error& e) {
        std::error_code ec;
        fs::remove_all(root, ec);
        throw IoError(std::string("batch output: ") + e.what());
    } catch (...) {
        std::error_code ec;
        fs::remove_all(root, ec);
        throw;
    }
    return result;
}

struct AuditReport {
    std::size_t manifest_images = 0;
    std::vector<std::string> missing;
    std::vector<std::string> unlisted;

    bool ok() const { return missing.empty() && unlisted.empty(); }
};

/// Cross-checks manifest.jsonl against the image files under `out_dir`.
inline AuditReport audit_output(const std::string& out_dir) {
    const fs::path root(out_dir);
    AuditReport report;
    std::set<std::string> listed;
    std::istringstream lines(io::read_file((root / "manifest.jsonl").string()));
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        ++n;
        const io::json j = io::parse_json(line, "manifest.jsonl:" + std::to_string(n));
        for (const auto& f : j.at("frames")) listed.insert(f.at("image").get<std::string>());
    }
    report.manifest_images = listed.size();
    for (const auto& rel : listed)
        if (!fs::is_regular_file(root / rel)) report.missing.push_back(rel);
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".ppm") continue;
        const std::string rel = fs::relative(entry.path(), root).generic_string();
        if (!listed.count(rel)) report.unlisted.push_back(rel);
    }
    std::sort(report.unlisted.begin(), report.unlisted.end());
    return report;
}

}  // namespace rasterdrive
