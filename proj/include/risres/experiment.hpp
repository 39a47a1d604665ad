#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "risres/config.hpp"
#include "risres/sca.hpp"

namespace risres {

inline constexpr const char* kTimelineSchema = "risres-timeline/1";
inline constexpr const char* kAdaptationSchema = "risres-adaptation/1";
inline constexpr const char* kScalingSchema = "risres-scaling/1";
inline constexpr const char* kManifestSchema = "risres-manifest/1";

struct ExperimentSpec {
    SystemConfig system;
    ScaSettings sca;
    MetricWeights lambda;  // only the lambda_* fields are used
    std::vector<Method> methods = {Method::Proposed, Method::Baseline, Method::RobustnessOnly};
    int blockages = 3;
    std::vector<int> ris_sweep = {64, 100, 144, 196, 256};
    int scaling_blockage = 2;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir = "out";
    int threads = 0;  // 0: hardware concurrency

    /// Throws ConfigError.
    void validate() const;
};

/// "1-20", "1,4,9" or a mix like "1-3,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

ExperimentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const ExperimentSpec& spec);
/// Reads a JSON config file; unknown keys are a ConfigError.
ExperimentSpec load_spec(const std::filesystem::path& path);
/// RISRES_SEEDS and RISRES_OUT, when set, replace the seeds and output directory.
void apply_env_overrides(ExperimentSpec& spec);

/// SHA-256 of the canonical spec JSON without output directory and thread count.
std::string config_hash(const ExperimentSpec& spec);
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct RunRecord {
    Method method = Method::Proposed;
    std::uint64_t seed = 0;
    int ris_elements = 0;
    std::vector<ResilienceReport> reports;  // one per blockage
    std::vector<int> blocked_users;
    int steps = 0;
    int solver_failures = 0;
    std::string timeline_path;  // relative to the output directory, empty if none

    /// More than half of the subproblems ended without a usable solution.
    [[nodiscard]] bool numerical_failure() const { return solver_failures * 2 > steps; }
};

struct ExperimentResult {
    std::string kind;  // "adaptation" or "scaling"
    std::vector<RunRecord> runs;
    std::filesystem::path manifest_path;

    [[nodiscard]] int failed_runs() const;
    /// Exit code of the CLI: 0, or 3 when more than half of the runs failed numerically.
    [[nodiscard]] int exit_code() const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Pre-blockage interval, then `blockages` strongest-next blockages each followed by an
/// interval, for every (method, seed). Writes timelines, adaptation.csv and manifest.json.
ExperimentResult run_adaptation_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});

/// For every (M, method, seed): run through blockage `scaling_blockage` and score it.
/// Writes scaling.csv (per-run and mean/CI rows) and manifest.json.
ExperimentResult run_scaling_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});

struct VerifyReport {
    std::vector<std::string> mismatched;  // paths whose checksum differs
    std::vector<std::string> missing;
    [[nodiscard]] bool ok() const { return mismatched.empty() && missing.empty(); }
};

/// Recomputes the checksums of every file the manifest lists, relative to its directory.
VerifyReport verify_manifest(const std::filesystem::path& manifest_path);

/// Re-runs the manifest's experiment into `out_dir` and compares the new files with
/// the recorded checksums.
VerifyReport rerun_manifest(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                            const ProgressFn& progress = {});

}  // namespace risres
