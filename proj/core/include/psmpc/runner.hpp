#pragma once
// Campaign runner: executes the scaling and closed-loop simulation campaigns
// described by a RunConfig and writes versioned CSV/JSON artifacts to disk.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "psmpc/config.hpp"
#include "psmpc/scaling.hpp"
#include "psmpc/smpc.hpp"

namespace psmpc::runner {

/// Outcome of one scaling repeat (design, scale, violation estimate).
struct ScaleRunResult {
    std::uint64_t seed = 0;  ///< per-repeat seed (base seed + repeat index)
    double gamma = 0.0;
    scaling::ScalingDiagnostics diagnostics;
    scaling::ViolationEstimate violation;
    std::filesystem::path directory;  ///< run_### directory with the artifacts
};

struct ScaleCampaign {
    std::filesystem::path output_dir;
    std::vector<ScaleRunResult> runs;
};

/// Runs cfg.execution.repeats independent scaling repeats (seeds base,
/// base+1, ...) of the configured scaled-direction problem.  Each repeat
/// draws its own design scenarios, builds the configured candidate set,
/// scales it, and estimates the violation probability of the scaled set.
/// Writes per repeat run_###/{sas.json, gammas.csv, violation_report.json}
/// plus resolved_config.json and summary.json at the top level.  Repeats run
/// in parallel; every artifact is a deterministic function of the config.
/// Failures carry a pipeline stage tag ("design-sampling", "sas-design",
/// "scaling", "violation-estimate").
ScaleCampaign run_scale(const cli::RunConfig& cfg, const std::filesystem::path& out_dir);

enum class SmpcMode { Os, Ps, Bench };

/// Parses "os", "ps", or "bench"; throws ConfigError otherwise.
SmpcMode parse_smpc_mode(const std::string& text);

/// Closed-loop statistics for one pipeline in one run.
struct PipelineStats {
    int steps = 0;
    long long fallback_count = 0;
    long long violation_count = 0;
    double violation_rate = 0.0;
    double max_solve_time_s = 0.0;
    double avg_solve_time_s = 0.0;
    double max_state_norm = 0.0;
};

struct SmpcRunResult {
    std::uint64_t run_stream = 0;  ///< substream index shared by both pipelines
    PipelineStats os;              ///< filled in Os and Bench modes
    PipelineStats ps;              ///< filled in Ps and Bench modes
    std::filesystem::path directory;
};

struct SmpcCampaign {
    std::filesystem::path output_dir;
    SmpcMode mode = SmpcMode::Os;
    long long os_rows = 0;  ///< offline scenario rows (Os / Bench)
    long long ps_rows = 0;  ///< scaled-set online rows (Ps / Bench)
    double gamma = std::numeric_limits<double>::quiet_NaN();  ///< Ps / Bench
    std::vector<SmpcRunResult> runs;
};

/// Closed-loop campaign on the configured benchmark chain.  Os and Ps modes
/// simulate one pipeline per run and write run_###/trajectory.csv; Bench mode
/// runs both pipelines on identical disturbance streams with timing forced on
/// and writes run_###/{os_trajectory.csv, ps_trajectory.csv} plus a per-run
/// timing comparison in summary.json.  The constraint sets and cost matrix
/// are built once and shared across runs.
SmpcCampaign run_smpc(const cli::RunConfig& cfg, SmpcMode mode,
                      const std::filesystem::path& out_dir);

}  // namespace psmpc::runner
