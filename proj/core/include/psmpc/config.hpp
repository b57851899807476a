// Run configuration: JSON schema parsing with strict unknown-key rejection,
// defaulting, validation, and emission of the fully resolved configuration.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psmpc/scaling.hpp"
#include "psmpc/uncertainty.hpp"

namespace psmpc::cli {

enum class ProblemType {
    ScaledDirection,  // single random row over a free vector (scale command)
    BenchmarkChain,   // chain-of-integrators control problem (smpc command)
};

struct ProblemConfig {
    ProblemType type = ProblemType::ScaledDirection;
    // scaled-direction fields
    int n_xi = 3;
    double rhs = 1.0;
    // benchmark-chain fields
    int n = 2;
    int m = 1;
    int T = 8;
    double kappa_a = 0.02;
    double kappa_b = 0.02;
    double kappa_w = 0.05;
    std::vector<double> x0;  // defaults to (1, 0, ..., 0)
};

struct MethodConfig {
    std::string sas_kind = "l1";  // "sampled", "l1", "linf"
    int n_design = 100;
    double eps = 0.05;
    double delta = 1e-6;
    scaling::ConstantMode constant_mode = scaling::ConstantMode::Exact;
    double box_radius = 10.0;
};

struct ExecutionConfig {
    std::uint64_t seed = 0;
    int repeats = 1;
    int n_test = 10000;
    int steps = 50;
    int n_cost = 1000;
    std::string output_dir = "runs";
    bool record_timing = false;
};

struct RunConfig {
    int schema_version = 1;
    ProblemConfig problem;
    /// Explicit distribution blocks; filled with the problem type's default
    /// when the config omits them or requests {"type": "default"}.
    std::vector<uncertainty::DistributionBlock> distribution;
    MethodConfig method;
    ExecutionConfig execution;
};

/// Parses and validates a configuration document.  Unknown keys anywhere in
/// the document are rejected; all defaults are filled in.  Throws ConfigError
/// with a descriptive message on any violation.
RunConfig parse_config(const std::string& json_text);

/// parse_config applied to the contents of a file.
RunConfig load_config(const std::string& path);

/// Canonical JSON form of the configuration with every default explicit;
/// parsing it again reproduces the same configuration.  Deterministic
/// (byte-identical for equal configurations).
std::string resolved_config_json(const RunConfig& cfg);

/// Effective output directory: CLI override if nonempty, else the
/// PSMPC_OUTPUT_DIR environment variable if set, else the configured value.
std::string resolve_output_dir(const RunConfig& cfg, const std::string& cli_override);

/// The validated distribution as a sampling specification.
uncertainty::DistributionSpec distribution_spec(const RunConfig& cfg);

}  // namespace psmpc::cli
