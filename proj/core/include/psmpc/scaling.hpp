// Probabilistic scaling of simple approximating sets: sample-size
// calculators, per-scenario maximal scale factors, the r-th smallest
// selection rule, and empirical violation-probability estimation.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "psmpc/sas.hpp"
#include "psmpc/uncertainty.hpp"

namespace psmpc::scaling {

/// Which multiplicative constant the scenario-count formula uses:
/// Exact = (1+sqrt(3))^2, Conservative = 7.67 (its rounded upper bound).
enum class ConstantMode { Exact, Conservative };

struct ScalingConfig {
    double eps = 0.05;    ///< admissible violation level, in (0, 1)
    double delta = 1e-6;  ///< confidence level, in (0, 1]
    ConstantMode constant_mode = ConstantMode::Exact;
    std::uint64_t seed = 0;
};

/// Number of scenarios N = ceil((C / eps) ln(1 / delta)), floored at 1.
/// C = (1+sqrt(3))^2 in Exact mode, 7.67 in Conservative mode.
long long scaling_sample_size(double eps, double delta, ConstantMode mode);

/// Discard index r = ceil(eps * n_gamma / 2), clamped to >= 1.
long long discard_index(double eps, long long n_gamma);

/// True iff N >= (1/eps) (r - 1 + ln(1/delta) + sqrt(2 (r-1) ln(1/delta))),
/// the sufficient condition under which discarding r-1 scenarios preserves
/// the (eps, delta) guarantee.
bool validate_sample_size(long long N, long long r, double eps, double delta);

/// Statistical-learning sample bound
/// N = ceil((4.1/eps) (ln(21.64/delta) + 4.39 n_xi log2(8 e p / eps))).
/// Requires eps in (0, 0.14); throws std::domain_error outside.
long long learning_sample_size(int n_xi, double eps, double delta, int p);

/// Candidate set to be scaled about its center.
using SasCandidate = std::variant<sas::NormSAS, sas::SampledSAS>;

/// Largest gamma with x_c + gamma (S - x_c) inside the scenario
/// {F xi <= g}: min over rows of slack / (support growth rate).
/// May be +infinity (no binding row), or <= 0 / -infinity when the center
/// itself violates the scenario; sign cases are values, not errors.
double gamma_for_scenario(const sas::NormSAS& candidate, const uncertainty::Realization& scen);
double gamma_for_scenario(const sas::SampledSAS& candidate, const uncertainty::Realization& scen);
double gamma_for_scenario(const SasCandidate& candidate, const uncertainty::Realization& scen);

/// r-th smallest (1-based) element of the list; +infinity entries sort last.
double select_gamma(std::vector<double> gammas, long long r);

struct ScalingDiagnostics {
    long long n_gamma = 0;  ///< scenarios drawn
    long long r = 0;        ///< selection index
    std::vector<double> sorted_gammas;  ///< all per-scenario values, ascending
    long long nonpositive_count = 0;    ///< how many gamma_i were <= 0
    /// Empirical violation probability of the candidate center (pre-check of
    /// the requirement that the center itself satisfies the chance
    /// constraint); estimated from 10^4 fresh samples.
    double center_violation_estimate = std::numeric_limits<double>::quiet_NaN();
    double center_violation_std_error = std::numeric_limits<double>::quiet_NaN();
    bool center_warning = false;  ///< estimate exceeded eps (warn, not fail)
    std::string note;
};

struct ScaledSAS {
    SasCandidate candidate;
    double gamma = 0.0;
    ScalingDiagnostics diagnostics;

    ScaledSAS(SasCandidate cand, double g) : candidate(std::move(cand)), gamma(g) {}
};

/// Draws N_gamma scenarios from `sys` under `spec`, computes every
/// per-scenario gamma_i, and returns the r-th smallest together with full
/// diagnostics.  Deterministic given cfg.seed (scenarios on substream 0,
/// center pre-check on substream 1).  Throws ScalingError when the selected
/// gamma is nonpositive or infinite.
ScaledSAS probabilistic_scale(const SasCandidate& candidate,
                              const uncertainty::UncertainConstraintSystem& sys,
                              const uncertainty::DistributionSpec& spec,
                              const ScalingConfig& cfg);

struct ViolationEstimate {
    double max_probability = 0.0;  ///< worst per-point empirical violation
    double std_error = 0.0;        ///< binomial stderr at that point
    Eigen::VectorXd worst_point;
    int points_tested = 0;
    int samples_per_point = 0;
};

/// Estimates max over test points xi of Pr{F(q) xi <= g(q) violated}.
/// Test points are the vertices of the scaled set (where enumerable) plus
/// uniform interior samples; each point is tested against n_test fresh
/// uncertainty draws.  Requires n_test >= 1000.  Deterministic per stream
/// (points on substream 0, per-point draws on substreams 1, 2, ...).
ViolationEstimate estimate_violation(const ScaledSAS& scaled,
                                     const uncertainty::UncertainConstraintSystem& sys,
                                     const uncertainty::DistributionSpec& spec, int n_test,
                                     const uncertainty::SampleStream& stream,
                                     int interior_points = 64);

}  // namespace psmpc::scaling
