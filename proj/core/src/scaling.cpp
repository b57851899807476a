#include "psmpc/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "psmpc/errors.hpp"
#include "psmpc/polytope.hpp"

namespace psmpc::scaling {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kExactConstant = 7.464101615137754587;  // (1 + sqrt(3))^2
constexpr double kConservativeConstant = 7.67;
constexpr int kCenterCheckSamples = 10000;
constexpr int kMaxEnumeratedVertices = 4096;

// Ceiling with a small relative guard against floating-point slop just above
// an integer (e.g. 0.1 * 100 / 2 evaluating to 5.000000000000001).
double ceil_tol(double x) { return std::ceil(x - 1e-9 * std::max(1.0, std::abs(x))); }

void check_levels(double eps, double delta) {
    if (!(eps > 0.0) || !(eps < 1.0))
        throw std::invalid_argument("scaling: eps must lie in (0, 1)");
    if (!(delta > 0.0) || !(delta <= 1.0))
        throw std::invalid_argument("scaling: delta must lie in (0, 1]");
}

double dual_norm(const VectorXd& v, sas::NormOrder order) {
    return order == sas::NormOrder::L1 ? v.lpNorm<Eigen::Infinity>() : v.lpNorm<1>();
}

const VectorXd& candidate_center(const SasCandidate& candidate) {
    if (const auto* norm = std::get_if<sas::NormSAS>(&candidate)) return norm->center();
    return std::get<sas::SampledSAS>(candidate).poly.center();
}

int candidate_dimension(const SasCandidate& candidate) {
    if (const auto* norm = std::get_if<sas::NormSAS>(&candidate)) return norm->dimension();
    return std::get<sas::SampledSAS>(candidate).poly.poly().dimension();
}

}  // namespace

long long scaling_sample_size(double eps, double delta, ConstantMode mode) {
    check_levels(eps, delta);
    const double c = mode == ConstantMode::Exact ? kExactConstant : kConservativeConstant;
    const double raw = (c / eps) * std::log(1.0 / delta);
    return std::max(1LL, static_cast<long long>(ceil_tol(raw)));
}

long long discard_index(double eps, long long n_gamma) {
    if (!(eps > 0.0) || !(eps < 1.0))
        throw std::invalid_argument("discard_index: eps must lie in (0, 1)");
    if (n_gamma < 1) throw std::invalid_argument("discard_index: n_gamma must be >= 1");
    const double raw = eps * static_cast<double>(n_gamma) / 2.0;
    return std::max(1LL, static_cast<long long>(ceil_tol(raw)));
}

bool validate_sample_size(long long N, long long r, double eps, double delta) {
    if (r < 1) throw std::invalid_argument("validate_sample_size: r must be >= 1");
    check_levels(eps, delta);
    const double log_term = std::log(1.0 / delta);
    const double rm1 = static_cast<double>(r - 1);
    const double threshold = (rm1 + log_term + std::sqrt(2.0 * rm1 * log_term)) / eps;
    return static_cast<double>(N) >= threshold - 1e-9 * std::max(1.0, threshold);
}

long long learning_sample_size(int n_xi, double eps, double delta, int p) {
    if (n_xi < 1) throw std::invalid_argument("learning_sample_size: n_xi must be >= 1");
    if (p < 1) throw std::invalid_argument("learning_sample_size: p must be >= 1");
    if (!(delta > 0.0) || !(delta <= 1.0))
        throw std::invalid_argument("learning_sample_size: delta must lie in (0, 1]");
    if (!(eps > 0.0) || !(eps < 0.14))
        throw std::domain_error("learning_sample_size: eps must lie in (0, 0.14)");
    const double log2_term = std::log2(8.0 * std::exp(1.0) * static_cast<double>(p) / eps);
    const double raw =
        (4.1 / eps) * (std::log(21.64 / delta) + 4.39 * static_cast<double>(n_xi) * log2_term);
    return static_cast<long long>(ceil_tol(raw));
}

double gamma_for_scenario(const sas::NormSAS& candidate, const uncertainty::Realization& scen) {
    if (scen.F.cols() != candidate.dimension())
        throw std::invalid_argument("gamma_for_scenario: scenario dimension mismatch");
    const double inf = std::numeric_limits<double>::infinity();
    double gamma = inf;
    for (Eigen::Index j = 0; j < scen.F.rows(); ++j) {
        const VectorXd f = scen.F.row(j).transpose();
        const double slack = scen.g(j) - f.dot(candidate.center());
        const double growth = dual_norm(candidate.shape() * f, candidate.order());
        double row_gamma;
        if (growth <= 0.0)
            row_gamma = slack >= 0.0 ? inf : -inf;
        else
            row_gamma = slack / growth;
        gamma = std::min(gamma, row_gamma);
    }
    return gamma;
}

double gamma_for_scenario(const sas::SampledSAS& candidate, const uncertainty::Realization& scen) {
    const auto& cp = candidate.poly;
    if (scen.F.cols() != cp.poly().dimension())
        throw std::invalid_argument("gamma_for_scenario: scenario dimension mismatch");
    const double inf = std::numeric_limits<double>::infinity();
    double gamma = inf;
    for (Eigen::Index j = 0; j < scen.F.rows(); ++j) {
        const VectorXd f = scen.F.row(j).transpose();
        const double slack = scen.g(j) - f.dot(cp.center());
        double row_gamma;
        if (f.cwiseAbs().maxCoeff() == 0.0) {
            row_gamma = slack >= 0.0 ? inf : -inf;
        } else {
            auto sv = polytope::support(cp.poly(), f);
            if (!sv.bounded) {
                // The set grows without bound along f: only gamma = 0 can
                // satisfy the row, and only if the center itself does.
                row_gamma = slack >= 0.0 ? 0.0 : -inf;
            } else {
                const double growth = sv.value - f.dot(cp.center());
                if (growth <= 0.0)
                    row_gamma = slack >= 0.0 ? inf : -inf;
                else
                    row_gamma = slack / growth;
            }
        }
        gamma = std::min(gamma, row_gamma);
    }
    return gamma;
}

double gamma_for_scenario(const SasCandidate& candidate, const uncertainty::Realization& scen) {
    return std::visit([&](const auto& c) { return gamma_for_scenario(c, scen); }, candidate);
}

double select_gamma(std::vector<double> gammas, long long r) {
    if (gammas.empty()) throw std::invalid_argument("select_gamma: empty list");
    if (r < 1 || r > static_cast<long long>(gammas.size()))
        throw std::invalid_argument("select_gamma: index out of range");
    for (double g : gammas)
        if (std::isnan(g)) throw std::invalid_argument("select_gamma: NaN in list");
    std::sort(gammas.begin(), gammas.end());
    return gammas[static_cast<std::size_t>(r - 1)];
}

ScaledSAS probabilistic_scale(const SasCandidate& candidate,
                              const uncertainty::UncertainConstraintSystem& sys,
                              const uncertainty::DistributionSpec& spec,
                              const ScalingConfig& cfg) {
    if (sys.dimension() != candidate_dimension(candidate))
        throw std::invalid_argument("probabilistic_scale: candidate/system dimension mismatch");
    ScaledSAS out(candidate, 0.0);
    auto& diag = out.diagnostics;
    diag.n_gamma = scaling_sample_size(cfg.eps, cfg.delta, cfg.constant_mode);
    diag.r = discard_index(cfg.eps, diag.n_gamma);

    const uncertainty::SampleStream base{cfg.seed, 0};
    const auto scenario_stream = base.substream(0);
    const auto check_stream = base.substream(1);

    auto scen = uncertainty::realize_scenarios(sys, spec, scenario_stream,
                                               static_cast<int>(diag.n_gamma));
    diag.sorted_gammas.reserve(scen.scenarios.size());
    for (const auto& sc : scen.scenarios)
        diag.sorted_gammas.push_back(gamma_for_scenario(candidate, sc));
    std::sort(diag.sorted_gammas.begin(), diag.sorted_gammas.end());
    diag.nonpositive_count = static_cast<long long>(
        std::count_if(diag.sorted_gammas.begin(), diag.sorted_gammas.end(),
                      [](double g) { return !(g > 0.0); }));

    // Empirical pre-check that the center satisfies the chance constraint;
    // a failure is reported as a warning because the hypothesis cannot be
    // verified exactly.
    const VectorXd& center = candidate_center(candidate);
    int violations = 0;
    for (int i = 0; i < kCenterCheckSamples; ++i) {
        uncertainty::RngEngine engine = check_stream.engine_at(static_cast<std::uint64_t>(i));
        violations += uncertainty::violation_indicator(sys, center, spec.sample(engine));
    }
    const double frac = static_cast<double>(violations) / kCenterCheckSamples;
    diag.center_violation_estimate = frac;
    diag.center_violation_std_error = std::sqrt(frac * (1.0 - frac) / kCenterCheckSamples);
    if (frac > cfg.eps) {
        diag.center_warning = true;
        diag.note = "center pre-check: empirical violation " + std::to_string(frac) +
                    " exceeds eps = " + std::to_string(cfg.eps) +
                    "; the scaling guarantee may not hold";
    }

    out.gamma = diag.sorted_gammas[static_cast<std::size_t>(diag.r - 1)];
    if (!(out.gamma > 0.0))
        throw ScalingError(
            "probabilistic_scale: selected scale factor is nonpositive; the candidate center "
            "violates too many scenarios for the requested level");
    if (std::isinf(out.gamma))
        throw ScalingError(
            "probabilistic_scale: selected scale factor is infinite; the scenarios do not "
            "constrain the candidate");
    return out;
}

namespace {

// Uniform sample from the unit l1 ball: uniform point on the standard
// simplex (via n+1 exponential spacings) with independent random signs.
VectorXd uniform_l1_ball(uncertainty::RngEngine& engine, int n) {
    VectorXd e(n + 1);
    for (int i = 0; i <= n; ++i) e(i) = -std::log(1.0 - engine.uniform());
    VectorXd z = e.head(n) / e.sum();
    for (int i = 0; i < n; ++i)
        if (engine.uniform() < 0.5) z(i) = -z(i);
    return z;
}

std::vector<VectorXd> scaled_test_points(const ScaledSAS& scaled,
                                         const uncertainty::SampleStream& point_stream,
                                         int interior_points, std::string* note) {
    std::vector<VectorXd> points;
    if (const auto* norm = std::get_if<sas::NormSAS>(&scaled.candidate)) {
        const sas::NormSAS set = sas::scaled(*norm, scaled.gamma);
        const int n = set.dimension();
        const bool enumerable =
            set.order() == sas::NormOrder::L1 || (n <= 20 && (1LL << n) <= kMaxEnumeratedVertices);
        if (enumerable) {
            points = sas_vertices(set);
        } else if (note != nullptr) {
            *note += "vertex enumeration skipped (too many vertices); ";
        }
        for (int t = 0; t < interior_points; ++t) {
            uncertainty::RngEngine engine = point_stream.engine_at(static_cast<std::uint64_t>(t));
            VectorXd z(n);
            if (set.order() == sas::NormOrder::Linf)
                for (int i = 0; i < n; ++i) z(i) = engine.uniform(-1.0, 1.0);
            else
                z = uniform_l1_ball(engine, n);
            points.push_back(set.center() + set.shape() * z);
        }
    } else {
        const auto& sampled = std::get<sas::SampledSAS>(scaled.candidate);
        polytope::HPolytope set = polytope::scale_about(sampled.poly, scaled.gamma);
        const int n = set.dimension();
        points.push_back(sampled.poly.center());
        // Rejection sampling from the axis-aligned bounding box.
        VectorXd lo(n), hi(n);
        for (int j = 0; j < n; ++j) {
            VectorXd e = VectorXd::Zero(n);
            e(j) = 1.0;
            auto up = polytope::support(set, e);
            auto dn = polytope::support(set, VectorXd(-e));
            if (!up.bounded || !dn.bounded)
                throw ScalingError("estimate_violation: scaled sampled set is unbounded");
            hi(j) = up.value;
            lo(j) = -dn.value;
        }
        const long long max_attempts = 10000LL * interior_points;
        long long attempts = 0;
        VectorXd p(n);
        for (int t = 0; static_cast<int>(points.size()) < interior_points + 1; ++t) {
            uncertainty::RngEngine engine = point_stream.engine_at(static_cast<std::uint64_t>(t));
            for (int j = 0; j < n; ++j) p(j) = engine.uniform(lo(j), hi(j));
            if (set.contains(p, 1e-12)) points.push_back(p);
            if (++attempts >= max_attempts) {
                if (note != nullptr)
                    *note += "interior rejection sampling exhausted its attempt budget; ";
                break;
            }
        }
    }
    return points;
}

}  // namespace

ViolationEstimate estimate_violation(const ScaledSAS& scaled,
                                     const uncertainty::UncertainConstraintSystem& sys,
                                     const uncertainty::DistributionSpec& spec, int n_test,
                                     const uncertainty::SampleStream& stream,
                                     int interior_points) {
    if (n_test < 1000)
        throw std::invalid_argument("estimate_violation: need at least 1000 test samples");
    if (interior_points < 0)
        throw std::invalid_argument("estimate_violation: interior point count must be >= 0");
    std::string note;
    auto points = scaled_test_points(scaled, stream.substream(0), interior_points, &note);
    if (points.empty()) throw ScalingError("estimate_violation: no test points available");

    ViolationEstimate est;
    est.points_tested = static_cast<int>(points.size());
    est.samples_per_point = n_test;
    est.max_probability = -1.0;
    for (std::size_t t = 0; t < points.size(); ++t) {
        const auto q_stream = stream.substream(1 + static_cast<std::uint64_t>(t));
        int violations = 0;
        for (int i = 0; i < n_test; ++i) {
            uncertainty::RngEngine engine = q_stream.engine_at(static_cast<std::uint64_t>(i));
            violations += uncertainty::violation_indicator(sys, points[t], spec.sample(engine));
        }
        const double frac = static_cast<double>(violations) / static_cast<double>(n_test);
        if (frac > est.max_probability) {
            est.max_probability = frac;
            est.std_error = std::sqrt(frac * (1.0 - frac) / static_cast<double>(n_test));
            est.worst_point = points[t];
        }
    }
    return est;
}

}  // namespace psmpc::scaling
