#include "psmpc/runner.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>
#include <utility>

#include "psmpc/errors.hpp"
#include "psmpc/sas.hpp"
#include "psmpc/uncertainty.hpp"

namespace psmpc::runner {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Shortest round-trip decimal representation (deterministic CSV cells).
std::string fmt(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    if (!out) throw Error("cannot write \"" + path.string() + "\"");
}

std::vector<double> to_std(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

ordered_json matrix_json(const MatrixXd& M) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

ordered_json diagnostics_json(const scaling::ScalingDiagnostics& d) {
    ordered_json out;
    out["n_gamma"] = d.n_gamma;
    out["r"] = d.r;
    out["nonpositive_count"] = d.nonpositive_count;
    out["center_violation_estimate"] = d.center_violation_estimate;
    out["center_violation_std_error"] = d.center_violation_std_error;
    out["center_warning"] = d.center_warning;
    out["note"] = d.note;
    return out;
}

/// Runs fn(0..count-1) on up to hardware_concurrency worker threads and
/// rethrows the first failure after all workers join.
void parallel_for(int count, const std::function<void(int)>& fn) {
    const unsigned workers = std::min<unsigned>(
        static_cast<unsigned>(count), std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

fs::path run_directory(const fs::path& out_dir, int index) {
    char name[16];
    std::snprintf(name, sizeof(name), "run_%03d", index);
    return out_dir / name;
}

std::string gammas_csv(const std::vector<double>& sorted_gammas) {
    std::string csv = "# schema_version=1\nindex,gamma\n";
    for (std::size_t i = 0; i < sorted_gammas.size(); ++i)
        csv += std::to_string(i) + "," + fmt(sorted_gammas[i]) + "\n";
    return csv;
}

ordered_json sas_geometry_json(const scaling::SasCandidate& candidate) {
    ordered_json set;
    if (const auto* norm = std::get_if<sas::NormSAS>(&candidate)) {
        set["center"] = to_std(norm->center());
        set["shape"] = matrix_json(norm->shape());
    } else {
        const auto& sampled = std::get<sas::SampledSAS>(candidate);
        set["center"] = to_std(sampled.poly.center());
        set["rows"] = matrix_json(sampled.poly.poly().A());
        set["offsets"] = to_std(sampled.poly.poly().b());
        set["scenario_count"] = sampled.scenario_count;
        set["rows_per_scenario"] = sampled.rows_per_scenario;
    }
    return set;
}

scaling::SasCandidate design_candidate(const std::string& kind,
                                       const uncertainty::ScenarioSet& scen, double box_radius) {
    if (kind == "sampled") return sas::design_sampled_poly(scen, box_radius);
    const auto order = kind == "l1" ? sas::NormOrder::L1 : sas::NormOrder::Linf;
    return sas::design_norm_sas(sas::stacked_design_polytope(scen, box_radius), order);
}

std::string trajectory_csv(const smpc::TrajectoryRecord& rec, int n, int m) {
    std::string csv = "# schema_version=1\nstep";
    for (int i = 0; i < n; ++i) csv += ",x_" + std::to_string(i);
    for (int i = 0; i < m; ++i) csv += ",u_" + std::to_string(i);
    csv += ",solve_time_s,feasible,violated\n";
    for (std::size_t k = 0; k < rec.steps.size(); ++k) {
        const auto& s = rec.steps[k];
        csv += std::to_string(k);
        for (int i = 0; i < n; ++i) csv += "," + fmt(s.x[i]);
        for (int i = 0; i < m; ++i) csv += "," + fmt(s.u[i]);
        csv += "," + fmt(s.solve_time_s);
        csv += s.feasible ? ",1" : ",0";
        csv += s.violated != 0 ? ",1\n" : ",0\n";
    }
    return csv;
}

PipelineStats pipeline_stats(const smpc::TrajectoryRecord& rec) {
    PipelineStats out;
    out.steps = static_cast<int>(rec.steps.size());
    out.fallback_count = rec.fallback_count;
    out.violation_count = rec.violation_count;
    out.violation_rate = rec.violation_rate;
    out.max_solve_time_s = rec.max_solve_time_s;
    out.avg_solve_time_s = rec.avg_solve_time_s;
    for (const auto& s : rec.steps) out.max_state_norm = std::max(out.max_state_norm, s.x.norm());
    return out;
}

ordered_json pipeline_json(const PipelineStats& s) {
    ordered_json out;
    out["steps"] = s.steps;
    out["fallback_count"] = s.fallback_count;
    out["violation_count"] = s.violation_count;
    out["violation_rate"] = s.violation_rate;
    out["t_max_s"] = s.max_solve_time_s;
    out["t_avg_s"] = s.avg_solve_time_s;
    out["max_state_norm"] = s.max_state_norm;
    return out;
}

smpc::SasKind sas_kind_from(const std::string& kind) {
    if (kind == "sampled") return smpc::SasKind::Sampled;
    if (kind == "l1") return smpc::SasKind::L1;
    return smpc::SasKind::Linf;
}

}  // namespace

ScaleCampaign run_scale(const cli::RunConfig& cfg, const fs::path& out_dir) {
    if (cfg.problem.type != cli::ProblemType::ScaledDirection)
        throw ConfigError("scale runs need a scaled-direction problem");

    fs::create_directories(out_dir);
    write_text(out_dir / "resolved_config.json", cli::resolved_config_json(cfg));

    const auto sys =
        uncertainty::UncertainConstraintSystem::scaled_direction(cfg.problem.n_xi,
                                                                 cfg.problem.rhs);
    const auto dist = cli::distribution_spec(cfg);
    const int repeats = cfg.execution.repeats;

    ScaleCampaign campaign;
    campaign.output_dir = out_dir;
    campaign.runs.resize(static_cast<std::size_t>(repeats));

    parallel_for(repeats, [&](int i) {
        ScaleRunResult& result = campaign.runs[static_cast<std::size_t>(i)];
        result.seed = cfg.execution.seed + static_cast<std::uint64_t>(i);
        result.directory = run_directory(out_dir, i);
        // Substream map per repeat seed: 0 and 1 are consumed inside the
        // scaling step (scenarios, center check); 2 draws the design
        // scenarios; 3 drives the violation estimate.
        const uncertainty::SampleStream base{result.seed, 0};

        uncertainty::ScenarioSet design;
        try {
            design = uncertainty::realize_scenarios(sys, dist, base.substream(2),
                                                    cfg.method.n_design);
        } catch (const std::exception& e) {
            throw PipelineError("design-sampling", e.what());
        }
        scaling::SasCandidate candidate = [&] {
            try {
                return design_candidate(cfg.method.sas_kind, design, cfg.method.box_radius);
            } catch (const std::exception& e) {
                throw PipelineError("sas-design", e.what());
            }
        }();
        const scaling::ScalingConfig scale_cfg{cfg.method.eps, cfg.method.delta,
                                               cfg.method.constant_mode, result.seed};
        auto scaled = [&] {
            try {
                return scaling::probabilistic_scale(candidate, sys, dist, scale_cfg);
            } catch (const std::exception& e) {
                throw PipelineError("scaling", e.what());
            }
        }();
        try {
            result.violation = scaling::estimate_violation(scaled, sys, dist,
                                                           cfg.execution.n_test,
                                                           base.substream(3));
        } catch (const std::exception& e) {
            throw PipelineError("violation-estimate", e.what());
        }
        result.gamma = scaled.gamma;
        result.diagnostics = scaled.diagnostics;

        fs::create_directories(result.directory);

        ordered_json sas_doc;
        sas_doc["schema_version"] = 1;
        sas_doc["kind"] = cfg.method.sas_kind;
        sas_doc["seed"] = result.seed;
        sas_doc["gamma"] = scaled.gamma;
        sas_doc["scaling"] = diagnostics_json(scaled.diagnostics);
        sas_doc["set"] = sas_geometry_json(scaled.candidate);
        write_text(result.directory / "sas.json", sas_doc.dump(2) + "\n");

        write_text(result.directory / "gammas.csv",
                   gammas_csv(scaled.diagnostics.sorted_gammas));

        ordered_json report;
        report["schema_version"] = 1;
        report["eps"] = cfg.method.eps;
        report["points_tested"] = result.violation.points_tested;
        report["samples_per_point"] = result.violation.samples_per_point;
        report["max_violation"] = result.violation.max_probability;
        report["std_error"] = result.violation.std_error;
        report["threshold"] = cfg.method.eps + 3.0 * result.violation.std_error;
        report["within_threshold"] =
            result.violation.max_probability <= cfg.method.eps + 3.0 * result.violation.std_error;
        report["worst_point"] = to_std(result.violation.worst_point);
        write_text(result.directory / "violation_report.json", report.dump(2) + "\n");
    });

    ordered_json summary;
    summary["schema_version"] = 1;
    summary["command"] = "scale";
    summary["sas_kind"] = cfg.method.sas_kind;
    summary["eps"] = cfg.method.eps;
    summary["delta"] = cfg.method.delta;
    summary["n_design"] = cfg.method.n_design;
    summary["repeats"] = repeats;
    summary["runs"] = ordered_json::array();
    double gamma_sum = 0.0;
    double gamma_min = std::numeric_limits<double>::infinity();
    double gamma_max = -std::numeric_limits<double>::infinity();
    double worst_violation = 0.0;
    for (int i = 0; i < repeats; ++i) {
        const auto& r = campaign.runs[static_cast<std::size_t>(i)];
        ordered_json row;
        row["run"] = i;
        row["seed"] = r.seed;
        row["gamma"] = r.gamma;
        row["n_gamma"] = r.diagnostics.n_gamma;
        row["r"] = r.diagnostics.r;
        row["max_violation"] = r.violation.max_probability;
        row["std_error"] = r.violation.std_error;
        summary["runs"].push_back(std::move(row));
        gamma_sum += r.gamma;
        gamma_min = std::min(gamma_min, r.gamma);
        gamma_max = std::max(gamma_max, r.gamma);
        worst_violation = std::max(worst_violation, r.violation.max_probability);
    }
    summary["gamma_mean"] = gamma_sum / static_cast<double>(repeats);
    summary["gamma_min"] = gamma_min;
    summary["gamma_max"] = gamma_max;
    summary["max_violation_overall"] = worst_violation;
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");

    return campaign;
}

SmpcMode parse_smpc_mode(const std::string& text) {
    if (text == "os") return SmpcMode::Os;
    if (text == "ps") return SmpcMode::Ps;
    if (text == "bench") return SmpcMode::Bench;
    throw ConfigError("smpc mode must be \"os\", \"ps\", or \"bench\"");
}

SmpcCampaign run_smpc(const cli::RunConfig& cfg, SmpcMode mode, const fs::path& out_dir) {
    if (cfg.problem.type != cli::ProblemType::BenchmarkChain)
        throw ConfigError("smpc runs need a benchmark-chain problem");

    fs::create_directories(out_dir);
    write_text(out_dir / "resolved_config.json", cli::resolved_config_json(cfg));

    const auto prob = smpc::make_benchmark_problem(
        cfg.problem.n, cfg.problem.m, cfg.problem.T, cfg.method.eps, cfg.method.delta,
        cfg.problem.kappa_a, cfg.problem.kappa_b, cfg.problem.kappa_w,
        cli::distribution_spec(cfg));
    const VectorXd x0 =
        Eigen::Map<const VectorXd>(cfg.problem.x0.data(),
                                   static_cast<Eigen::Index>(cfg.problem.x0.size()));

    // Substream map over {seed, 0}: 0..2 are consumed inside the scaled
    // pipeline (scenario draws, center check, design), 10 estimates the cost
    // matrix, 20 draws the offline scenario set, 30+i drives closed-loop
    // run i.  Bench mode reuses stream 30+i for both pipelines so they face
    // identical disturbances.
    const uncertainty::SampleStream base{cfg.execution.seed, 0};
    const MatrixXd S_tilde =
        smpc::estimate_cost_matrix(prob, cfg.execution.n_cost, base.substream(10));

    const bool want_os = mode == SmpcMode::Os || mode == SmpcMode::Bench;
    const bool want_ps = mode == SmpcMode::Ps || mode == SmpcMode::Bench;
    const bool timing = mode == SmpcMode::Bench || cfg.execution.record_timing;

    SmpcCampaign campaign;
    campaign.output_dir = out_dir;
    campaign.mode = mode;

    smpc::OnlineConstraints oc_os, oc_ps;
    if (want_os) {
        const auto cm = smpc::build_os_constraints(prob, base.substream(20));
        oc_os = smpc::make_online(cm, prob);
        campaign.os_rows = oc_os.online_count;
    }
    if (want_ps) {
        const scaling::ScalingConfig scale_cfg{cfg.method.eps, cfg.method.delta,
                                               cfg.method.constant_mode, cfg.execution.seed};
        oc_ps = smpc::build_ps_constraints(prob, cfg.method.n_design,
                                           sas_kind_from(cfg.method.sas_kind), scale_cfg,
                                           cfg.method.box_radius);
        campaign.ps_rows = oc_ps.online_count;
        campaign.gamma = oc_ps.gamma;

        ordered_json sas_doc;
        sas_doc["schema_version"] = 1;
        sas_doc["kind"] = oc_ps.kind;
        sas_doc["gamma"] = oc_ps.gamma;
        sas_doc["online_rows"] = oc_ps.online_count;
        sas_doc["slack_variables"] = oc_ps.extra;
        sas_doc["design_scenarios"] = oc_ps.design_scenarios;
        sas_doc["design_rows"] = oc_ps.design_rows;
        sas_doc["design_box_rows"] = oc_ps.design_box_rows;
        sas_doc["scaling"] = diagnostics_json(oc_ps.scaling_diagnostics);
        write_text(out_dir / "sas.json", sas_doc.dump(2) + "\n");
    }

    const int repeats = cfg.execution.repeats;
    campaign.runs.resize(static_cast<std::size_t>(repeats));
    for (int i = 0; i < repeats; ++i) {
        SmpcRunResult& result = campaign.runs[static_cast<std::size_t>(i)];
        result.run_stream = 30 + static_cast<std::uint64_t>(i);
        result.directory = run_directory(out_dir, i);
        fs::create_directories(result.directory);
        const auto run_stream = base.substream(result.run_stream);

        if (want_os) {
            const auto rec = smpc::simulate_closed_loop(prob, S_tilde, oc_os,
                                                        cfg.execution.steps, x0, run_stream,
                                                        timing);
            result.os = pipeline_stats(rec);
            const char* name = mode == SmpcMode::Bench ? "os_trajectory.csv" : "trajectory.csv";
            write_text(result.directory / name,
                       trajectory_csv(rec, cfg.problem.n, cfg.problem.m));
        }
        if (want_ps) {
            const auto rec = smpc::simulate_closed_loop(prob, S_tilde, oc_ps,
                                                        cfg.execution.steps, x0, run_stream,
                                                        timing);
            result.ps = pipeline_stats(rec);
            const char* name = mode == SmpcMode::Bench ? "ps_trajectory.csv" : "trajectory.csv";
            write_text(result.directory / name,
                       trajectory_csv(rec, cfg.problem.n, cfg.problem.m));
        }
    }

    ordered_json summary;
    summary["schema_version"] = 1;
    summary["command"] = "smpc";
    summary["mode"] = mode == SmpcMode::Os ? "os" : (mode == SmpcMode::Ps ? "ps" : "bench");
    summary["repeats"] = repeats;
    summary["steps"] = cfg.execution.steps;
    summary["record_timing"] = timing;
    ordered_json prob_doc;
    prob_doc["n"] = cfg.problem.n;
    prob_doc["m"] = cfg.problem.m;
    prob_doc["T"] = cfg.problem.T;
    prob_doc["p"] = prob.p();
    prob_doc["eps"] = cfg.method.eps;
    prob_doc["delta"] = cfg.method.delta;
    summary["problem"] = std::move(prob_doc);
    if (want_os) {
        ordered_json os_doc;
        os_doc["rows"] = campaign.os_rows;
        os_doc["rows_per_constraint"] = oc_os.rows_per_constraint;
        summary["os"] = std::move(os_doc);
    }
    if (want_ps) {
        ordered_json ps_doc;
        ps_doc["rows"] = campaign.ps_rows;
        ps_doc["kind"] = oc_ps.kind;
        ps_doc["gamma"] = campaign.gamma;
        summary["ps"] = std::move(ps_doc);
    }
    if (want_os && want_ps && campaign.ps_rows > 0)
        summary["constraint_ratio"] =
            static_cast<double>(campaign.os_rows) / static_cast<double>(campaign.ps_rows);

    summary["runs"] = ordered_json::array();
    double os_avg_sum = 0.0, ps_avg_sum = 0.0, os_max = 0.0, ps_max = 0.0;
    long long os_violations = 0, ps_violations = 0;
    for (int i = 0; i < repeats; ++i) {
        const auto& r = campaign.runs[static_cast<std::size_t>(i)];
        ordered_json row;
        row["run"] = i;
        if (want_os) {
            row["os"] = pipeline_json(r.os);
            os_avg_sum += r.os.avg_solve_time_s;
            os_max = std::max(os_max, r.os.max_solve_time_s);
            os_violations += r.os.violation_count;
        }
        if (want_ps) {
            row["ps"] = pipeline_json(r.ps);
            ps_avg_sum += r.ps.avg_solve_time_s;
            ps_max = std::max(ps_max, r.ps.max_solve_time_s);
            ps_violations += r.ps.violation_count;
        }
        summary["runs"].push_back(std::move(row));
    }
    // Rates over the disturbance-driven steps (every step except the first).
    const double rate_steps =
        static_cast<double>(repeats) * std::max(1, cfg.execution.steps - 1);
    ordered_json agg;
    if (want_os) {
        agg["t_avg_os_s"] = os_avg_sum / static_cast<double>(repeats);
        agg["t_max_os_s"] = os_max;
        agg["violation_rate_os"] = static_cast<double>(os_violations) / rate_steps;
    }
    if (want_ps) {
        agg["t_avg_ps_s"] = ps_avg_sum / static_cast<double>(repeats);
        agg["t_max_ps_s"] = ps_max;
        agg["violation_rate_ps"] = static_cast<double>(ps_violations) / rate_steps;
    }
    if (want_os && want_ps && ps_avg_sum > 0.0) agg["speedup_avg"] = os_avg_sum / ps_avg_sum;
    summary["aggregate"] = std::move(agg);
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");

    return campaign;
}

}  // namespace psmpc::runner
