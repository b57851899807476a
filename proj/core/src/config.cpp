#include "psmpc/config.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "psmpc/errors.hpp"

namespace psmpc::cli {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(where + " must be a JSON object");
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok) fail("unknown key \"" + item.key() + "\" in " + where);
    }
}

double get_number(const json& obj, const std::string& where, const char* key, double fallback,
                  bool* present = nullptr) {
    if (!obj.contains(key)) {
        if (present != nullptr) *present = false;
        return fallback;
    }
    if (present != nullptr) *present = true;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(where + "." + key + " must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(where + "." + key + " must be finite");
    return x;
}

long long get_integer(const json& obj, const std::string& where, const char* key,
                      long long fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(where + "." + key + " must be an integer");
    return v.get<long long>();
}

std::string get_string(const json& obj, const std::string& where, const char* key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(where + "." + key + " must be a string");
    return v.get<std::string>();
}

bool get_bool(const json& obj, const std::string& where, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(where + "." + key + " must be a boolean");
    return v.get<bool>();
}

VectorXd get_vector(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where + " must be an array of numbers");
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (const auto& e : v) {
        if (!e.is_number()) fail(where + " must contain only numbers");
        out[i++] = e.get<double>();
    }
    if (!out.allFinite()) fail(where + " must be finite");
    return out;
}

MatrixXd get_matrix(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) fail(where + " must be a nonempty array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(v.size());
    MatrixXd out;
    Eigen::Index r = 0;
    for (const auto& row : v) {
        const VectorXd rv = get_vector(row, where + " row");
        if (r == 0) out.resize(rows, rv.size());
        if (rv.size() != out.cols()) fail(where + " rows must have equal length");
        out.row(r++) = rv.transpose();
    }
    return out;
}

ProblemConfig parse_problem(const json& obj) {
    ProblemConfig out;
    if (!obj.is_object()) fail("problem must be a JSON object");
    const std::string type = get_string(obj, "problem", "type", "scaled-direction");
    if (type == "scaled-direction") {
        out.type = ProblemType::ScaledDirection;
        check_keys(obj, "problem", {"type", "n_xi", "rhs"});
        out.n_xi = static_cast<int>(get_integer(obj, "problem", "n_xi", out.n_xi));
        out.rhs = get_number(obj, "problem", "rhs", out.rhs);
        if (out.n_xi < 1) fail("problem.n_xi must be at least 1");
    } else if (type == "benchmark-chain") {
        out.type = ProblemType::BenchmarkChain;
        check_keys(obj, "problem",
                   {"type", "n", "m", "T", "kappa_a", "kappa_b", "kappa_w", "x0"});
        out.n = static_cast<int>(get_integer(obj, "problem", "n", out.n));
        out.m = static_cast<int>(get_integer(obj, "problem", "m", out.m));
        out.T = static_cast<int>(get_integer(obj, "problem", "T", out.T));
        out.kappa_a = get_number(obj, "problem", "kappa_a", out.kappa_a);
        out.kappa_b = get_number(obj, "problem", "kappa_b", out.kappa_b);
        out.kappa_w = get_number(obj, "problem", "kappa_w", out.kappa_w);
        if (out.n < 1 || out.m < 1 || out.m > out.n) fail("problem needs 1 <= m <= n");
        if (out.T < 1) fail("problem.T must be at least 1");
        if (out.kappa_a < 0 || out.kappa_b < 0 || out.kappa_w < 0)
            fail("problem.kappa_* must be nonnegative");
        if (obj.contains("x0")) {
            const VectorXd x0 = get_vector(obj.at("x0"), "problem.x0");
            if (x0.size() != out.n) fail("problem.x0 must have length n");
            out.x0.assign(x0.data(), x0.data() + x0.size());
        }
    } else {
        fail("problem.type must be \"scaled-direction\" or \"benchmark-chain\"");
    }
    if (out.x0.empty() && out.type == ProblemType::BenchmarkChain) {
        out.x0.assign(static_cast<std::size_t>(out.n), 0.0);
        out.x0[0] = 1.0;
    }
    return out;
}

std::vector<uncertainty::DistributionBlock> default_distribution(const ProblemConfig& p) {
    std::vector<uncertainty::DistributionBlock> blocks;
    if (p.type == ProblemType::ScaledDirection) {
        blocks.push_back(uncertainty::ScalarFactorBlock{0.5, 1.5});
        blocks.push_back(uncertainty::GaussianBlock{VectorXd::Zero(p.n_xi),
                                                    MatrixXd::Identity(p.n_xi, p.n_xi)});
    } else {
        blocks.push_back(uncertainty::UniformBoxBlock{VectorXd::Constant(3, -1.0),
                                                      VectorXd::Constant(3, 1.0)});
    }
    return blocks;
}

std::vector<uncertainty::DistributionBlock> parse_distribution(const json& obj,
                                                               const ProblemConfig& p) {
    if (obj.is_null()) return default_distribution(p);
    check_keys(obj, "distribution", {"type", "blocks"});
    if (obj.contains("type")) {
        if (obj.contains("blocks")) fail("distribution: give either \"type\" or \"blocks\"");
        const std::string type = obj.at("type").get<std::string>();
        if (type != "default") fail("distribution.type must be \"default\"");
        return default_distribution(p);
    }
    if (!obj.contains("blocks")) fail("distribution needs \"type\" or \"blocks\"");
    const json& arr = obj.at("blocks");
    if (!arr.is_array() || arr.empty()) fail("distribution.blocks must be a nonempty array");

    std::vector<uncertainty::DistributionBlock> blocks;
    for (const auto& b : arr) {
        if (!b.is_object() || !b.contains("type"))
            fail("each distribution block needs a \"type\"");
        const std::string type = b.at("type").get<std::string>();
        if (type == "uniform-box") {
            check_keys(b, "uniform-box block", {"type", "lower", "upper"});
            if (!b.contains("lower") || !b.contains("upper"))
                fail("uniform-box block needs \"lower\" and \"upper\"");
            uncertainty::UniformBoxBlock ub;
            ub.lower = get_vector(b.at("lower"), "uniform-box lower");
            ub.upper = get_vector(b.at("upper"), "uniform-box upper");
            blocks.push_back(std::move(ub));
        } else if (type == "gaussian") {
            check_keys(b, "gaussian block", {"type", "dimension", "mean", "covariance"});
            uncertainty::GaussianBlock gb;
            if (b.contains("dimension")) {
                if (b.contains("mean") || b.contains("covariance"))
                    fail("gaussian block: \"dimension\" excludes \"mean\"/\"covariance\"");
                const long long d = b.at("dimension").get<long long>();
                if (d < 1) fail("gaussian dimension must be at least 1");
                gb.mean = VectorXd::Zero(d);
                gb.covariance = MatrixXd::Identity(d, d);
            } else {
                if (!b.contains("mean") || !b.contains("covariance"))
                    fail("gaussian block needs \"mean\" and \"covariance\" (or \"dimension\")");
                gb.mean = get_vector(b.at("mean"), "gaussian mean");
                gb.covariance = get_matrix(b.at("covariance"), "gaussian covariance");
            }
            blocks.push_back(std::move(gb));
        } else if (type == "scalar-factor") {
            check_keys(b, "scalar-factor block", {"type", "lo", "hi"});
            uncertainty::ScalarFactorBlock sf;
            sf.lo = get_number(b, "scalar-factor", "lo", 0.0);
            sf.hi = get_number(b, "scalar-factor", "hi", 0.0);
            blocks.push_back(sf);
        } else {
            fail("unknown distribution block type \"" + type + "\"");
        }
    }
    return blocks;
}

int blocks_dimension(const std::vector<uncertainty::DistributionBlock>& blocks) {
    int dim = 0;
    for (const auto& b : blocks) {
        if (const auto* ub = std::get_if<uncertainty::UniformBoxBlock>(&b))
            dim += static_cast<int>(ub->lower.size());
        else if (const auto* gb = std::get_if<uncertainty::GaussianBlock>(&b))
            dim += static_cast<int>(gb->mean.size());
        else
            dim += 1;
    }
    return dim;
}

bool blocks_zero_mean(const std::vector<uncertainty::DistributionBlock>& blocks) {
    for (const auto& b : blocks) {
        if (const auto* ub = std::get_if<uncertainty::UniformBoxBlock>(&b)) {
            for (Eigen::Index i = 0; i < ub->lower.size(); ++i) {
                const double scale =
                    std::max({1.0, std::abs(ub->lower[i]), std::abs(ub->upper[i])});
                if (std::abs(ub->lower[i] + ub->upper[i]) > 1e-12 * scale) return false;
            }
        } else if (const auto* gb = std::get_if<uncertainty::GaussianBlock>(&b)) {
            if (gb->mean.size() > 0 && gb->mean.cwiseAbs().maxCoeff() > 1e-12) return false;
        } else if (const auto* sf = std::get_if<uncertainty::ScalarFactorBlock>(&b)) {
            const double scale = std::max({1.0, std::abs(sf->lo), std::abs(sf->hi)});
            if (std::abs(sf->lo + sf->hi) > 1e-12 * scale) return false;
        }
    }
    return true;
}

MethodConfig parse_method(const json& obj) {
    MethodConfig out;
    if (obj.is_null()) return out;
    check_keys(obj, "method",
               {"sas_kind", "n_design", "eps", "delta", "constant_mode", "box_radius"});
    out.sas_kind = get_string(obj, "method", "sas_kind", out.sas_kind);
    if (out.sas_kind != "sampled" && out.sas_kind != "l1" && out.sas_kind != "linf")
        fail("method.sas_kind must be \"sampled\", \"l1\", or \"linf\"");
    out.n_design = static_cast<int>(get_integer(obj, "method", "n_design", out.n_design));
    if (out.n_design < 1) fail("method.n_design must be at least 1");
    out.eps = get_number(obj, "method", "eps", out.eps);
    out.delta = get_number(obj, "method", "delta", out.delta);
    if (!(out.eps > 0.0 && out.eps < 1.0)) fail("method.eps must lie in (0, 1)");
    if (!(out.delta > 0.0 && out.delta < 1.0)) fail("method.delta must lie in (0, 1)");
    const std::string mode = get_string(obj, "method", "constant_mode", "exact");
    if (mode == "exact")
        out.constant_mode = scaling::ConstantMode::Exact;
    else if (mode == "conservative")
        out.constant_mode = scaling::ConstantMode::Conservative;
    else
        fail("method.constant_mode must be \"exact\" or \"conservative\"");
    out.box_radius = get_number(obj, "method", "box_radius", out.box_radius);
    if (!(out.box_radius > 0.0)) fail("method.box_radius must be positive");
    return out;
}

ExecutionConfig parse_execution(const json& obj) {
    ExecutionConfig out;
    if (obj.is_null()) return out;
    check_keys(obj, "execution",
               {"seed", "repeats", "n_test", "steps", "n_cost", "output_dir", "record_timing"});
    if (obj.contains("seed")) {
        const json& v = obj.at("seed");
        if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0 &&
                                       !v.is_number_unsigned()))
            fail("execution.seed must be a nonnegative integer");
        out.seed = v.get<std::uint64_t>();
    }
    out.repeats = static_cast<int>(get_integer(obj, "execution", "repeats", out.repeats));
    out.n_test = static_cast<int>(get_integer(obj, "execution", "n_test", out.n_test));
    out.steps = static_cast<int>(get_integer(obj, "execution", "steps", out.steps));
    out.n_cost = static_cast<int>(get_integer(obj, "execution", "n_cost", out.n_cost));
    out.output_dir = get_string(obj, "execution", "output_dir", out.output_dir);
    out.record_timing = get_bool(obj, "execution", "record_timing", out.record_timing);
    if (out.repeats < 1) fail("execution.repeats must be at least 1");
    if (out.n_test < 1000) fail("execution.n_test must be at least 1000");
    if (out.steps < 1) fail("execution.steps must be at least 1");
    if (out.n_cost < 1000) fail("execution.n_cost must be at least 1000");
    if (out.output_dir.empty()) fail("execution.output_dir must be nonempty");
    return out;
}

ordered_json block_to_json(const uncertainty::DistributionBlock& b) {
    ordered_json out;
    if (const auto* ub = std::get_if<uncertainty::UniformBoxBlock>(&b)) {
        out["type"] = "uniform-box";
        out["lower"] = std::vector<double>(ub->lower.data(), ub->lower.data() + ub->lower.size());
        out["upper"] = std::vector<double>(ub->upper.data(), ub->upper.data() + ub->upper.size());
    } else if (const auto* gb = std::get_if<uncertainty::GaussianBlock>(&b)) {
        out["type"] = "gaussian";
        out["mean"] = std::vector<double>(gb->mean.data(), gb->mean.data() + gb->mean.size());
        ordered_json cov = ordered_json::array();
        for (Eigen::Index i = 0; i < gb->covariance.rows(); ++i) {
            ordered_json row = ordered_json::array();
            for (Eigen::Index j = 0; j < gb->covariance.cols(); ++j)
                row.push_back(gb->covariance(i, j));
            cov.push_back(std::move(row));
        }
        out["covariance"] = std::move(cov);
    } else if (const auto* sf = std::get_if<uncertainty::ScalarFactorBlock>(&b)) {
        out["type"] = "scalar-factor";
        out["lo"] = sf->lo;
        out["hi"] = sf->hi;
    }
    return out;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    check_keys(doc, "top level", {"schema_version", "problem", "distribution", "method",
                                  "execution"});
    RunConfig cfg;
    const long long version = get_integer(doc, "top level", "schema_version", 1);
    if (version != 1) fail("unsupported schema_version (expected 1)");
    cfg.schema_version = 1;
    if (!doc.contains("problem")) fail("missing required section \"problem\"");
    cfg.problem = parse_problem(doc.at("problem"));
    cfg.distribution = parse_distribution(
        doc.contains("distribution") ? doc.at("distribution") : json(nullptr), cfg.problem);
    cfg.method = parse_method(doc.contains("method") ? doc.at("method") : json(nullptr));
    cfg.execution =
        parse_execution(doc.contains("execution") ? doc.at("execution") : json(nullptr));

    // Cross-section consistency.
    const int dim = blocks_dimension(cfg.distribution);
    if (cfg.problem.type == ProblemType::ScaledDirection) {
        if (dim != cfg.problem.n_xi + 1)
            fail("distribution dimension must be n_xi + 1 (factor plus direction)");
    } else {
        if (dim != 3) fail("the benchmark chain needs a three-dimensional disturbance");
        if (!blocks_zero_mean(cfg.distribution))
            fail("the benchmark disturbance must have zero mean");
    }
    try {
        uncertainty::DistributionSpec probe(cfg.distribution);
    } catch (const std::exception& e) {
        fail(std::string("invalid distribution: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open \"" + path + "\"");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string resolved_config_json(const RunConfig& cfg) {
    ordered_json doc;
    doc["schema_version"] = cfg.schema_version;

    ordered_json prob;
    if (cfg.problem.type == ProblemType::ScaledDirection) {
        prob["type"] = "scaled-direction";
        prob["n_xi"] = cfg.problem.n_xi;
        prob["rhs"] = cfg.problem.rhs;
    } else {
        prob["type"] = "benchmark-chain";
        prob["n"] = cfg.problem.n;
        prob["m"] = cfg.problem.m;
        prob["T"] = cfg.problem.T;
        prob["kappa_a"] = cfg.problem.kappa_a;
        prob["kappa_b"] = cfg.problem.kappa_b;
        prob["kappa_w"] = cfg.problem.kappa_w;
        prob["x0"] = cfg.problem.x0;
    }
    doc["problem"] = std::move(prob);

    ordered_json dist;
    dist["blocks"] = ordered_json::array();
    for (const auto& b : cfg.distribution) dist["blocks"].push_back(block_to_json(b));
    doc["distribution"] = std::move(dist);

    ordered_json method;
    method["sas_kind"] = cfg.method.sas_kind;
    method["n_design"] = cfg.method.n_design;
    method["eps"] = cfg.method.eps;
    method["delta"] = cfg.method.delta;
    method["constant_mode"] =
        cfg.method.constant_mode == scaling::ConstantMode::Exact ? "exact" : "conservative";
    method["box_radius"] = cfg.method.box_radius;
    doc["method"] = std::move(method);

    ordered_json exec;
    exec["seed"] = cfg.execution.seed;
    exec["repeats"] = cfg.execution.repeats;
    exec["n_test"] = cfg.execution.n_test;
    exec["steps"] = cfg.execution.steps;
    exec["n_cost"] = cfg.execution.n_cost;
    exec["output_dir"] = cfg.execution.output_dir;
    exec["record_timing"] = cfg.execution.record_timing;
    doc["execution"] = std::move(exec);

    return doc.dump(2) + "\n";
}

std::string resolve_output_dir(const RunConfig& cfg, const std::string& cli_override) {
    if (!cli_override.empty()) return cli_override;
    if (const char* env = std::getenv("PSMPC_OUTPUT_DIR"); env != nullptr && env[0] != '\0')
        return env;
    return cfg.execution.output_dir;
}

uncertainty::DistributionSpec distribution_spec(const RunConfig& cfg) {
    return uncertainty::DistributionSpec(cfg.distribution);
}

}  // namespace psmpc::cli
