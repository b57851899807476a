// psmpc command-line front end.
//
// Subcommands:
//   calc   print the scenario-count calculators for given (eps, delta)
//   scale  run a probabilistic-scaling campaign from a JSON config
//   smpc   run closed-loop simulations (os | ps | bench) from a JSON config
//
// Exit codes: 0 success, 2 configuration/validation error, 3 runtime error.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "psmpc/config.hpp"
#include "psmpc/errors.hpp"
#include "psmpc/runner.hpp"
#include "psmpc/scaling.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int cmd_calc(double eps, double delta, int n_xi, int p) {
    using namespace psmpc::scaling;
    try {
        const long long n_exact = scaling_sample_size(eps, delta, ConstantMode::Exact);
        const long long n_cons = scaling_sample_size(eps, delta, ConstantMode::Conservative);
        std::printf("%-36s %lld\n", "scaling_sample_size(exact)", n_exact);
        std::printf("%-36s %lld\n", "scaling_sample_size(conservative)", n_cons);
        std::printf("%-36s %lld\n", "discard_index(exact)", discard_index(eps, n_exact));
        std::printf("%-36s %lld\n", "discard_index(conservative)", discard_index(eps, n_cons));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    try {
        std::printf("%-36s %lld\n", "learning_sample_size",
                    learning_sample_size(n_xi, eps, delta, p));
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "warning: learning bound unavailable: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}

int run_campaign(const std::string& config_path, const std::string& output_dir,
                 const std::string& mode) {
    try {
        const auto cfg = psmpc::cli::load_config(config_path);
        const auto out_dir = psmpc::cli::resolve_output_dir(cfg, output_dir);
        if (mode.empty()) {
            const auto campaign = psmpc::runner::run_scale(cfg, out_dir);
            std::printf("scale: %zu run(s) written to %s\n", campaign.runs.size(),
                        campaign.output_dir.string().c_str());
        } else {
            const auto campaign =
                psmpc::runner::run_smpc(cfg, psmpc::runner::parse_smpc_mode(mode), out_dir);
            std::printf("smpc(%s): %zu run(s) written to %s\n", mode.c_str(),
                        campaign.runs.size(), campaign.output_dir.string().c_str());
        }
        return kExitOk;
    } catch (const psmpc::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic scaling of approximating sets and sampling-based MPC"};
    app.require_subcommand(1);

    double eps = 0.05, delta = 1e-6;
    int n_xi = 1, p = 1;
    auto* calc = app.add_subcommand("calc", "Print the scenario-count calculators");
    calc->add_option("--eps", eps, "Admissible violation level")->required();
    calc->add_option("--delta", delta, "Confidence level")->required();
    calc->add_option("--nxi", n_xi, "Decision-variable dimension")->required();
    calc->add_option("--p", p, "Constraint rows per scenario (learning bound)");

    std::string scale_config, scale_out;
    auto* scale = app.add_subcommand("scale", "Run a probabilistic-scaling campaign");
    scale->add_option("config", scale_config, "JSON configuration file")->required();
    scale->add_option("--output-dir", scale_out,
                      "Output directory (overrides PSMPC_OUTPUT_DIR and the config)");

    std::string smpc_config, smpc_out, smpc_mode = "bench";
    auto* smpc = app.add_subcommand("smpc", "Run closed-loop simulations");
    smpc->add_option("config", smpc_config, "JSON configuration file")->required();
    smpc->add_option("--mode", smpc_mode, "os | ps | bench")->required();
    smpc->add_option("--output-dir", smpc_out,
                     "Output directory (overrides PSMPC_OUTPUT_DIR and the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (calc->parsed()) return cmd_calc(eps, delta, n_xi, p);
    if (scale->parsed()) return run_campaign(scale_config, scale_out, "");
    return run_campaign(smpc_config, smpc_out, smpc_mode);
}
