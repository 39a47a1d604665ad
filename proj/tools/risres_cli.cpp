// Command-line front end: adaptation and scaling experiments, manifest checks,
// and a standalone conic solve for program dumps.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "risres/conic.hpp"
#include "risres/experiment.hpp"
#include "risres/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;

struct RunOptions {
    std::string config;
    std::string seeds;
    std::string out;
    std::vector<std::string> methods;
    int threads = -1;
    bool quiet = false;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
    cmd->add_option("--config", o.config, "JSON config file (defaults apply when omitted)")->check(CLI::ExistingFile);
    cmd->add_option("--seeds", o.seeds, "seed list, e.g. 1-20 or 1,3,5");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--method", o.methods, "proposed, baseline or robustness-only (repeatable)")->delimiter(',');
    cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
    cmd->add_flag("-q,--quiet", o.quiet, "no progress output");
}

// Config file, then environment, then flags.
risres::ExperimentSpec build_spec(const RunOptions& o) {
    risres::ExperimentSpec spec = o.config.empty() ? risres::spec_from_json(nlohmann::json::object())
                                                   : risres::load_spec(o.config);
    risres::apply_env_overrides(spec);
    if (!o.seeds.empty()) spec.seeds = risres::parse_seed_list(o.seeds);
    if (!o.out.empty()) spec.output_dir = o.out;
    if (!o.methods.empty()) {
        spec.methods.clear();
        for (const auto& m : o.methods) {
            try {
                spec.methods.push_back(risres::parse_method(m));
            } catch (const std::exception& e) {
                throw risres::ConfigError(e.what());
            }
        }
    }
    if (o.threads >= 0) spec.threads = o.threads;
    spec.validate();
    return spec;
}

int report_run(const risres::ExperimentResult& res, double seconds) {
    std::printf("%s: %zu runs in %.1f s, %d numerically failed; manifest %s\n", res.kind.c_str(), res.runs.size(),
                seconds, res.failed_runs(), res.manifest_path.string().c_str());
    return res.exit_code();
}

int report_verify(const risres::VerifyReport& rep) {
    for (const auto& p : rep.missing) std::printf("missing   %s\n", p.c_str());
    for (const auto& p : rep.mismatched) std::printf("mismatch  %s\n", p.c_str());
    std::printf("%s\n", rep.ok() ? "OK" : "FAILED");
    return rep.ok() ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resilience-aware RIS beamforming experiments"};
    app.require_subcommand(1);

    RunOptions adapt_opts, scale_opts;
    auto* adapt = app.add_subcommand("adapt", "adaptation over consecutive blockages");
    add_run_options(adapt, adapt_opts);
    auto* scale = app.add_subcommand("scale", "resilience versus number of RIS elements");
    add_run_options(scale, scale_opts);

    std::string manifest, rerun_out;
    auto* verify = app.add_subcommand("verify", "recompute the checksums listed in a manifest");
    verify->add_option("manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);
    auto* rerun = app.add_subcommand("rerun", "re-run a manifest and compare outputs byte for byte");
    rerun->add_option("manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);
    rerun->add_option("--out", rerun_out, "output directory for the re-run")->required();

    std::string program_file;
    auto* solve = app.add_subcommand("solve", "solve a dumped conic program");
    solve->add_option("program", program_file, "program dump")->required()->check(CLI::ExistingFile);

    auto* config = app.add_subcommand("config", "print the default config as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        const auto start = std::chrono::steady_clock::now();
        const auto seconds = [&] {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        };
        if (*adapt || *scale) {
            const auto& o = *adapt ? adapt_opts : scale_opts;
            const auto spec = build_spec(o);
            risres::ProgressFn progress;
            if (!o.quiet) progress = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
            const auto res = *adapt ? risres::run_adaptation_experiment(spec, progress)
                                    : risres::run_scaling_experiment(spec, progress);
            return report_run(res, seconds());
        }
        if (*verify) return report_verify(risres::verify_manifest(manifest));
        if (*rerun) return report_verify(risres::rerun_manifest(manifest, rerun_out));
        if (*solve) {
            std::ifstream in(program_file);
            const auto program = risres::conic::load(in);
            const auto diag = risres::conic::validate(program);
            if (!diag.valid) {
                for (const auto& err : diag.errors) std::fprintf(stderr, "invalid program: %s\n", err.c_str());
                return kExitConfig;
            }
            const auto sol = risres::conic::solve(program);
            std::printf("status %s\nobjective %.12g\nprimal_residual %.3g\ngap %.3g\nnewton_steps %d\n",
                        risres::conic::status_name(sol.status), sol.objective, sol.primal_residual, sol.gap,
                        sol.newton_steps);
            return sol.usable() ? kExitOk : 3;
        }
        if (*config) {
            std::cout << risres::spec_to_json(risres::spec_from_json(nlohmann::json::object())).dump(2) << "\n";
            return kExitOk;
        }
    } catch (const risres::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
    return kExitOk;
}
