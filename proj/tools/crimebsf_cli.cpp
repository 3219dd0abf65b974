// Batch command-line front end. Exit codes: 0 success, 1 compute failure,
// 2 configuration or validation failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "crimebsf/config.hpp"
#include "crimebsf/errors.hpp"
#include "crimebsf/ingest.hpp"
#include "crimebsf/pipeline.hpp"
#include "crimebsf/synthgen.hpp"

namespace fs = std::filesystem;
using namespace crimebsf;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> out;
    std::optional<std::string> profile;
    std::string radii;
    std::string specs;
    std::string fit;
};

RunConfig load(const Options& o) {
    if (o.config.empty()) throw InputError("--config is required");
    RunOverrides ov;
    ov.seed = o.seed;
    ov.jobs = o.jobs;
    ov.profile = o.profile;
    if (o.out) ov.out = fs::path(*o.out);
    KeyValueConfig cfg = KeyValueConfig::load(o.config);
    if (!o.radii.empty()) cfg.set("radii", o.radii);
    if (!o.specs.empty()) cfg.set("compare", o.specs);
    if (!o.fit.empty()) cfg.set("transfer_fit", fs::absolute(o.fit).string());
    return parse_run_config(cfg, ov);
}

// `synth` also accepts a bare synth config together with --out.
RunConfig load_for_synth(const Options& o) {
    if (o.config.empty()) throw InputError("--config is required");
    const KeyValueConfig cfg = KeyValueConfig::load(o.config);
    if (cfg.has("synth_config") || cfg.has("ingest_config")) return load(o);
    load_synth_config(o.config);
    KeyValueConfig run;
    run.set("synth_config", fs::absolute(o.config).string());
    if (o.seed) run.set("seed", std::to_string(*o.seed));
    if (!o.out) throw InputError("--out is required with a bare synth config");
    RunOverrides ov;
    ov.out = fs::path(*o.out);
    return parse_run_config(run, ov);
}

void print_rows(const std::vector<ComparisonRow>& rows) { std::cout << format_comparison(rows); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian spatial filtering models of urban crime counts"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "run config file")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "run seed (sampler and permutations)");
    app.add_option("--jobs", o.jobs, "parallel fit workers for compare and sweep-radius")->check(CLI::PositiveNumber);
    app.add_option("--out", o.out, "run directory");
    app.add_option("--profile", o.profile, "sampler budget")->check(CLI::IsMember({"paper", "desk"}));

    auto* ingest = app.add_subcommand("ingest", "validate a city and copy it into the run directory");
    auto* synth = app.add_subcommand("synth", "generate a synthetic city with known truth");
    auto* features = app.add_subcommand("features", "corehoods, covariates, counts and connectivity");
    auto* fit = app.add_subcommand("fit", "sample the posterior of the configured model");
    auto* evaluate = app.add_subcommand("evaluate", "R^2, PSIS-LOO, residual Moran's I and decomposition");
    auto* compare = app.add_subcommand("compare", "fit and rank several model specs");
    compare->add_option("--specs", o.specs, "selection/variant/connectivity entries separated by ';'");
    auto* transfer = app.add_subcommand("transfer", "score a fit from another city on this run's city");
    transfer->add_option("--fit", o.fit, "fit archive directory");
    auto* sweep = app.add_subcommand("sweep-radius", "fit the configured model at several corehood radii");
    sweep->add_option("radii", o.radii, "comma-separated radii in meters");
    auto* diagnose = app.add_subcommand("diagnose", "Moran's I of counts and overdispersion tests");
    auto* run = app.add_subcommand("run", "data, features, diagnose, fit and evaluate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth) {
            const RunConfig rc = load_for_synth(o);
            run_stage(rc, "synth", [&] { stage_data(rc); });
            std::cout << "synthetic city written to " << (rc.out / "data").string() << "\n";
            return 0;
        }
        const RunConfig rc = load(o);
        if (*ingest) {
            if (!rc.ingest_config) throw InputError("field 'ingest_config' is required for ingest");
            run_stage(rc, "ingest", [&] { stage_data(rc); });
        } else if (*features) {
            run_stage(rc, "features", [&] { stage_features(rc); });
        } else if (*fit) {
            const auto dir = run_stage(rc, "fit", [&] { return stage_fit(rc, rc.spec); });
            std::cout << "fit archive: " << dir.string() << "\n";
        } else if (*evaluate) {
            const auto r = run_stage(rc, "evaluate", [&] { return stage_evaluate(rc, rc.spec); });
            std::cout << format_evaluation(r);
        } else if (*compare) {
            print_rows(run_stage(rc, "compare", [&] { return stage_compare(rc); }));
        } else if (*transfer) {
            const auto t = run_stage(rc, "transfer", [&] { return stage_transfer(rc); });
            std::cout << "transfer r2=" << t.r2 << " log_score=" << t.log_score << "\n";
        } else if (*sweep) {
            print_rows(run_stage(rc, "sweep-radius", [&] { return stage_sweep_radius(rc); }));
        } else if (*diagnose) {
            run_stage(rc, "diagnose", [&] { stage_diagnose(rc); });
        } else if (*run) {
            run_pipeline(rc);
            std::cout << "run directory: " << rc.out.string() << "\n";
        }
        return 0;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
