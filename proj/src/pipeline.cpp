#include "crimebsf/pipeline.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "crimebsf/csv.hpp"
#include "crimebsf/diagnostics.hpp"
#include "crimebsf/ingest.hpp"
#include "crimebsf/synthgen.hpp"

namespace crimebsf {

namespace fs = std::filesystem;

namespace {

const std::set<std::string>& run_keys() {
    static const std::set<std::string> keys = {
        "synth_config", "ingest_config", "out", "seed", "jobs", "variant", "features", "connectivity", "radius_m",
        "eigen_threshold", "profile", "chains", "warmup", "iterations", "max_rhat", "max_divergence_fraction",
        "require_convergence", "max_depth", "target_accept", "rho_parameterization", "rho_shape", "rho_param",
        "phi_scale", "tau_scale", "nu_shape", "nu_rate", "nu_max", "omega_inv_shape", "omega_inv_rate", "compare",
        "radii", "transfer_fit", "permutation_replicates", "crime_buffer_m"};
    return keys;
}

fs::path features_dir(const RunConfig& rc) { return rc.out / "features"; }
fs::path data_config(const RunConfig& rc) { return rc.out / "data" / "ingest.cfg"; }

fs::path require_artifact(const fs::path& p) {
    if (!fs::exists(p)) throw InputError("missing upstream artifact '" + p.string() + "'");
    return p;
}

std::string eigen_key(const ModelSpec& spec) {
    return slug(spec.feature_selection) + "_" + to_string(spec.connectivity) + "_t" + format_double(spec.eigen_threshold);
}

// Eigenbasis for (selection, connectivity, threshold) under `root`, computed once.
EigenBasis cached_basis(const fs::path& root, const ModelSpec& spec, const FeatureMatrix& fm,
                        const Eigen::MatrixXd& C, const Stamp& stamp, fs::path& lambdas, fs::path& vectors) {
    const fs::path dir = root / "eigenbasis" / eigen_key(spec);
    lambdas = dir / "lambdas.csv";
    vectors = dir / "vectors.csv";
    if (fs::exists(lambdas) && fs::exists(vectors)) {
        EigenBasis b = read_eigenbasis_csv(lambdas, vectors);
        if (b.E.rows() == fm.X.rows()) return b;
    }
    fs::create_directories(dir);
    EigenBasis b = moran_eigenbasis(residual_projector(with_intercept(fm.X)), C, spec.eigen_threshold);
    write_eigenbasis_csv(b, lambdas, vectors, stamp.line());
    std::ostringstream s;
    s << "selection=" << spec.feature_selection << "\nconnectivity=" << to_string(spec.connectivity)
      << "\nthreshold=" << format_double(spec.eigen_threshold) << "\nretained=" << b.E.cols()
      << "\nlambda_max=" << format_double(b.lambda_max) << "\n";
    write_text(dir / "summary.txt", s.str(), stamp);
    return b;
}

struct LoadedCity {
    CityDataset city;
    DateWindow window;
};

LoadedCity load_run_city(const RunConfig& rc) {
    auto r = ingest_city(require_artifact(data_config(rc)));
    return {std::move(r.city), r.window};
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

std::string posterior_summary_csv(const PosteriorSamples& s) {
    std::ostringstream out;
    out << "parameter,mean,sd,q05,q50,q95,rhat\n";
    for (Eigen::Index j = 0; j < s.draws.cols(); ++j) {
        const Eigen::VectorXd c = s.draws.col(j);
        const double m = c.mean();
        const double sd = c.size() > 1 ? std::sqrt((c.array() - m).square().sum() / static_cast<double>(c.size() - 1)) : 0.0;
        std::vector<double> v(c.data(), c.data() + c.size());
        out << csv_escape(s.names[static_cast<std::size_t>(j)]) << ',' << format_double(m) << ',' << format_double(sd)
            << ',' << format_double(quantile(v, 0.05)) << ',' << format_double(quantile(v, 0.5)) << ','
            << format_double(quantile(v, 0.95)) << ','
            << format_double(static_cast<std::size_t>(j) < s.rhat.size() ? s.rhat[static_cast<std::size_t>(j)] : 0.0)
            << '\n';
    }
    return out.str();
}

nlohmann::json ring_json(const Ring& r) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : r) a.push_back({p.x, p.y});
    if (!r.empty()) a.push_back({r.front().x, r.front().y});
    return a;
}

std::string decomposition_geojson(const ModelFit& fit, const Decomposition& d, const CityDataset& city,
                                  const Stamp& stamp) {
    nlohmann::json fc;
    fc["type"] = "FeatureCollection";
    fc["config_hash"] = stamp.config_hash;
    fc["seed"] = stamp.seed;
    fc["model"] = fit.spec.label();
    fc["features"] = nlohmann::json::array();
    for (std::size_t i = 0; i < fit.core_ids.size(); ++i) {
        const auto I = static_cast<Eigen::Index>(i);
        nlohmann::json f;
        f["type"] = "Feature";
        f["properties"] = {{"core_id", fit.core_ids[i]}, {"y", fit.y[i]},           {"fixed", d.fixed(I)},
                           {"random", d.random(I)},       {"mu", d.mu(I)},          {"residual", d.residual(I)}};
        if (auto u = city.unit_index(fit.core_ids[i])) {
            nlohmann::json polys = nlohmann::json::array();
            for (const auto& part : city.units[*u].geometry.parts) {
                nlohmann::json rings = nlohmann::json::array();
                rings.push_back(ring_json(part.outer));
                for (const auto& h : part.holes) rings.push_back(ring_json(h));
                polys.push_back(rings);
            }
            f["geometry"] = {{"type", "MultiPolygon"}, {"coordinates", polys}};
        } else {
            f["geometry"] = nullptr;
        }
        fc["features"].push_back(f);
    }
    return fc.dump(1) + "\n";
}

std::vector<double> parse_radii(const std::string& s, const std::string& where) {
    std::vector<double> out;
    for (const auto& part : split(s, ',')) {
        if (trim(part).empty()) continue;
        double v = 0.0;
        try {
            v = std::stod(part);
        } catch (const std::exception&) {
            throw InputError(where + ": field 'radii' has a malformed value '" + trim(part) + "'");
        }
        if (!(v > 0.0)) throw InputError(where + ": field 'radii' values must be positive");
        out.push_back(v);
    }
    return out;
}

}  // namespace

PreparedCity prepare_city(const CityDataset& city, const DateWindow& window, double radius_m, double crime_buffer_m) {
    PreparedCity p;
    p.corehoods = build_corehoods(city.units, radius_m);
    for (auto c : boundary_cores(p.corehoods))
        p.warnings.push_back("core " + city.units[c].id + " has fewer than 3 corehood members (edge effect)");
    p.raw = compute_raw_features(city, p.corehoods);
    for (const auto& w : p.raw.warnings) p.warnings.push_back(w);
    const CrimeAssignment a = assign_crimes(city.crimes, city.units, crime_buffer_m, window);
    if (a.unassigned > 0.0)
        p.warnings.push_back(std::to_string(a.unassigned_ids.size()) + " crimes could not be assigned to a unit");
    p.counts.core_ids = p.raw.core_ids;
    p.counts.violent = a.violent;
    p.counts.property = a.property;
    p.counts.total = a.total();
    p.counts.y = round_counts(p.counts.total);
    return p;
}

Design build_design(const RawFeatureTable& raw, const std::string& selection, const Eigen::MatrixXd& C,
                    Variant variant, double eigen_threshold) {
    Design d;
    d.features = select_features(raw, FeatureSelection::parse(selection));
    if (variant != Variant::NB_RIDGE)
        d.basis = moran_eigenbasis(residual_projector(with_intercept(d.features.X)), C, eigen_threshold);
    else
        d.basis.E.resize(d.features.X.rows(), 0);
    return d;
}

ModelFit fit_design(const Design& design, const CountTable& counts, const Eigen::MatrixXd& C, const ModelSpec& spec) {
    const FeatureMatrix& fm = design.features;
    if (counts.core_ids != fm.core_ids) throw InputError("counts and features list different cores");
    ModelInputs in;
    in.y = counts.y;
    in.X = fm.X;
    in.feature_names = fm.names;
    const auto N = fm.X.rows();
    if (spec.variant != Variant::NB_RIDGE) {
        in.E = design.basis.E;
        in.lambdas = design.basis.lambdas;
        if (spec.variant == Variant::BSF) in.Q = laplacian(C);
    } else {
        in.E.resize(N, 0);
    }
    ModelFit fit;
    fit.spec = spec;
    fit.samples = sample_posterior(spec, in);
    fit.core_ids = fm.core_ids;
    fit.feature_names = fm.names;
    fit.feature_means = fm.means;
    fit.feature_sds = fm.sds;
    fit.y = counts.y;
    fit.y_unrounded = counts.total;
    fit.X = fm.X;
    fit.E = in.E;
    fit.lambdas = in.lambdas;
    fit.W = C;
    fit.fingerprint = data_fingerprint(fit.y, fit.X, fit.E);
    for (const auto& w : fm.warnings) fit.samples.warnings.push_back(w);
    return fit;
}

ModelFit fit_city(const CityDataset& city, const DateWindow& window, const ModelSpec& spec) {
    const PreparedCity p = prepare_city(city, window, spec.corehood_radius_m);
    const ConnectivityMatrix cm = build_connectivity(spec.connectivity, city, p.corehoods);
    const Design d = build_design(p.raw, spec.feature_selection, cm.C, spec.variant, spec.eigen_threshold);
    return fit_design(d, p.counts, cm.C, spec);
}

Stamp RunConfig::stamp() const { return {raw.hash(), spec.sampler.seed}; }

ModelSpec parse_spec_entry(const std::string& entry, const ModelSpec& base) {
    const auto parts = split(entry, '/');
    if (parts.empty() || parts.size() > 3 || trim(parts[0]).empty())
        throw InputError("field 'compare' entry '" + trim(entry) + "' must be selection[/variant[/connectivity]]");
    KeyValueConfig c;
    c.set("features", trim(parts[0]));
    if (parts.size() > 1 && !trim(parts[1]).empty()) c.set("variant", trim(parts[1]));
    if (parts.size() > 2 && !trim(parts[2]).empty()) c.set("connectivity", trim(parts[2]));
    return spec_from_config(c, base);
}

RunConfig parse_run_config(const KeyValueConfig& cfg_in, const RunOverrides& ov) {
    KeyValueConfig cfg = cfg_in;
    const std::string where = cfg.origin().empty() ? "config" : cfg.origin();
    for (const auto& [k, v] : cfg.values())
        if (!run_keys().count(k)) throw InputError(where + ": unknown key '" + k + "'");
    if (ov.seed) cfg.set("seed", std::to_string(*ov.seed));
    if (ov.profile) cfg.set("profile", *ov.profile);
    if (ov.jobs) cfg.set("jobs", std::to_string(*ov.jobs));
    if (ov.out) cfg.set("out", ov.out->string());

    RunConfig rc;
    rc.ingest_config = cfg.optional_path("ingest_config");
    rc.synth_config = cfg.optional_path("synth_config");
    if (rc.ingest_config && rc.synth_config)
        throw InputError(where + ": set only one of 'ingest_config' and 'synth_config'");
    if (ov.out) rc.out = *ov.out;
    else if (cfg.has("out")) rc.out = cfg.path("out");
    else throw InputError(where + ": field 'out' is required (or pass --out)");
    // A profile given on the command line wins over explicit budgets in the file.
    KeyValueConfig spec_cfg = cfg;
    if (ov.profile) {
        KeyValueConfig trimmed;
        for (const auto& [k, v] : cfg.values())
            if (k != "warmup" && k != "iterations") trimmed.set(k, v);
        spec_cfg = trimmed;
    }
    ModelSpec base;
    base.sampler = SamplerSettings::desk();
    rc.spec = spec_from_config(spec_cfg, base);
    if (auto v = cfg.get("compare")) {
        for (const auto& e : split(*v, ';'))
            if (!trim(e).empty()) rc.compare.push_back(parse_spec_entry(e, rc.spec));
    }
    if (auto v = cfg.get("radii")) rc.sweep_radii = parse_radii(*v, where);
    rc.transfer_fit = cfg.optional_path("transfer_fit");
    rc.permutation_replicates = static_cast<int>(cfg.get_int("permutation_replicates", rc.permutation_replicates));
    if (rc.permutation_replicates < 0) throw InputError(where + ": field 'permutation_replicates' must be >= 0");
    rc.jobs = static_cast<int>(cfg.get_int("jobs", rc.jobs));
    if (rc.jobs < 1) throw InputError(where + ": field 'jobs' must be at least 1");
    rc.crime_buffer_m = cfg.get_double("crime_buffer_m", rc.crime_buffer_m);
    if (rc.crime_buffer_m < 0.0) throw InputError(where + ": field 'crime_buffer_m' must be non-negative");
    // The hash covers what determines results; output location and worker count do not.
    KeyValueConfig hashed;
    for (const auto& [k, v] : cfg.values())
        if (k != "out" && k != "jobs") hashed.set(k, v);
    rc.raw = hashed;
    return rc;
}

RunConfig load_run_config(const fs::path& path, const RunOverrides& ov) {
    return parse_run_config(KeyValueConfig::load(path), ov);
}

void mark_failed(const RunConfig& rc, const std::string& stage, const std::string& what) {
    std::error_code ec;
    fs::create_directories(rc.out, ec);
    std::ofstream out(rc.out / "FAILED");
    out << rc.stamp().line() << "\nstage=" << stage << "\ncause=" << what << "\n";
}

void stage_data(const RunConfig& rc) {
    fs::create_directories(rc.out);
    const Stamp st = rc.stamp();
    write_text(rc.out / "run.cfg", rc.raw.canonical(), st);
    std::string report;
    if (rc.synth_config) {
        const SynthConfig sc = load_synth_config(*rc.synth_config);
        const SyntheticCity s = generate_city(sc);
        write_city(s.city, s.window, rc.out / "data");
        write_truth(s, rc.out / "truth");
        // Read back through the regular validation.
        const IngestResult check = ingest_city(data_config(rc));
        report = "source=synthetic\n" + check.report.to_text();
    } else if (rc.ingest_config) {
        const IngestResult r = ingest_city(*rc.ingest_config);
        write_city(r.city, r.window, rc.out / "data");
        report = "source=" + rc.ingest_config->string() + "\n" + r.report.to_text();
    } else {
        throw InputError("config needs 'ingest_config' or 'synth_config'");
    }
    write_text(rc.out / "validation_report.txt", report, st);
}

void stage_features(const RunConfig& rc) {
    const Stamp st = rc.stamp();
    const LoadedCity lc = load_run_city(rc);
    const PreparedCity p = prepare_city(lc.city, lc.window, rc.spec.corehood_radius_m, rc.crime_buffer_m);
    const fs::path dir = features_dir(rc);
    write_raw_features(p.raw, dir / "raw.csv", st);
    write_counts(p.counts, dir / "counts.csv", st);
    std::string flags;
    for (const auto& f : p.raw.flags) flags += "flag " + f + "\n";
    for (const auto& w : p.warnings) flags += "warning " + w + "\n";
    write_text(dir / "flags.txt", flags, st);
    {
        std::ostringstream s;
        s << "core_id,members,radius_m\n";
        for (const auto& c : p.corehoods)
            s << csv_escape(lc.city.units[c.core].id) << ',' << c.members.size() << ',' << format_double(c.radius_m)
              << '\n';
        write_text(dir / "corehoods.csv", s.str(), st);
    }
    fs::create_directories(rc.out / "connectivity");
    for (auto kind : {ConnectivityKind::Contiguity, ConnectivityKind::Distance, ConnectivityKind::Mobility}) {
        const ConnectivityMatrix cm = build_connectivity(kind, lc.city, p.corehoods);
        write_connectivity_csv(cm, rc.out / "connectivity" / (to_string(kind) + ".csv"), st.line());
    }
    const FeatureMatrix fm = select_features(p.raw, FeatureSelection::parse(rc.spec.feature_selection));
    write_feature_matrix(fm, dir / "features.csv", st);
}

void stage_diagnose(const RunConfig& rc) {
    const Stamp st = rc.stamp();
    const CountTable counts = read_counts(features_dir(rc) / "counts.csv");
    const RawFeatureTable raw = read_raw_features(features_dir(rc) / "raw.csv");
    const Eigen::MatrixXd W =
        read_connectivity_csv(require_artifact(rc.out / "connectivity" / (to_string(rc.spec.connectivity) + ".csv")));
    const FeatureMatrix fm = select_features(raw, FeatureSelection::parse(rc.spec.feature_selection));
    std::vector<double> y(counts.y.begin(), counts.y.end());
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    std::vector<TestResult> tests;
    tests.push_back(moran_permutation_test(yv, W, std::max(rc.permutation_replicates, 1), rc.spec.sampler.seed));
    tests.push_back(potthoff_whittinghill(y));
    tests.push_back(lagrange_multiplier(y, poisson_glm_fit(y, fm.X)));
    std::ostringstream txt, csv;
    txt << "counts: N=" << y.size() << " mean=" << fmt(yv.mean()) << "\n";
    csv << "test,statistic,reference,p_value,verdict\n";
    for (const auto& t : tests) {
        txt << t.name << ": statistic=" << fmt(t.statistic) << " reference=" << t.reference_distribution
            << " p=" << (t.p_value ? fmt(*t.p_value) : std::string("n/a")) << " -> " << t.verdict << "\n";
        csv << t.name << ',' << format_double(t.statistic) << ',' << csv_escape(t.reference_distribution) << ','
            << (t.p_value ? format_double(*t.p_value) : std::string()) << ',' << csv_escape(t.verdict) << '\n';
    }
    write_text(rc.out / "diagnostics" / "report.txt", txt.str(), st);
    write_text(rc.out / "diagnostics" / "tests.csv", csv.str(), st);
}

namespace {

// Fits `spec` from the features under `root` and archives it there.
fs::path fit_from_dir(const RunConfig& rc, const fs::path& root, const ModelSpec& spec) {
    const Stamp st{rc.raw.hash(), spec.sampler.seed};
    const RawFeatureTable raw = read_raw_features(root / "features" / "raw.csv");
    const CountTable counts = read_counts(root / "features" / "counts.csv");
    const fs::path cpath = require_artifact(root / "connectivity" / (to_string(spec.connectivity) + ".csv"));
    const Eigen::MatrixXd C = read_connectivity_csv(cpath);
    Design d;
    d.features = select_features(raw, FeatureSelection::parse(spec.feature_selection));
    ArchiveRefs refs;
    refs.connectivity = cpath;
    if (spec.variant != Variant::NB_RIDGE)
        d.basis = cached_basis(root, spec, d.features, C, st, refs.eigen_lambdas, refs.eigen_vectors);
    else
        d.basis.E.resize(d.features.X.rows(), 0);
    const ModelFit fit = fit_design(d, counts, C, spec);
    const fs::path dir = root / "fits" / slug(spec.label());
    write_fit_archive(fit, refs, dir, st);
    return dir;
}

EvaluationReport evaluate_dir(const RunConfig& rc, const fs::path& root, const ModelSpec& spec) {
    const fs::path archive = root / "fits" / slug(spec.label());
    if (!fs::exists(archive / "spec.cfg")) throw InputError("missing upstream artifact '" + (archive / "spec.cfg").string() + "'");
    const ModelFit fit = read_fit_archive(archive);
    const Stamp st{rc.raw.hash(), fit.spec.sampler.seed};
    const EvaluationReport r = evaluate(fit, rc.permutation_replicates);
    const fs::path dir = root / "evaluation" / slug(spec.label());
    write_text(dir / "report.txt", format_evaluation(r), st);
    {
        std::ostringstream s;
        s << "core_id,y,elpd_loo,pareto_k,lpd,fixed,random,mu,residual\n";
        for (std::size_t i = 0; i < fit.core_ids.size(); ++i) {
            const auto I = static_cast<Eigen::Index>(i);
            s << csv_escape(fit.core_ids[i]) << ',' << fit.y[i] << ',' << format_double(r.loo.pointwise(I)) << ','
              << format_double(r.loo.pareto_k(I)) << ',' << format_double(r.loo.lpd(I)) << ','
              << format_double(r.decomposition.fixed(I)) << ',' << format_double(r.decomposition.random(I)) << ','
              << format_double(r.decomposition.mu(I)) << ',' << format_double(r.decomposition.residual(I)) << '\n';
        }
        write_text(dir / "pointwise.csv", s.str(), st);
    }
    write_text(dir / "posterior_summary.csv", posterior_summary_csv(fit.samples), st);
    CityDataset city;
    if (fs::exists(data_config(rc))) city = load_run_city(rc).city;
    write_text(dir / "decomposition.geojson", decomposition_geojson(fit, r.decomposition, city, st), st);
    return r;
}

std::vector<ComparisonRow> fit_and_compare(const RunConfig& rc, const std::vector<std::pair<fs::path, ModelSpec>>& jobs) {
    std::vector<std::optional<EvaluationReport>> reports(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                fit_from_dir(rc, jobs[i].first, jobs[i].second);
                reports[i] = evaluate_dir(rc, jobs[i].first, jobs[i].second);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(rc.jobs), jobs.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<ModelFit> fits;
    std::vector<EvaluationReport> reps;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        fits.push_back(read_fit_archive(jobs[i].first / "fits" / slug(jobs[i].second.label())));
        reps.push_back(*reports[i]);
    }
    std::vector<const ModelFit*> ptrs;
    for (const auto& f : fits) ptrs.push_back(&f);
    return compare_models(ptrs, reps);
}

}  // namespace

fs::path stage_fit(const RunConfig& rc, const ModelSpec& spec) { return fit_from_dir(rc, rc.out, spec); }

EvaluationReport stage_evaluate(const RunConfig& rc, const ModelSpec& spec) { return evaluate_dir(rc, rc.out, spec); }

std::vector<ComparisonRow> stage_compare(const RunConfig& rc) {
    if (rc.compare.empty()) throw InputError("field 'compare' lists no model specs");
    for (const auto& s : rc.compare)
        if (s.corehood_radius_m != rc.spec.corehood_radius_m)
            throw InputError("compare entries must share the run radius");
    std::vector<std::pair<fs::path, ModelSpec>> jobs;
    for (const auto& s : rc.compare) jobs.emplace_back(rc.out, s);
    const auto rows = fit_and_compare(rc, jobs);
    write_text(rc.out / "compare.csv", comparison_csv(rows), rc.stamp());
    write_text(rc.out / "compare.txt", format_comparison(rows), rc.stamp());
    return rows;
}

std::vector<ComparisonRow> stage_sweep_radius(const RunConfig& rc) {
    if (rc.sweep_radii.empty()) throw InputError("field 'radii' lists no radius");
    const LoadedCity lc = load_run_city(rc);
    const Stamp st = rc.stamp();
    std::vector<std::pair<fs::path, ModelSpec>> jobs;
    std::map<double, std::size_t> degenerate;
    for (double r : rc.sweep_radii) {
        const fs::path root = rc.out / "sweep" / ("r" + format_double(r));
        const PreparedCity p = prepare_city(lc.city, lc.window, r, rc.crime_buffer_m);
        degenerate[r] = boundary_cores(p.corehoods).size();
        std::string notes;
        for (const auto& w : p.warnings) notes += w + "\n";
        write_text(root / "warnings.txt", notes, st);
        write_raw_features(p.raw, root / "features" / "raw.csv", st);
        write_counts(p.counts, root / "features" / "counts.csv", st);
        fs::create_directories(root / "connectivity");
        const ConnectivityMatrix cm = build_connectivity(rc.spec.connectivity, lc.city, p.corehoods);
        write_connectivity_csv(cm, root / "connectivity" / (to_string(rc.spec.connectivity) + ".csv"), st.line());
        ModelSpec s = rc.spec;
        s.corehood_radius_m = r;
        jobs.emplace_back(root, s);
    }
    const auto rows = fit_and_compare(rc, jobs);
    std::ostringstream csv;
    csv << "radius_m,loo_elpd,loo_se,r2_marginal,r2_conditional,residual_moran,bad_k,degenerate_cores,warning\n";
    for (const auto& row : rows) {
        const std::size_t d = degenerate[row.radius_m];
        csv << format_double(row.radius_m) << ',' << format_double(row.loo_elpd) << ',' << format_double(row.loo_se)
            << ',' << format_double(row.r2_marginal) << ',' << format_double(row.r2_conditional) << ','
            << format_double(row.residual_moran) << ',' << row.bad_k << ',' << d << ','
            << (d ? csv_escape(std::to_string(d) + " cores have fewer than 3 corehood members") : "") << '\n';
    }
    write_text(rc.out / "sweep_radius.csv", csv.str(), st);
    return rows;
}

TransferReport stage_transfer(const RunConfig& rc) {
    if (!rc.transfer_fit) throw InputError("field 'transfer_fit' is required for transfer");
    const ModelFit source = read_fit_archive(*rc.transfer_fit);
    const LoadedCity lc = load_run_city(rc);
    const PreparedCity p = prepare_city(lc.city, lc.window, source.spec.corehood_radius_m, rc.crime_buffer_m);
    const TransferReport t = transfer_evaluate(source, p.raw, p.counts.y);
    std::ostringstream csv;
    csv << "source_model,target_city,r2,log_score\n"
        << csv_escape(source.spec.label()) << ',' << csv_escape(lc.city.name) << ',' << format_double(t.r2) << ','
        << format_double(t.log_score) << '\n';
    write_text(rc.out / "transfer.csv", csv.str(), rc.stamp());
    std::ostringstream pw;
    pw << "core_id,y,prediction,log_score\n";
    for (std::size_t i = 0; i < p.counts.core_ids.size(); ++i) {
        const auto I = static_cast<Eigen::Index>(i);
        pw << csv_escape(p.counts.core_ids[i]) << ',' << p.counts.y[i] << ',' << format_double(t.prediction(I)) << ','
           << format_double(t.pointwise_log_score(I)) << '\n';
    }
    write_text(rc.out / "transfer_pointwise.csv", pw.str(), rc.stamp());
    return t;
}

void run_pipeline(const RunConfig& rc) {
    std::error_code ec;
    fs::remove(rc.out / "FAILED", ec);
    run_stage(rc, "data", [&] { stage_data(rc); });
    run_stage(rc, "features", [&] { stage_features(rc); });
    run_stage(rc, "diagnose", [&] { stage_diagnose(rc); });
    run_stage(rc, "fit", [&] { stage_fit(rc, rc.spec); });
    run_stage(rc, "evaluate", [&] { stage_evaluate(rc, rc.spec); });
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::ostringstream s;
    s << "selection,variant,connectivity,radius_m,r2_marginal,r2_conditional,loo_elpd,loo_se,residual_moran,bad_k\n";
    for (const auto& r : rows)
        s << csv_escape(r.selection) << ',' << to_string(r.variant) << ',' << to_string(r.connectivity) << ','
          << format_double(r.radius_m) << ',' << format_double(r.r2_marginal) << ',' << format_double(r.r2_conditional)
          << ',' << format_double(r.loo_elpd) << ',' << format_double(r.loo_se) << ',' << format_double(r.residual_moran)
          << ',' << r.bad_k << '\n';
    return s.str();
}

std::string format_comparison(const std::vector<ComparisonRow>& rows) {
    std::ostringstream s;
    s << "LOO is the sum of pointwise elpd (negative; larger is better). Rows sorted by LOO.\n";
    s << std::left << std::setw(24) << "selection" << std::setw(10) << "variant" << std::setw(12) << "conn"
      << std::setw(10) << "radius" << std::setw(9) << "R2_m" << std::setw(9) << "R2_c" << std::setw(12) << "LOO"
      << std::setw(9) << "SE" << std::setw(9) << "I_p" << "k>0.7\n";
    for (const auto& r : rows)
        s << std::left << std::setw(24) << r.selection << std::setw(10) << to_string(r.variant) << std::setw(12)
          << to_string(r.connectivity) << std::setw(10) << fmt(r.radius_m, 1) << std::setw(9) << fmt(r.r2_marginal, 3)
          << std::setw(9) << fmt(r.r2_conditional, 3) << std::setw(12) << fmt(r.loo_elpd, 2) << std::setw(9)
          << fmt(r.loo_se, 2) << std::setw(9) << fmt(r.residual_moran, 3) << r.bad_k << "\n";
    return s.str();
}

std::string format_evaluation(const EvaluationReport& r) {
    std::ostringstream s;
    s << "model: " << r.label << "\n";
    s << "LOO is the sum of pointwise elpd (negative; larger is better)\n";
    s << "loo_elpd=" << fmt(r.loo.elpd) << " se=" << fmt(r.loo.se) << " pareto_k>0.7: " << r.loo.bad_k << "\n";
    s << "in_sample_lpd=" << fmt(r.loo.lpd.sum()) << "\n";
    s << "r2_marginal=" << fmt(r.r2.marginal) << " r2_conditional=" << fmt(r.r2.conditional) << "\n";
    s << "r2_marginal_of_means=" << fmt(r.r2.marginal_of_means)
      << " r2_conditional_of_means=" << fmt(r.r2.conditional_of_means) << "\n";
    s << "residual_moran_I_p=" << fmt(r.residual_moran);
    if (r.residual_moran_reference.replicates > 0)
        s << " permutation_interval=[" << fmt(r.residual_moran_reference.lower) << ", "
          << fmt(r.residual_moran_reference.upper) << "] (" << r.residual_moran_reference.replicates << " relabelings)";
    s << "\n";
    s << "max_rhat=" << fmt(r.max_rhat) << " divergences=" << r.divergences << " runtime_s=" << fmt(r.runtime_seconds, 1)
      << "\n";
    return s.str();
}

}  // namespace crimebsf
