#include "crimebsf/archive.hpp"

#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "crimebsf/csv.hpp"
#include "crimebsf/errors.hpp"
#include "crimebsf/spatial_filter.hpp"

namespace crimebsf {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, const Stamp& stamp) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ComputeError("cannot write '" + path.string() + "'");
    out << stamp.line() << '\n';
    return out;
}

fs::path require_file(const fs::path& p) {
    if (!fs::exists(p)) throw InputError("missing artifact '" + p.string() + "'");
    return p;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + format_double(v[i]);
    return s;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& part : split(s, ';')) {
        if (trim(part).empty()) continue;
        try {
            out.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw InputError("malformed number list in '" + what + "'");
        }
    }
    return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q : base / q;
}

std::string relative_to(const fs::path& target, const fs::path& base) {
    if (target.empty()) return "";
    const auto rel = fs::relative(fs::absolute(target), fs::absolute(base));
    return rel.empty() ? fs::absolute(target).string() : rel.generic_string();
}

constexpr char kLoglikMagic[8] = {'C', 'B', 'S', 'F', 'L', 'L', '1', '\0'};

void write_matrix_bin(const Eigen::MatrixXd& m, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ComputeError("cannot write '" + path.string() + "'");
    const std::int64_t dims[2] = {m.rows(), m.cols()};
    out.write(kLoglikMagic, sizeof kLoglikMagic);
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd read_matrix_bin(const fs::path& path) {
    std::ifstream in(require_file(path), std::ios::binary);
    char magic[8];
    std::int64_t dims[2];
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    if (!in || std::memcmp(magic, kLoglikMagic, sizeof magic) != 0 || dims[0] < 0 || dims[1] < 0)
        throw InputError(path.string() + ": not a pointwise log-likelihood file");
    Eigen::MatrixXd m(dims[0], dims[1]);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw InputError(path.string() + ": truncated");
    return m;
}

}  // namespace

std::string Stamp::line() const { return "# config_hash=" + config_hash + " seed=" + std::to_string(seed); }

void write_text(const fs::path& path, const std::string& content, const Stamp& stamp) {
    auto out = open_out(path, stamp);
    out << content;
}

void write_raw_features(const RawFeatureTable& raw, const fs::path& path, const Stamp& stamp) {
    auto out = open_out(path, stamp);
    out << "core_id";
    for (const auto& n : raw.names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < raw.core_ids.size(); ++i) {
        out << csv_escape(raw.core_ids[i]);
        for (Eigen::Index j = 0; j < raw.values.cols(); ++j)
            out << ',' << format_double(raw.values(static_cast<Eigen::Index>(i), j));
        out << '\n';
    }
}

RawFeatureTable read_raw_features(const fs::path& path) {
    const CsvTable t = CsvTable::read(require_file(path));
    const auto id = t.require_column("core_id");
    std::map<std::string, FeatureGroup> known;
    for (const auto& [n, g] : feature_catalogue()) known[n] = g;
    RawFeatureTable raw;
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < t.header().size(); ++c) {
        if (c == id) continue;
        const auto it = known.find(t.header()[c]);
        if (it == known.end()) throw InputError(path.string() + ": unknown feature column '" + t.header()[c] + "'");
        raw.names.push_back(it->first);
        raw.groups.push_back(it->second);
        cols.push_back(c);
    }
    raw.values.resize(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < t.rows(); ++r) {
        raw.core_ids.push_back(t.cell(r, id));
        for (std::size_t j = 0; j < cols.size(); ++j)
            raw.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = t.number(r, cols[j]);
    }
    return raw;
}

void write_feature_matrix(const FeatureMatrix& fm, const fs::path& path, const Stamp& stamp) {
    auto out = open_out(path, stamp);
    out << "core_id";
    for (const auto& n : fm.names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < fm.core_ids.size(); ++i) {
        out << csv_escape(fm.core_ids[i]);
        for (Eigen::Index j = 0; j < fm.X.cols(); ++j) out << ',' << format_double(fm.X(static_cast<Eigen::Index>(i), j));
        out << '\n';
    }
}

void write_counts(const CountTable& c, const fs::path& path, const Stamp& stamp) {
    auto out = open_out(path, stamp);
    out << "core_id,violent,property,total,y\n";
    for (std::size_t i = 0; i < c.core_ids.size(); ++i)
        out << csv_escape(c.core_ids[i]) << ',' << format_double(c.violent[i]) << ',' << format_double(c.property[i])
            << ',' << format_double(c.total[i]) << ',' << c.y[i] << '\n';
}

CountTable read_counts(const fs::path& path) {
    const CsvTable t = CsvTable::read(require_file(path));
    const auto id = t.require_column("core_id"), v = t.require_column("violent"), p = t.require_column("property"),
               tot = t.require_column("total"), y = t.require_column("y");
    CountTable c;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        c.core_ids.push_back(t.cell(r, id));
        c.violent.push_back(t.number(r, v));
        c.property.push_back(t.number(r, p));
        c.total.push_back(t.number(r, tot));
        const auto yi = t.integer(r, y);
        if (yi < 0) throw InputError(path.string() + ":" + std::to_string(t.line(r)) + ": negative count");
        c.y.push_back(static_cast<int>(yi));
    }
    return c;
}

std::string data_fingerprint(const std::vector<int>& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& E) {
    std::string bytes;
    auto add = [&](const void* p, std::size_t n) { bytes.append(static_cast<const char*>(p), n); };
    add(y.data(), y.size() * sizeof(int));
    for (const Eigen::MatrixXd* m : {&X, &E}) {
        const std::int64_t dims[2] = {m->rows(), m->cols()};
        add(dims, sizeof dims);
        add(m->data(), static_cast<std::size_t>(m->size()) * sizeof(double));
    }
    return hex64(fnv1a64(bytes));
}

KeyValueConfig spec_to_config(const ModelSpec& spec) {
    KeyValueConfig c;
    const auto& s = spec.sampler;
    const auto& p = spec.prior;
    c.set("variant", to_string(spec.variant));
    c.set("features", spec.feature_selection);
    c.set("connectivity", to_string(spec.connectivity));
    c.set("radius_m", format_double(spec.corehood_radius_m));
    c.set("eigen_threshold", format_double(spec.eigen_threshold));
    c.set("chains", std::to_string(s.chains));
    c.set("warmup", std::to_string(s.warmup));
    c.set("iterations", std::to_string(s.iterations));
    c.set("seed", std::to_string(s.seed));
    c.set("max_rhat", format_double(s.max_rhat));
    c.set("max_divergence_fraction", format_double(s.max_divergence_fraction));
    c.set("require_convergence", s.require_convergence ? "true" : "false");
    c.set("max_depth", std::to_string(s.max_depth));
    c.set("target_accept", format_double(s.target_accept));
    c.set("rho_parameterization", p.rho_rate_parameterization ? "rate" : "scale");
    c.set("rho_shape", format_double(p.rho_shape));
    c.set("rho_param", format_double(p.rho_param));
    c.set("phi_scale", format_double(p.phi_scale));
    c.set("tau_scale", format_double(p.tau_scale));
    c.set("nu_shape", format_double(p.nu_shape));
    c.set("nu_rate", format_double(p.nu_rate));
    c.set("nu_max", format_double(p.nu_max));
    c.set("omega_inv_shape", format_double(p.omega_inv_shape));
    c.set("omega_inv_rate", format_double(p.omega_inv_rate));
    return c;
}

ModelSpec spec_from_config(const KeyValueConfig& cfg, ModelSpec base) {
    ModelSpec spec = std::move(base);
    const std::string where = cfg.origin().empty() ? "config" : cfg.origin();
    if (auto v = cfg.get("variant")) {
        auto p = parse_variant(*v);
        if (!p) throw InputError(where + ": field 'variant' has unknown value '" + *v + "'");
        spec.variant = *p;
    }
    if (auto v = cfg.get("features")) {
        FeatureSelection::parse(*v);
        spec.feature_selection = *v;
    }
    if (auto v = cfg.get("connectivity")) {
        auto p = parse_connectivity_kind(*v);
        if (!p) throw InputError(where + ": field 'connectivity' has unknown value '" + *v + "'");
        spec.connectivity = *p;
    }
    spec.corehood_radius_m = cfg.get_double("radius_m", spec.corehood_radius_m);
    if (!(spec.corehood_radius_m > 0.0)) throw InputError(where + ": field 'radius_m' must be positive");
    spec.eigen_threshold = cfg.get_double("eigen_threshold", spec.eigen_threshold);
    if (!(spec.eigen_threshold >= 0.0 && spec.eigen_threshold <= 1.0))
        throw InputError(where + ": field 'eigen_threshold' must lie in [0, 1]");

    auto& s = spec.sampler;
    if (auto v = cfg.get("profile")) {
        if (*v == "paper") {
            s.warmup = SamplerSettings::paper().warmup;
            s.iterations = SamplerSettings::paper().iterations;
        } else if (*v == "desk") {
            s.warmup = SamplerSettings::desk().warmup;
            s.iterations = SamplerSettings::desk().iterations;
        } else {
            throw InputError(where + ": field 'profile' must be paper or desk");
        }
    }
    s.chains = static_cast<int>(cfg.get_int("chains", s.chains));
    s.warmup = static_cast<int>(cfg.get_int("warmup", s.warmup));
    s.iterations = static_cast<int>(cfg.get_int("iterations", s.iterations));
    s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(s.seed)));
    s.max_rhat = cfg.get_double("max_rhat", s.max_rhat);
    s.max_divergence_fraction = cfg.get_double("max_divergence_fraction", s.max_divergence_fraction);
    s.require_convergence = cfg.get_bool("require_convergence", s.require_convergence);
    s.max_depth = static_cast<int>(cfg.get_int("max_depth", s.max_depth));
    s.target_accept = cfg.get_double("target_accept", s.target_accept);
    if (s.chains < 1) throw InputError(where + ": field 'chains' must be at least 1");
    if (s.warmup < 0 || s.iterations < 1) throw InputError(where + ": fields 'warmup'/'iterations' out of range");
    if (s.max_depth < 1 || s.max_depth > 20) throw InputError(where + ": field 'max_depth' must lie in [1, 20]");
    if (!(s.target_accept > 0.0 && s.target_accept < 1.0))
        throw InputError(where + ": field 'target_accept' must lie in (0, 1)");

    auto& p = spec.prior;
    if (auto v = cfg.get("rho_parameterization")) {
        if (*v == "rate") p.rho_rate_parameterization = true;
        else if (*v == "scale") p.rho_rate_parameterization = false;
        else throw InputError(where + ": field 'rho_parameterization' must be rate or scale");
    }
    const std::pair<const char*, double*> positive[] = {
        {"rho_shape", &p.rho_shape},     {"rho_param", &p.rho_param},   {"phi_scale", &p.phi_scale},
        {"tau_scale", &p.tau_scale},     {"nu_shape", &p.nu_shape},     {"nu_rate", &p.nu_rate},
        {"nu_max", &p.nu_max},           {"omega_inv_shape", &p.omega_inv_shape},
        {"omega_inv_rate", &p.omega_inv_rate}};
    for (const auto& [key, dst] : positive) {
        *dst = cfg.get_double(key, *dst);
        if (!(*dst > 0.0)) throw InputError(where + ": field '" + key + "' must be positive");
    }
    return spec;
}

void write_fit_archive(const ModelFit& fit, const ArchiveRefs& refs, const fs::path& dir, const Stamp& stamp) {
    fs::create_directories(dir);
    const auto& s = fit.samples;
    {
        KeyValueConfig c = spec_to_config(fit.spec);
        c.set("fingerprint", fit.fingerprint);
        c.set("eigen_lambdas", relative_to(refs.eigen_lambdas, dir));
        c.set("eigen_vectors", relative_to(refs.eigen_vectors, dir));
        c.set("connectivity_matrix", relative_to(refs.connectivity, dir));
        write_text(dir / "spec.cfg", c.canonical(), stamp);
    }
    {
        auto out = open_out(dir / "data.csv", stamp);
        out << "core_id,y,y_unrounded\n";
        for (std::size_t i = 0; i < fit.y.size(); ++i)
            out << csv_escape(fit.core_ids[i]) << ',' << fit.y[i] << ','
                << format_double(i < fit.y_unrounded.size() ? fit.y_unrounded[i] : fit.y[i]) << '\n';
    }
    {
        FeatureMatrix fm;
        fm.core_ids = fit.core_ids;
        fm.names = fit.feature_names;
        fm.X = fit.X;
        write_feature_matrix(fm, dir / "design.csv", stamp);
    }
    {
        auto out = open_out(dir / "standardization.csv", stamp);
        out << "feature,mean,sd\n";
        for (std::size_t j = 0; j < fit.feature_names.size(); ++j) {
            const auto J = static_cast<Eigen::Index>(j);
            out << fit.feature_names[j] << ',' << format_double(fit.feature_means(J)) << ','
                << format_double(fit.feature_sds(J)) << '\n';
        }
    }
    {
        auto out = open_out(dir / "draws.csv", stamp);
        out << "chain";
        for (const auto& n : s.names) out << ',' << csv_escape(n);
        out << '\n';
        for (Eigen::Index r = 0; r < s.draws.rows(); ++r) {
            out << s.chain_ids[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < s.draws.cols(); ++c) out << ',' << format_double(s.draws(r, c));
            out << '\n';
        }
    }
    write_matrix_bin(s.pointwise_loglik, dir / "pointwise_loglik.bin");
    {
        auto out = open_out(dir / "sampler.csv", stamp);
        out << "parameter,rhat\n";
        for (std::size_t j = 0; j < s.names.size(); ++j)
            out << csv_escape(s.names[j]) << ',' << format_double(s.rhat[j]) << '\n';
    }
    {
        KeyValueConfig c;
        c.set("variant", to_string(s.variant));
        c.set("seed", std::to_string(s.seed));
        c.set("chains", std::to_string(s.chains));
        c.set("iterations", std::to_string(s.iterations));
        c.set("num_beta", std::to_string(s.num_beta));
        c.set("num_gamma", std::to_string(s.num_gamma));
        c.set("max_rhat", format_double(s.max_rhat));
        c.set("divergences", std::to_string(s.divergences));
        c.set("warmup_divergences", std::to_string(s.warmup_divergences));
        c.set("max_depth_hits", std::to_string(s.max_depth_hits));
        c.set("step_sizes", join_doubles(s.step_sizes));
        c.set("runtime_seconds", format_double(s.runtime_seconds));
        std::string w;
        for (const auto& x : s.warnings) w += (w.empty() ? "" : " | ") + x;
        c.set("warnings", w);
        write_text(dir / "sampler.cfg", c.canonical(), stamp);
    }
}

ModelFit read_fit_archive(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("missing fit archive '" + dir.string() + "'");
    ModelFit fit;
    const auto spec_cfg = KeyValueConfig::load(require_file(dir / "spec.cfg"));
    fit.spec = spec_from_config(spec_cfg);
    fit.fingerprint = spec_cfg.require("fingerprint");

    const CsvTable data = CsvTable::read(require_file(dir / "data.csv"));
    const auto id_c = data.require_column("core_id"), y_c = data.require_column("y"),
               yu_c = data.require_column("y_unrounded");
    for (std::size_t r = 0; r < data.rows(); ++r) {
        fit.core_ids.push_back(data.cell(r, id_c));
        fit.y.push_back(static_cast<int>(data.integer(r, y_c)));
        fit.y_unrounded.push_back(data.number(r, yu_c));
    }
    const auto N = static_cast<Eigen::Index>(fit.y.size());

    const CsvTable design = CsvTable::read(require_file(dir / "design.csv"));
    fit.X.resize(N, static_cast<Eigen::Index>(design.header().size()) - 1);
    for (std::size_t c = 1; c < design.header().size(); ++c) fit.feature_names.push_back(design.header()[c]);
    if (static_cast<Eigen::Index>(design.rows()) != N) throw InputError(dir.string() + ": design rows do not match data");
    for (std::size_t r = 0; r < design.rows(); ++r)
        for (std::size_t c = 1; c < design.header().size(); ++c)
            fit.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = design.number(r, c);

    const CsvTable stdz = CsvTable::read(require_file(dir / "standardization.csv"));
    fit.feature_means.resize(static_cast<Eigen::Index>(stdz.rows()));
    fit.feature_sds.resize(static_cast<Eigen::Index>(stdz.rows()));
    for (std::size_t r = 0; r < stdz.rows(); ++r) {
        fit.feature_means(static_cast<Eigen::Index>(r)) = stdz.number(r, stdz.require_column("mean"));
        fit.feature_sds(static_cast<Eigen::Index>(r)) = stdz.number(r, stdz.require_column("sd"));
    }

    auto& s = fit.samples;
    const CsvTable draws = CsvTable::read(require_file(dir / "draws.csv"));
    s.names.assign(draws.header().begin() + 1, draws.header().end());
    s.draws.resize(static_cast<Eigen::Index>(draws.rows()), static_cast<Eigen::Index>(s.names.size()));
    for (std::size_t r = 0; r < draws.rows(); ++r) {
        s.chain_ids.push_back(static_cast<int>(draws.integer(r, 0)));
        for (std::size_t c = 0; c < s.names.size(); ++c)
            s.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = draws.number(r, c + 1);
    }
    s.pointwise_loglik = read_matrix_bin(dir / "pointwise_loglik.bin");
    if (s.pointwise_loglik.rows() != s.draws.rows() || s.pointwise_loglik.cols() != N)
        throw InputError(dir.string() + ": pointwise log-likelihood has the wrong shape");
    const CsvTable rh = CsvTable::read(require_file(dir / "sampler.csv"));
    for (std::size_t r = 0; r < rh.rows(); ++r) s.rhat.push_back(rh.number(r, rh.require_column("rhat")));
    const auto sc = KeyValueConfig::load(require_file(dir / "sampler.cfg"));
    s.variant = fit.spec.variant;
    s.seed = static_cast<std::uint64_t>(sc.get_int("seed", 0));
    s.chains = static_cast<int>(sc.get_int("chains", 0));
    s.iterations = static_cast<int>(sc.get_int("iterations", 0));
    s.num_beta = static_cast<int>(sc.get_int("num_beta", 0));
    s.num_gamma = static_cast<int>(sc.get_int("num_gamma", 0));
    s.max_rhat = sc.get_double("max_rhat", 0.0);
    s.divergences = static_cast<int>(sc.get_int("divergences", 0));
    s.warmup_divergences = static_cast<int>(sc.get_int("warmup_divergences", 0));
    s.max_depth_hits = static_cast<int>(sc.get_int("max_depth_hits", 0));
    s.step_sizes = parse_doubles(sc.get_or("step_sizes", ""), "step_sizes");
    s.runtime_seconds = sc.get_double("runtime_seconds", 0.0);
    const std::string w = sc.get_or("warnings", "");
    if (!w.empty()) {
        std::size_t pos = 0;
        while (true) {
            const auto next = w.find(" | ", pos);
            s.warnings.push_back(w.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
            if (next == std::string::npos) break;
            pos = next + 3;
        }
    }
    if (s.num_beta != static_cast<int>(fit.feature_names.size()))
        throw InputError(dir.string() + ": draws do not match the design columns");

    if (fit.spec.variant != Variant::NB_RIDGE) {
        const auto lam = spec_cfg.require("eigen_lambdas");
        const auto vec = spec_cfg.require("eigen_vectors");
        const EigenBasis b = read_eigenbasis_csv(require_file(resolve(dir, lam)), require_file(resolve(dir, vec)));
        fit.E = b.E;
        fit.lambdas = b.lambdas;
    } else {
        fit.E.resize(N, 0);
    }
    if (data_fingerprint(fit.y, fit.X, fit.E) != fit.fingerprint)
        throw InputError(dir.string() + ": eigenbasis or data changed since the fit (fingerprint mismatch)");
    if (auto conn = spec_cfg.get("connectivity_matrix"); conn && !conn->empty()) {
        const fs::path p = resolve(dir, *conn);
        if (fs::exists(p)) fit.W = read_connectivity_csv(p);
    }
    return fit;
}

std::string slug(const std::string& label) {
    std::string out;
    for (char c : label) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') out.push_back(c);
        else if (c == '+') out += "+";
        else out.push_back('_');
    }
    return out;
}

}  // namespace crimebsf
