#include "crimebsf/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "crimebsf/csv.hpp"
#include "crimebsf/errors.hpp"
#include "crimebsf/kernels.hpp"

namespace crimebsf {

std::string to_string(ConnectivityKind k) {
    switch (k) {
        case ConnectivityKind::Contiguity: return "contiguity";
        case ConnectivityKind::Distance: return "distance";
        case ConnectivityKind::Mobility: return "mobility";
    }
    return "?";
}

std::optional<ConnectivityKind> parse_connectivity_kind(const std::string& s) {
    if (s == "contiguity") return ConnectivityKind::Contiguity;
    if (s == "distance") return ConnectivityKind::Distance;
    if (s == "mobility") return ConnectivityKind::Mobility;
    return std::nullopt;
}

ConnectivityMatrix contiguity_matrix(const std::vector<Corehood>& corehoods) {
    const auto n = static_cast<Eigen::Index>(corehoods.size());
    ConnectivityMatrix out;
    out.kind = ConnectivityKind::Contiguity;
    out.C = Eigen::MatrixXd::Zero(n, n);
    // Members are sorted, so a merge walk detects a shared unit.
    auto overlap = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        std::size_t i = 0, j = 0;
        while (i < a.size() && j < b.size()) {
            if (a[i] == b[j]) return true;
            if (a[i] < b[j]) ++i;
            else ++j;
        }
        return false;
    };
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (overlap(corehoods[i].members, corehoods[j].members)) out.C(i, j) = out.C(j, i) = 1.0;
    return out;
}

double mst_threshold(const Eigen::MatrixXd& dist) {
    const auto n = dist.rows();
    if (n < 2) throw InputError("distance connectivity needs at least 2 cores");
    std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
    std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    best[0] = 0.0;
    double longest = 0.0;
    for (Eigen::Index step = 0; step < n; ++step) {
        Eigen::Index pick = -1;
        for (Eigen::Index v = 0; v < n; ++v)
            if (!in_tree[v] && (pick < 0 || best[v] < best[pick])) pick = v;
        in_tree[pick] = true;
        longest = std::max(longest, best[pick]);
        for (Eigen::Index v = 0; v < n; ++v)
            if (!in_tree[v] && dist(pick, v) < best[v]) best[v] = dist(pick, v);
    }
    return longest;
}

ConnectivityMatrix distance_matrix(const std::vector<Point>& centroids) {
    const auto n = static_cast<Eigen::Index>(centroids.size());
    if (n < 2) throw InputError("distance connectivity needs at least 2 cores");
    Eigen::MatrixXd d(n, n);
    // Row-major fill into a column-major matrix of a symmetric quantity.
    kernels::euclidean_distances(Backend::OpenMP, centroids, std::span<double>(d.data(), static_cast<std::size_t>(n * n)));
    ConnectivityMatrix out;
    out.kind = ConnectivityKind::Distance;
    out.threshold_m = mst_threshold(d);
    if (!(out.threshold_m > 0.0)) throw InputError("distance connectivity needs at least 2 distinct centroids");
    out.C = Eigen::MatrixXd::Zero(n, n);
    std::size_t duplicates = 0;
    const double t4 = 4.0 * out.threshold_m;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dij = d(i, j);
            if (dij > out.threshold_m) continue;
            if (dij == 0.0) ++duplicates;
            const double r = dij / t4;
            out.C(i, j) = out.C(j, i) = 1.0 - r * r;
        }
    if (duplicates > 0)
        out.warnings.push_back(std::to_string(duplicates) + " pairs of cores share a centroid (weight 1)");
    return out;
}

ConnectivityMatrix mobility_matrix(const std::vector<Trip>& trips, const std::vector<SpatialUnit>& units,
                                   const std::vector<Corehood>& corehoods, int days) {
    if (days <= 0) throw InputError("mobility_days must be positive");
    const auto n = static_cast<Eigen::Index>(corehoods.size());
    std::vector<Eigen::Index> row_of(units.size(), -1);
    for (Eigen::Index r = 0; r < n; ++r) row_of[corehoods[r].core] = r;
    const auto boxes = unit_boxes(units);

    ConnectivityMatrix out;
    out.kind = ConnectivityKind::Mobility;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    std::size_t skipped = 0;
    for (const auto& t : trips) {
        const auto a = locate_unit(units, boxes, t.origin);
        const auto b = locate_unit(units, boxes, t.destination);
        if (!a || !b || row_of[*a] < 0 || row_of[*b] < 0) {
            ++skipped;
            continue;
        }
        T(row_of[*a], row_of[*b]) += 1.0;
    }
    T /= static_cast<double>(days);
    out.C = 0.5 * (T + T.transpose());
    out.C.diagonal().setZero();
    if (skipped > 0) out.warnings.push_back(std::to_string(skipped) + " trips could not be resolved to cores");
    if (trips.empty()) out.warnings.push_back("no trips: mobility connectivity is all zero");
    return out;
}

Eigen::MatrixXd laplacian(const Eigen::MatrixXd& C) {
    Eigen::MatrixXd Q = -C;
    Q.diagonal() = C.rowwise().sum() - C.diagonal();
    return Q;
}

ConnectivityMatrix build_connectivity(ConnectivityKind kind, const CityDataset& city,
                                      const std::vector<Corehood>& corehoods) {
    switch (kind) {
        case ConnectivityKind::Contiguity: return contiguity_matrix(corehoods);
        case ConnectivityKind::Distance: {
            std::vector<Point> c;
            for (const auto& ch : corehoods) c.push_back(city.units[ch.core].centroid);
            return distance_matrix(c);
        }
        case ConnectivityKind::Mobility: return mobility_matrix(city.trips, city.units, corehoods, city.mobility_days);
    }
    throw InputError("unknown connectivity kind");
}

void write_connectivity_csv(const ConnectivityMatrix& c, const std::filesystem::path& path, const std::string& stamp) {
    std::ofstream out(path);
    if (!out) throw ComputeError("cannot write '" + path.string() + "'");
    if (!stamp.empty()) out << stamp << '\n';
    const auto n = c.C.rows();
    if (n <= 2000) {
        for (Eigen::Index j = 0; j < n; ++j) out << (j ? "," : "") << 'c' << j;
        out << '\n';
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) out << (j ? "," : "") << format_double(c.C(i, j));
            out << '\n';
        }
    } else {
        out << "i,j,value\n";
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (c.C(i, j) != 0.0 || (i == n - 1 && j == n - 1))
                    out << i << ',' << j << ',' << format_double(c.C(i, j)) << '\n';
    }
}

Eigen::MatrixXd read_connectivity_csv(const std::filesystem::path& path) {
    const CsvTable t = CsvTable::read(path);
    if (t.header().size() == 3 && t.header()[0] == "i" && t.header()[1] == "j") {
        Eigen::Index n = 0;
        for (std::size_t r = 0; r < t.rows(); ++r)
            n = std::max<Eigen::Index>(n, std::max(t.integer(r, 0), t.integer(r, 1)) + 1);
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t r = 0; r < t.rows(); ++r) {
            const auto i = t.integer(r, 0), j = t.integer(r, 1);
            if (i < 0 || j < 0) throw InputError(path.string() + ": negative index");
            C(i, j) = t.number(r, 2);
        }
        return C;
    }
    const auto n = static_cast<Eigen::Index>(t.header().size());
    if (static_cast<Eigen::Index>(t.rows()) != n)
        throw InputError(path.string() + ": connectivity matrix is not square");
    Eigen::MatrixXd C(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            C(i, j) = t.number(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return C;
}

}  // namespace crimebsf
