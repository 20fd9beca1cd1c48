#include "fal/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fal/adversary.hpp"

namespace fal {

std::size_t FederatedDataset::dim() const {
    for (const auto& c : clients)
        if (!c.points.empty()) return c.points.front().x.size();
    return 0;
}

std::vector<DataPoint> FederatedDataset::flatten() const {
    std::vector<DataPoint> out;
    out.reserve(total_points());
    for (const auto& c : clients) out.insert(out.end(), c.points.begin(), c.points.end());
    return out;
}

Vector sample_manifold_point(RngStream& rng, std::size_t d) {
    if (d < 2) throw std::invalid_argument("sample_manifold_point: d must be >= 2");
    Vector x(d);
    double n = 0.0;
    while (n == 0.0) {
        for (std::size_t i = 0; i + 1 < d; ++i) x[i] = rng.normal();
        n = norm2(std::span<const double>(x.data(), d - 1));
    }
    const double s = std::sqrt(3.0) / 2.0 / n;
    for (std::size_t i = 0; i + 1 < d; ++i) x[i] *= s;
    x[d - 1] = kManifoldLast;
    return x;
}

FederatedDataset gen_separable_sphere(std::size_t n_clients, std::size_t per_client, std::size_t d, double delta,
                                      RngStream& rng, double rho) {
    if (d < 3) throw std::invalid_argument("gen_separable_sphere: d must be >= 3");
    if (!(delta > 0.0 && delta <= 0.5)) throw std::invalid_argument("gen_separable_sphere: delta must be in (0, 1/2]");
    if (n_clients == 0 || per_client == 0)
        throw std::invalid_argument("gen_separable_sphere: need at least one client and one point");

    constexpr std::size_t kMaxRejections = 1'000'000;
    const std::size_t total = n_clients * per_client;
    std::vector<Vector> accepted;
    accepted.reserve(total);
    std::size_t rejections = 0;
    while (accepted.size() < total) {
        Vector x = sample_manifold_point(rng, d);
        const bool ok = std::all_of(accepted.begin(), accepted.end(),
                                    [&](const Vector& a) { return distance2(a, x) >= delta; });
        if (ok) {
            accepted.push_back(std::move(x));
            rejections = 0;
        } else if (++rejections >= kMaxRejections) {
            throw std::runtime_error("gen_separable_sphere: cannot pack " + std::to_string(total) +
                                     " points at separation " + format_double(delta) + " in dimension " +
                                     std::to_string(d) + " (placed " + std::to_string(accepted.size()) + ")");
        }
    }

    FederatedDataset ds;
    ds.mode = DataMode::Theory;
    ds.clients.resize(n_clients);
    for (std::size_t c = 0; c < n_clients; ++c) {
        ds.clients[c].id = c;
        for (std::size_t j = 0; j < per_client; ++j) {
            DataPoint pt{std::move(accepted[c * per_client + j]), rng.uniform(-1.0, 1.0)};
            ds.clients[c].points.push_back(std::move(pt));
        }
    }
    ds.stats = separability_stats(ds, rho);
    return ds;
}

ClusterData gen_gaussian_clusters(const ClusterConfig& cfg, std::size_t n_clients, RngStream& rng) {
    if (!(cfg.scale > 0.0)) throw std::invalid_argument("gen_gaussian_clusters: scale must be > 0");
    if (!(cfg.flip_rate >= 0.0 && cfg.flip_rate < 0.5))
        throw std::invalid_argument("gen_gaussian_clusters: flip_rate must be in [0, 0.5)");
    if (n_clients == 0) throw std::invalid_argument("gen_gaussian_clusters: need at least one client");
    if ((2 * cfg.per_class_train) % n_clients != 0)
        throw std::invalid_argument("gen_gaussian_clusters: training set of " +
                                    std::to_string(2 * cfg.per_class_train) +
                                    " points does not split evenly across " + std::to_string(n_clients) +
                                    " clients");

    struct Tagged {
        DataPoint pt;
        std::size_t cluster;
    };
    auto draw = [&](std::size_t per_class) {
        std::vector<Tagged> out;
        for (std::size_t cls = 0; cls < 2; ++cls) {
            for (std::size_t i = 0; i < per_class; ++i) {
                // Alternate clusters within a class so both are equally represented.
                const std::size_t cluster = 2 * cls + (i % 2);
                const auto& mu = cfg.means[cluster];
                Vector x(2);
                for (std::size_t k = 0; k < 2; ++k) {
                    const double noise = rng.normal();
                    x[k] = cfg.scaling == ClusterScaling::Means ? cfg.scale * mu[k] + noise
                                                                : cfg.scale * (mu[k] + noise);
                }
                out.push_back({DataPoint{std::move(x), cls == 0 ? -1.0 : 1.0}, cluster});
            }
        }
        return out;
    };

    std::vector<Tagged> train = draw(cfg.per_class_train);
    std::vector<Tagged> test = draw(cfg.per_class_test);
    for (auto& t : train)
        if (rng.uniform01() < cfg.flip_rate) t.pt.y = -t.pt.y;

    rng.shuffle(train);
    if (cfg.shard_by_cluster)
        std::stable_sort(train.begin(), train.end(),
                         [](const Tagged& a, const Tagged& b) { return a.cluster < b.cluster; });

    ClusterData out;
    out.train.mode = DataMode::Experiment;
    const std::size_t per_client = train.size() / n_clients;
    out.train.clients.resize(n_clients);
    for (std::size_t c = 0; c < n_clients; ++c) {
        out.train.clients[c].id = c;
        for (std::size_t j = 0; j < per_client; ++j)
            out.train.clients[c].points.push_back(std::move(train[c * per_client + j].pt));
    }
    out.train.stats = separability_stats(out.train, 0.0);
    for (auto& t : test) out.test.push_back(std::move(t.pt));
    return out;
}

SeparabilityStats separability_stats(const std::vector<DataPoint>& points, double rho) {
    if (points.empty()) throw std::invalid_argument("separability_stats: empty dataset");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            best = std::min(best, distance2(points[i].x, points[j].x));
    SeparabilityStats s;
    s.delta_min = best;
    s.gamma_bound = best * (best - 2.0 * rho);
    return s;
}

SeparabilityStats separability_stats(const FederatedDataset& ds, double rho) {
    return separability_stats(ds.flatten(), rho);
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

void write_rows(std::ostream& os, std::size_t client, const std::vector<DataPoint>& points) {
    for (std::size_t j = 0; j < points.size(); ++j) {
        os << client << ',' << j << ',' << format_double(points[j].y);
        for (double v : points[j].x) os << ',' << format_double(v);
        os << '\n';
    }
}

void write_header(std::ostream& os, std::size_t d) {
    os << "client,index,y";
    for (std::size_t i = 0; i < d; ++i) os << ",x" << i;
    os << '\n';
}

[[noreturn]] void parse_error(std::size_t line, const std::string& what) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& field, std::size_t line) {
    if (field.empty()) parse_error(line, "empty field");
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || !std::isfinite(v)) parse_error(line, "bad number '" + field + "'");
    return v;
}

std::size_t parse_index(const std::string& field, std::size_t line) {
    if (field.empty() || field.find_first_not_of("0123456789") != std::string::npos)
        parse_error(line, "bad index '" + field + "'");
    return std::stoull(field);
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, ',')) out.push_back(cur);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::string to_csv(const FederatedDataset& ds) {
    std::ostringstream os;
    write_header(os, ds.dim());
    for (const auto& c : ds.clients) write_rows(os, c.id, c.points);
    return os.str();
}

void save_csv(const FederatedDataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << to_csv(ds);
}

void save_csv(const std::vector<DataPoint>& points, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_header(os, points.empty() ? 0 : points.front().x.size());
    write_rows(os, 0, points);
}

FederatedDataset parse_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(is, line)) parse_error(1, "empty file");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split(line);
    if (header.size() < 4 || header[0] != "client" || header[1] != "index" || header[2] != "y")
        parse_error(lineno, "header must be 'client,index,y,x0,...'");
    const std::size_t d = header.size() - 3;
    for (std::size_t i = 0; i < d; ++i)
        if (header[3 + i] != "x" + std::to_string(i)) parse_error(lineno, "header column '" + header[3 + i] + "'");

    std::map<std::size_t, std::vector<std::pair<std::size_t, DataPoint>>> by_client;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line);
        if (fields.size() != d + 3)
            parse_error(lineno, "expected " + std::to_string(d + 3) + " fields, got " + std::to_string(fields.size()));
        DataPoint pt;
        const std::size_t client = parse_index(fields[0], lineno);
        const std::size_t index = parse_index(fields[1], lineno);
        pt.y = parse_number(fields[2], lineno);
        pt.x.resize(d);
        for (std::size_t i = 0; i < d; ++i) pt.x[i] = parse_number(fields[3 + i], lineno);
        by_client[client].emplace_back(index, std::move(pt));
    }
    if (by_client.empty()) parse_error(lineno, "no data rows");

    FederatedDataset ds;
    std::size_t per_client = by_client.begin()->second.size();
    for (auto& [client, rows] : by_client) {
        if (rows.size() != per_client)
            parse_error(lineno, "client " + std::to_string(client) + " has " + std::to_string(rows.size()) +
                                    " points, expected " + std::to_string(per_client));
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        ClientDataset c;
        c.id = client;
        for (std::size_t j = 0; j < rows.size(); ++j) {
            if (rows[j].first != j)
                parse_error(lineno, "client " + std::to_string(client) + " indices are not 0.." +
                                        std::to_string(per_client - 1));
            c.points.push_back(std::move(rows[j].second));
        }
        ds.clients.push_back(std::move(c));
    }
    bool theory = d >= 2;
    for (const auto& c : ds.clients)
        for (const auto& p : c.points) theory = theory && on_manifold(p.x) && std::abs(p.y) <= 1.0;
    ds.mode = theory ? DataMode::Theory : DataMode::Experiment;
    ds.stats = separability_stats(ds, 0.0);
    return ds;
}

FederatedDataset load_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_csv(ss.str());
}

}  // namespace fal
