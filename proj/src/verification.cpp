#include "fal/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fal/data.hpp"
#include "fal/parallel.hpp"

namespace fal {

// ---------------------------------------------------------------------------
// StudyReport and small statistics

bool StudyReport::passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string StudyReport::csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_double(row[i]);
        os << '\n';
    }
    return os.str();
}

nlohmann::ordered_json StudyReport::json() const {
    nlohmann::ordered_json j;
    j["study"] = name;
    j["summary"] = summary;
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    j["pass"] = passed();
    return j;
}

void StudyReport::add_check(std::string check_name, bool pass, std::string detail) {
    checks.push_back({std::move(check_name), pass, std::move(detail)});
}

double loglog_slope(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 paired values");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(xs.size());
    std::vector<double> lx(xs.size()), ly(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
        mx += lx[i] / n;
        my += ly[i] / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

double max_min_ratio(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("max_min_ratio: no values");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (!(*lo > 0.0)) return std::numeric_limits<double>::infinity();
    return *hi / *lo;
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: no values");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::size_t nonincreasing_steps(std::span<const double> values) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i)
        if (values[i + 1] <= values[i]) ++n;
    return n;
}

namespace {

void require_grid(const std::vector<std::size_t>& grid) {
    if (grid.size() < 2) throw std::invalid_argument("study: width grid needs at least two entries");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (grid[i + 1] <= grid[i]) throw std::invalid_argument("study: width grid must be strictly increasing");
}

std::vector<double> as_doubles(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

nlohmann::ordered_json to_json(std::span<const double> v) {
    auto j = nlohmann::ordered_json::array();
    for (double x : v) j.push_back(x);
    return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Uniform approximation

namespace {

struct GapTerms {
    double f = 0.0;   // f_U(x)
    double g = 0.0;   // g_U(x)
    double f0 = 0.0;  // f_{U(0)}(x)
};

// f, g and the initial output in one pass over the columns.
GapTerms gap_terms(const NetParams& p, const InitAnchor& anchor, std::span<const double> x) {
    const std::size_t d = p.dim();
    if (x.size() != d) throw std::invalid_argument("sup_gap: input dimension mismatch");
    GapTerms t;
    for (std::size_t r = 0; r < p.width(); ++r) {
        const double* u = p.hidden.col(r).data();
        const double* u0 = anchor.hidden0.col(r).data();
        double z = p.bias[r], z0 = anchor.bias0[r], lin = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            z += u[i] * x[i];
            z0 += u0[i] * x[i];
            lin += (u[i] - u0[i]) * x[i];
        }
        const double a = p.output[r];
        if (z >= 0.0) t.f += a * z;
        if (z0 >= 0.0) {
            t.g += a * lin;
            t.f0 += a * z0;
        }
    }
    return t;
}

}  // namespace

double sup_gap(const NetParams& p, const InitAnchor& anchor, std::span<const Vector> xs) {
    if (anchor.hidden0.rows() != p.dim() || anchor.hidden0.cols() != p.width())
        throw std::invalid_argument("sup_gap: anchor does not match the network");
    double best = 0.0;
    for (const auto& x : xs) {
        const GapTerms t = gap_terms(p, anchor, x);
        best = std::max(best, std::abs(t.f - t.g));
    }
    return best;
}

void displace_columns(NetParams& p, const InitAnchor& anchor, double step, RngStream& rng) {
    const std::size_t d = p.dim();
    for (std::size_t r = 0; r < p.width(); ++r) {
        Vector dir(d);
        double n = 0.0;
        while (n == 0.0) {
            for (double& v : dir) v = rng.normal();
            n = norm2(dir);
        }
        auto col = p.hidden.col(r);
        auto col0 = anchor.hidden0.col(r);
        for (std::size_t i = 0; i < d; ++i) col[i] = col0[i] + step * dir[i] / n;
    }
}

StudyReport uniform_approx_study(const UniformApproxOptions& opt) {
    require_grid(opt.m_grid);
    if (opt.radius < 1.0) throw std::invalid_argument("uniform_approx_study: radius must be >= 1");
    if (opt.seeds == 0 || opt.n_samples == 0) throw std::invalid_argument("uniform_approx_study: empty sampling");
    for (std::size_t m : opt.m_grid)
        if (m < opt.d) throw std::invalid_argument("uniform_approx_study: every width must be >= d");

    const std::size_t G = opt.m_grid.size();
    const RngStream base(opt.seed, 0x5A9);
    struct Cell {
        double gap = 0.0;
        double baseline = 0.0;
        double zero_pseudo = 0.0;
    };
    std::vector<Cell> cells(opt.seeds * G);
    parallel_for(cells.size(), [&](std::size_t idx) {
        const std::size_t s = idx / G;
        const std::size_t m = opt.m_grid[idx % G];
        RngStream sample_rng = base.derive(1, s);
        std::vector<Vector> xs;
        xs.reserve(opt.n_samples + opt.extra_points.size());
        for (std::size_t i = 0; i < opt.n_samples; ++i) xs.push_back(sample_manifold_point(sample_rng, opt.d));
        xs.insert(xs.end(), opt.extra_points.begin(), opt.extra_points.end());

        RngStream rng = base.derive(2, s, m);
        auto [p, anchor] = init_params(m, opt.d, rng);
        Cell cell;
        for (const auto& x : xs) {
            const GapTerms t = gap_terms(p, anchor, x);
            cell.baseline = std::max(cell.baseline, std::abs(t.f0));
            cell.zero_pseudo = std::max(cell.zero_pseudo, std::abs(t.g));
        }
        displace_columns(p, anchor, opt.radius / std::pow(static_cast<double>(m), 2.0 / 3.0), rng);
        cell.gap = sup_gap(p, anchor, xs);
        cells[idx] = cell;
    });

    StudyReport rep;
    rep.name = "uniform-approx";
    rep.header = {"m", "seed", "sup_gap", "sup_f_init", "displacement_2inf"};
    std::vector<double> med(G), med_base(G);
    double zero_pseudo = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
        const double m = static_cast<double>(opt.m_grid[g]);
        std::vector<double> gaps, bases;
        for (std::size_t s = 0; s < opt.seeds; ++s) {
            const Cell& c = cells[s * G + g];
            rep.rows.push_back({m, static_cast<double>(s), c.gap, c.baseline, opt.radius / std::pow(m, 2.0 / 3.0)});
            gaps.push_back(c.gap);
            bases.push_back(c.baseline);
            zero_pseudo = std::max(zero_pseudo, c.zero_pseudo);
        }
        med[g] = median(gaps);
        med_base[g] = median(bases);
    }
    const auto grid = as_doubles(opt.m_grid);
    const double slope = loglog_slope(grid, med);
    const std::size_t steps = nonincreasing_steps(med);
    const std::size_t needed = std::min<std::size_t>(3, G - 1);

    rep.summary["radius"] = opt.radius;
    rep.summary["d"] = opt.d;
    rep.summary["n_samples"] = opt.n_samples;
    rep.summary["seeds"] = opt.seeds;
    rep.summary["sup_approximation"] = "max over uniform manifold samples plus extra points";
    rep.summary["m_grid"] = to_json(grid);
    rep.summary["median_sup_gap"] = to_json(med);
    rep.summary["median_sup_f_init"] = to_json(med_base);
    rep.summary["slope"] = slope;
    rep.summary["slope_f_init"] = loglog_slope(grid, med_base);
    rep.summary["nonincreasing_steps"] = steps;
    rep.summary["max_pseudo_at_init"] = zero_pseudo;

    rep.add_check("pseudo_zero_at_init", zero_pseudo == 0.0, "max |g_{U(0)}(x)| = " + format_double(zero_pseudo));
    rep.add_check("negative_slope", slope <= -0.05, "slope = " + format_double(slope) + " (need <= -0.05)");
    rep.add_check("monotone_steps", steps >= needed,
                  std::to_string(steps) + " of " + std::to_string(G - 1) + " steps non-increasing (need " +
                      std::to_string(needed) + ")");
    return rep;
}

// ---------------------------------------------------------------------------
// Gradient coupling

StudyReport coupling_study(const CouplingOptions& opt) {
    require_grid(opt.m_grid);
    if (opt.seeds == 0) throw std::invalid_argument("coupling_study: seeds must be >= 1");
    const std::size_t G = opt.m_grid.size();
    const RngStream base(opt.seed, 0xC0F);

    std::vector<FederatedDataset> data;
    for (std::size_t s = 0; s < opt.seeds; ++s) {
        RngStream rng = base.derive(1, s);
        data.push_back(gen_separable_sphere(opt.n_clients, opt.per_client, opt.d, opt.delta, rng));
    }

    struct Cell {
        double gap = 0.0;
        std::size_t flips = 0;
        double gap_own_slope = 0.0;
        std::size_t flips_own_slope = 0;
        bool per_column_ok = false;
        double displacement = 0.0;
    };
    std::vector<Cell> cells(opt.seeds * G);
    parallel_for(cells.size(), [&](std::size_t idx) {
        const std::size_t s = idx / G;
        const std::size_t m = opt.m_grid[idx % G];
        const std::vector<DataPoint> pts = data[s].flatten();
        RngStream rng = base.derive(2, s, m);
        auto [p, anchor] = init_params(m, opt.d, rng);
        const double step = std::pow(static_cast<double>(m), opt.displacement_exponent);
        displace_columns(p, anchor, step, rng);

        const Matrix real = grad_hidden(p, pts, LossKind::Absolute);
        const Matrix pseudo = pseudo_grad_hidden(p, anchor, pts, LossKind::Absolute, SlopeAt::Real);
        const Matrix own = pseudo_grad_hidden(p, anchor, pts, LossKind::Absolute, SlopeAt::Pseudo);
        Cell cell;
        cell.displacement = norm_2_inf(p.hidden - anchor.hidden0);
        const Matrix diff = pseudo - real;
        const Matrix diff_own = own - real;
        cell.gap = norm_2_1(diff);
        cell.gap_own_slope = norm_2_1(diff_own);
        auto nonzero = [](std::span<const double> c) {
            return std::any_of(c.begin(), c.end(), [](double v) { return v != 0.0; });
        };
        for (std::size_t r = 0; r < m; ++r) {
            if (nonzero(diff.col(r))) ++cell.flips;
            if (nonzero(diff_own.col(r))) ++cell.flips_own_slope;
        }
        cell.per_column_ok = cell.gap <= std::cbrt(1.0 / static_cast<double>(m)) * static_cast<double>(cell.flips);
        cells[idx] = cell;
    });

    StudyReport rep;
    rep.name = "coupling";
    rep.header = {"m",           "seed",          "displacement_2inf",   "coupling_gap_21",
                  "flip_count",  "flip_fraction", "normalized_gap",      "normalized_flips",
                  "gap_bound",   "coupling_gap_21_pseudo_slope", "flip_count_pseudo_slope"};
    const double nj = static_cast<double>(opt.n_clients * opt.per_client);
    std::vector<double> med_frac(G), med_norm_gap(G), med_norm_flips(G);
    bool all_ok = true;
    std::size_t worst_cell = 0;
    for (std::size_t g = 0; g < G; ++g) {
        const double m = static_cast<double>(opt.m_grid[g]);
        std::vector<double> frac, ngap, nflips;
        for (std::size_t s = 0; s < opt.seeds; ++s) {
            const Cell& c = cells[s * G + g];
            const double flips = static_cast<double>(c.flips);
            frac.push_back(flips / m);
            ngap.push_back(c.gap / (nj * std::pow(m, 13.0 / 24.0)));
            nflips.push_back(flips / (nj * std::pow(m, 7.0 / 8.0)));
            rep.rows.push_back({m, static_cast<double>(s), c.displacement, c.gap, flips, frac.back(), ngap.back(),
                                nflips.back(), std::cbrt(1.0 / m) * flips, c.gap_own_slope,
                                static_cast<double>(c.flips_own_slope)});
            if (!c.per_column_ok && all_ok) {
                all_ok = false;
                worst_cell = s * G + g;
            }
        }
        med_frac[g] = median(frac);
        med_norm_gap[g] = median(ngap);
        med_norm_flips[g] = median(nflips);
    }
    const auto grid = as_doubles(opt.m_grid);
    const double frac_slope = loglog_slope(grid, med_frac);
    const double gap_ratio = max_min_ratio(med_norm_gap);

    rep.summary["n_clients"] = opt.n_clients;
    rep.summary["per_client"] = opt.per_client;
    rep.summary["d"] = opt.d;
    rep.summary["seeds"] = opt.seeds;
    rep.summary["displacement_exponent"] = opt.displacement_exponent;
    rep.summary["loss_slope"] = "real network";
    rep.summary["m_grid"] = to_json(grid);
    rep.summary["median_flip_fraction"] = to_json(med_frac);
    rep.summary["median_normalized_gap"] = to_json(med_norm_gap);
    rep.summary["median_normalized_flips"] = to_json(med_norm_flips);
    rep.summary["flip_fraction_slope"] = frac_slope;
    rep.summary["normalized_gap_ratio"] = gap_ratio;
    rep.summary["normalized_flips_ratio"] = max_min_ratio(med_norm_flips);

    rep.add_check("per_column_bound", all_ok,
                  all_ok ? "coupling_gap_21 <= m^{-1/3} * flip_count in every cell"
                         : "violated at cell " + std::to_string(worst_cell));
    rep.add_check("flip_fraction_decreasing", frac_slope < 0.0, "slope = " + format_double(frac_slope));
    rep.add_check("normalized_gap_bounded", gap_ratio <= 10.0, "max/min = " + format_double(gap_ratio));
    return rep;
}

// ---------------------------------------------------------------------------
// FL gradient gap

FlGapTrace fl_gap_trace(std::span<const RoundRecord> records, std::size_t m) {
    FlGapTrace tr;
    const double scale = std::pow(static_cast<double>(m), 2.0 / 3.0);
    for (const auto& r : records) {
        if (!r.grad) continue;
        ++tr.audits;
        tr.max_gap_21 = std::max(tr.max_gap_21, r.grad->fl_gap_21);
        tr.max_gap_fro = std::max(tr.max_gap_fro, r.grad->fl_gap_fro);
        tr.max_normalized = std::max(tr.max_normalized, r.grad->fl_gap_21 / scale);
    }
    return tr;
}

StudyReport fl_gap_study(const FlGapOptions& opt) {
    require_grid(opt.m_grid);
    if (opt.audit_every == 0) throw std::invalid_argument("fl_gap_study: audit_every must be >= 1");
    RngStream data_rng = RngStream(opt.seed, 0xF16).derive(1);
    const FederatedDataset ds = gen_separable_sphere(opt.n_clients, opt.per_client, opt.d, opt.delta, data_rng, opt.rho);
    const std::size_t G = opt.m_grid.size();

    std::vector<FlGapTrace> traces(G);
    for (std::size_t g = 0; g < G; ++g) {
        FalConfig cfg = theory_preset(opt.n_clients, opt.per_client, opt.m_grid[g], opt.local_steps, opt.rho,
                                      opt.rounds);
        cfg.seed = opt.seed;
        cfg.grad_audit_every = opt.audit_every;
        const RunResult res = run_fal(cfg, ds);
        traces[g] = fl_gap_trace(res.records, opt.m_grid[g]);
    }

    StudyReport rep;
    rep.name = "fl-gap";
    rep.header = {"m", "audits", "max_fl_gap_21", "max_fl_gap_fro", "max_normalized_gap"};
    std::vector<double> normalized(G);
    double worst_21 = 0.0, worst_fro = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
        const auto& t = traces[g];
        rep.rows.push_back({static_cast<double>(opt.m_grid[g]), static_cast<double>(t.audits), t.max_gap_21,
                            t.max_gap_fro, t.max_normalized});
        normalized[g] = t.max_normalized;
        worst_21 = std::max(worst_21, t.max_gap_21);
        worst_fro = std::max(worst_fro, t.max_gap_fro);
    }
    rep.summary["local_steps"] = opt.local_steps;
    rep.summary["eta_local"] = 1.0 / static_cast<double>(opt.local_steps);
    rep.summary["rounds"] = opt.rounds;
    rep.summary["m_grid"] = to_json(as_doubles(opt.m_grid));
    rep.summary["max_normalized_gap"] = to_json(normalized);
    rep.summary["max_fl_gap_21"] = worst_21;
    rep.summary["max_fl_gap_fro"] = worst_fro;

    const bool audited = std::all_of(traces.begin(), traces.end(), [](const FlGapTrace& t) { return t.audits > 0; });
    rep.add_check("audited", audited, "every width has at least one audited round");
    if (opt.local_steps == 1) {
        rep.add_check("k1_identity_fro", worst_fro <= 1e-9, "max ||grad f - FL grad||_F = " + format_double(worst_fro));
        rep.add_check("k1_identity_21", worst_21 <= 1e-9, "max ||grad f - FL grad||_{2,1} = " + format_double(worst_21));
    } else {
        const double ratio = max_min_ratio(normalized);
        rep.summary["normalized_gap_ratio"] = ratio;
        rep.add_check("normalized_gap_bounded", ratio <= 10.0, "max/min = " + format_double(ratio));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Finite differences

FiniteDiffResult finite_diff_audit(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> batch,
                                   double probe, RngStream rng, std::size_t coords, LossKind k, double pseudo_probe) {
    if (!(probe > 0.0) || !(pseudo_probe > 0.0)) throw std::invalid_argument("finite_diff_audit: probe must be > 0");
    if (batch.empty()) throw std::invalid_argument("finite_diff_audit: empty batch");
    const std::size_t m = p.width();
    const std::size_t d = p.dim();

    // Neurons whose coordinates are unsafe to probe for each network.
    std::vector<char> skip_real(m, 0), skip_pseudo(m, 0);
    for (const auto& pt : batch) {
        const double f_res = std::abs(forward(p, pt.x) - pt.y);
        const double g_res = std::abs(pseudo_forward(p, anchor, pt.x) - pt.y);
        for (std::size_t r = 0; r < m; ++r) {
            const double z = dot(p.hidden.col(r), pt.x) + p.bias[r];
            const double z0 = dot(anchor.hidden0.col(r), pt.x) + anchor.bias0[r];
            if (std::abs(z) < kKinkMargin || (z >= 0.0 && f_res < kKinkMargin)) skip_real[r] = 1;
            if (z0 >= 0.0 && g_res < kKinkMargin) skip_pseudo[r] = 1;
        }
    }

    const Matrix g_real = grad_hidden(p, batch, k);
    const Matrix g_pseudo = pseudo_grad_hidden(p, anchor, batch, k, SlopeAt::Pseudo);
    auto rel = [](double fd, double an) {
        return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), kRelFloor});
    };

    FiniteDiffResult out;
    NetParams q = p;
    for (std::size_t n = 0; n < coords; ++n) {
        const std::size_t i = static_cast<std::size_t>(rng.below(d));
        const std::size_t r = static_cast<std::size_t>(rng.below(m));
        const double orig = q.hidden(i, r);
        auto central = [&](double h, auto&& loss) {
            q.hidden(i, r) = orig + h;
            const double up = loss();
            q.hidden(i, r) = orig - h;
            const double down = loss();
            q.hidden(i, r) = orig;
            return (up - down) / (2.0 * h);
        };
        if (!skip_real[r]) {
            const double fd = central(probe, [&] { return batch_loss(q, batch, k); });
            out.max_rel_error_real = std::max(out.max_rel_error_real, rel(fd, g_real(i, r)));
            ++out.checked_real;
        }
        if (!skip_pseudo[r]) {
            const double fd = central(pseudo_probe, [&] { return pseudo_batch_loss(q, anchor, batch, k); });
            out.max_rel_error_pseudo = std::max(out.max_rel_error_pseudo, rel(fd, g_pseudo(i, r)));
            ++out.checked_pseudo;
        }
    }
    return out;
}

StudyReport finite_diff_study(const FiniteDiffOptions& opt) {
    if (opt.seeds == 0) throw std::invalid_argument("finite_diff_study: seeds must be >= 1");
    const RngStream base(opt.seed, 0xFD);
    std::vector<FiniteDiffResult> results(opt.seeds);
    parallel_for(opt.seeds, [&](std::size_t s) {
        RngStream rng = base.derive(s);
        auto [p, anchor] = init_params(opt.m, opt.d, rng);
        displace_columns(p, anchor, 0.5 / std::sqrt(static_cast<double>(opt.m)), rng);
        std::vector<DataPoint> batch;
        for (std::size_t j = 0; j < opt.batch; ++j)
            batch.push_back({sample_manifold_point(rng, opt.d), rng.uniform(-1.0, 1.0)});
        results[s] = finite_diff_audit(p, anchor, batch, opt.probe, rng.derive(99), 100, LossKind::Absolute,
                                       opt.pseudo_probe);
    });

    StudyReport rep;
    rep.name = "finite-diff";
    rep.header = {"seed", "max_rel_error_real", "max_rel_error_pseudo", "checked_real", "checked_pseudo"};
    double worst_real = 0.0, worst_pseudo = 0.0;
    std::size_t min_checked = std::numeric_limits<std::size_t>::max();
    for (std::size_t s = 0; s < opt.seeds; ++s) {
        const auto& r = results[s];
        rep.rows.push_back({static_cast<double>(s), r.max_rel_error_real, r.max_rel_error_pseudo,
                            static_cast<double>(r.checked_real), static_cast<double>(r.checked_pseudo)});
        worst_real = std::max(worst_real, r.max_rel_error_real);
        worst_pseudo = std::max(worst_pseudo, r.max_rel_error_pseudo);
        min_checked = std::min({min_checked, r.checked_real, r.checked_pseudo});
    }
    rep.summary["m"] = opt.m;
    rep.summary["d"] = opt.d;
    rep.summary["probe"] = opt.probe;
    rep.summary["pseudo_probe"] = opt.pseudo_probe;
    rep.summary["seeds"] = opt.seeds;
    rep.summary["relative_error_floor"] = kRelFloor;
    rep.summary["max_rel_error"] = worst_real;
    rep.summary["max_rel_error_pseudo"] = worst_pseudo;
    rep.add_check("coordinates_checked", min_checked > 0, "fewest coordinates checked: " + std::to_string(min_checked));
    rep.add_check("real_gradient", worst_real <= 1e-5, "max relative error " + format_double(worst_real));
    rep.add_check("pseudo_gradient", worst_pseudo <= 1e-7, "max relative error " + format_double(worst_pseudo));
    return rep;
}

// ---------------------------------------------------------------------------
// Convergence

double min_adv_loss(std::span<const RoundRecord> records) {
    if (records.empty()) throw std::invalid_argument("min_adv_loss: no records");
    double best = records.front().adv_loss;
    for (const auto& r : records) best = std::min(best, r.adv_loss);
    return best;
}

double mean_adv_loss(std::span<const RoundRecord> records) {
    if (records.empty()) throw std::invalid_argument("mean_adv_loss: no records");
    double s = 0.0;
    for (const auto& r : records) s += r.adv_loss;
    return s / static_cast<double>(records.size());
}

StudyReport convergence_study(const ConvergenceOptions& opt) {
    RngStream data_rng = RngStream(opt.seed, 0xC0).derive(1);
    const FederatedDataset ds = gen_separable_sphere(opt.n_clients, opt.per_client, opt.d, opt.delta, data_rng, opt.rho);
    FalConfig cfg = theory_preset(opt.n_clients, opt.per_client, opt.m, opt.local_steps, opt.rho, opt.rounds);
    cfg.seed = opt.seed;
    const RunResult res = run_fal(cfg, ds);

    StudyReport rep;
    rep.name = "convergence";
    rep.header = {"round", "adv_loss", "clean_loss", "dist_init_2inf", "displacement_bound"};
    bool bound_ok = true;
    for (std::size_t t = 0; t < res.records.size(); ++t) {
        const auto& r = res.records[t];
        const double bound = displacement_bound(cfg, t);
        bound_ok = bound_ok && r.dist_init_2inf <= bound;
        rep.rows.push_back({static_cast<double>(r.round), r.adv_loss, r.clean_loss, r.dist_init_2inf, bound});
    }
    const double initial = res.records.empty() ? 0.0 : res.records.front().adv_loss;
    const double best = min_adv_loss(res.records);
    const double mean = mean_adv_loss(res.records);
    rep.summary["m"] = opt.m;
    rep.summary["local_steps"] = opt.local_steps;
    rep.summary["rounds"] = opt.rounds;
    rep.summary["eta_local"] = cfg.eta_local;
    rep.summary["eta_global"] = cfg.eta_global;
    rep.summary["delta_min"] = ds.stats.delta_min;
    rep.summary["gamma_bound"] = ds.stats.gamma_bound;
    rep.summary["initial_adv_loss"] = initial;
    rep.summary["min_adv_loss"] = best;
    rep.summary["mean_adv_loss"] = mean;
    rep.add_check("min_below_half_initial", best <= 0.5 * initial,
                  format_double(best) + " vs 0.5 * " + format_double(initial));
    rep.add_check("min_le_mean", best <= mean, format_double(best) + " <= " + format_double(mean));
    rep.add_check("displacement_bound", bound_ok, "||U(t) - U(0)||_{2,inf} <= eta_glo eta_loc t K m^{-1/3}");
    return rep;
}

}  // namespace fal
