#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fal/federation.hpp"
#include "fal/model.hpp"

namespace fal {

struct Check {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Result of a verification study: one table row per grid cell, a JSON
/// summary and named pass/fail checks.
struct StudyReport {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    std::vector<Check> checks;

    bool passed() const;
    std::string csv() const;
    /// Summary plus the checks and the overall verdict.
    nlohmann::ordered_json json() const;
    void add_check(std::string name, bool pass, std::string detail = {});
};

/// Least-squares slope of log(ys) against log(xs). Requires positive values.
double loglog_slope(std::span<const double> xs, std::span<const double> ys);
/// max / min of positive values.
double max_min_ratio(std::span<const double> values);
double median(std::vector<double> values);
/// Number of i with values[i+1] <= values[i].
std::size_t nonincreasing_steps(std::span<const double> values);

// --- uniform approximation --------------------------------------------------

struct UniformApproxOptions {
    double radius = 1.0;  // R
    std::vector<std::size_t> m_grid{256, 1024, 4096, 16384};
    std::size_t d = 3;
    std::size_t n_samples = 10000;
    std::size_t seeds = 10;
    std::uint64_t seed = 0;
    /// Extra points included in the sup, e.g. training inputs.
    std::vector<Vector> extra_points;
};

/// Largest |f_U(x) - g_U(x)| over the samples when every column of U - U(0)
/// has l2 norm exactly radius / m^{2/3}.
double sup_gap(const NetParams& p, const InitAnchor& anchor, std::span<const Vector> xs);

/// Moves every column of `p.hidden` away from the anchor along an independent
/// uniformly random direction of l2 norm `step`.
void displace_columns(NetParams& p, const InitAnchor& anchor, double step, RngStream& rng);

StudyReport uniform_approx_study(const UniformApproxOptions& opt);

// --- gradient coupling --------------------------------------------------------

struct CouplingOptions {
    std::size_t n_clients = 2;
    std::size_t per_client = 4;
    std::size_t d = 3;
    double delta = 0.3;
    std::vector<std::size_t> m_grid{256, 1024, 4096, 16384};
    std::size_t seeds = 5;
    std::uint64_t seed = 0;
    /// Column displacement is m^{displacement_exponent}.
    double displacement_exponent = -15.0 / 24.0;
};

StudyReport coupling_study(const CouplingOptions& opt);

// --- FL gradient gap ----------------------------------------------------------

struct FlGapOptions {
    std::vector<std::size_t> m_grid{256, 1024, 4096};
    std::size_t n_clients = 2;
    std::size_t per_client = 4;
    std::size_t d = 3;
    double delta = 0.3;
    double rho = 0.05;
    std::size_t local_steps = 4;
    std::size_t rounds = 20;
    std::size_t audit_every = 1;
    std::uint64_t seed = 0;
};

/// Theory-preset runs (eta_local = 1/K) with gradient audits at every width.
StudyReport fl_gap_study(const FlGapOptions& opt);

/// Summarizes the audits of one run: max fl_gap_21, max fl_gap_fro and max
/// fl_gap_21 / m^{2/3}.
struct FlGapTrace {
    double max_gap_21 = 0.0;
    double max_gap_fro = 0.0;
    double max_normalized = 0.0;
    std::size_t audits = 0;
};
FlGapTrace fl_gap_trace(std::span<const RoundRecord> records, std::size_t m);

// --- finite differences -------------------------------------------------------

struct FiniteDiffResult {
    double max_rel_error_real = 0.0;
    double max_rel_error_pseudo = 0.0;
    std::size_t checked_real = 0;
    std::size_t checked_pseudo = 0;
};

inline constexpr double kKinkMargin = 1e-4;
/// Relative errors are |fd - analytic| / max(|fd|, |analytic|, kRelFloor).
inline constexpr double kRelFloor = 1e-4;

/// The pseudo-network loss is piecewise linear in U, so its central difference
/// is exact up to rounding; a wider probe than the real network's keeps that
/// rounding small while |a_r| * probe stays inside kKinkMargin.
inline constexpr double kPseudoProbe = 1e-4;

/// Compares grad_hidden and pseudo_grad_hidden with central differences of the
/// respective batch losses on `coords` random coordinates. Coordinates within
/// kKinkMargin of a ReLU or loss kink are skipped.
FiniteDiffResult finite_diff_audit(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> batch,
                                   double probe, RngStream rng, std::size_t coords = 100,
                                   LossKind k = LossKind::Absolute, double pseudo_probe = kPseudoProbe);

struct FiniteDiffOptions {
    std::size_t m = 64;
    std::size_t d = 3;
    std::size_t batch = 8;
    double probe = 1e-6;
    double pseudo_probe = kPseudoProbe;
    std::size_t seeds = 10;
    std::uint64_t seed = 0;
};

StudyReport finite_diff_study(const FiniteDiffOptions& opt);

// --- convergence ----------------------------------------------------------

double min_adv_loss(std::span<const RoundRecord> records);
double mean_adv_loss(std::span<const RoundRecord> records);

struct ConvergenceOptions {
    std::size_t n_clients = 2;
    std::size_t per_client = 4;
    std::size_t d = 3;
    double delta = 0.5;
    double rho = 0.05;
    std::size_t m = 4096;
    std::size_t local_steps = 2;
    std::size_t rounds = 500;
    std::uint64_t seed = 0;
};

/// Theory-preset run: min adversarial loss against half the initial value and
/// min <= mean.
StudyReport convergence_study(const ConvergenceOptions& opt);

}  // namespace fal
