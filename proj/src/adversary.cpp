#include "fal/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fal {

namespace {

const double kLeadingNorm = std::sqrt(3.0) / 2.0;

/// Loss value at x and the loss gradient with respect to x.
template <typename Eval>
double loss_and_input_grad(Eval&& model, std::span<const double> x, double y, LossKind loss, Vector& grad) {
    const double f = model(x, &grad);
    const double slope = loss_subgrad(loss, f, y);
    for (double& g : grad) g *= slope;
    return loss_eval(loss, f, y);
}

template <typename Eval>
double point_loss(Eval&& model, std::span<const double> x, double y, LossKind loss) {
    return loss_eval(loss, model(x, nullptr), y);
}

/// Evaluates f and df/dx of a network without type erasure.
struct DirectModel {
    const NetParams& p;
    double operator()(std::span<const double> x, Vector* grad) const {
        const std::size_t d = p.dim();
        if (x.size() != d) throw std::invalid_argument("model: input dimension mismatch");
        if (grad) grad->assign(d, 0.0);
        double f = 0.0;
        for (std::size_t r = 0; r < p.width(); ++r) {
            const double* u = p.hidden.col(r).data();
            double z = p.bias[r];
            for (std::size_t i = 0; i < d; ++i) z += u[i] * x[i];
            if (z < 0.0) continue;
            f += p.output[r] * z;
            if (grad)
                for (std::size_t i = 0; i < d; ++i) (*grad)[i] += p.output[r] * u[i];
        }
        return f;
    }
};

Vector circle_point(double angle) {
    return {kLeadingNorm * std::cos(angle), kLeadingNorm * std::sin(angle), kManifoldLast};
}

void require_point(const AdversaryConfig& cfg, const DataPoint& point) {
    if (point.x.empty()) throw std::invalid_argument("adversary: empty input");
    if (cfg.mode != AdversaryMode::LinfBox && cfg.rho > 0.0 && !on_manifold(point.x))
        throw std::invalid_argument("adversary: anchor point is off the data manifold");
}

/// PGD from `start`; returns the final iterate and raises `best` to the largest
/// loss seen.
template <typename Eval>
Vector run_pgd(const AdversaryConfig& cfg, Eval&& model, const DataPoint& point, Vector x, double& best) {
    const std::size_t d = x.size();
    Vector grad(d);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        const double value = loss_and_input_grad(model, x, point.y, cfg.loss, grad);
        best = std::max(best, value);
        if (cfg.mode == AdversaryMode::LinfBox) {
            bool moved = false;
            for (std::size_t i = 0; i < d; ++i) {
                const double sgn = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
                if (sgn == 0.0) continue;
                moved = true;
                x[i] = std::clamp(x[i] + cfg.step_size * sgn, point.x[i] - cfg.rho, point.x[i] + cfg.rho);
            }
            if (!moved) break;
        } else {
            // Ascend along the manifold: drop the x_d and radial components.
            grad[d - 1] = 0.0;
            const double rr = dot(std::span<const double>(x.data(), d - 1), std::span<const double>(x.data(), d - 1));
            if (rr > 0.0) {
                const double c = dot(std::span<const double>(grad.data(), d - 1), std::span<const double>(x.data(), d - 1)) / rr;
                for (std::size_t i = 0; i + 1 < d; ++i) grad[i] -= c * x[i];
            }
            const double gn = norm2(grad);
            if (gn == 0.0) break;
            for (std::size_t i = 0; i < d; ++i) x[i] += cfg.step_size * grad[i] / gn;
            x = project_ball_manifold(x, point.x, cfg.rho);
        }
    }
    best = std::max(best, point_loss(model, x, point.y, cfg.loss));
    return x;
}

Vector random_start(const AdversaryConfig& cfg, const DataPoint& point, RngStream& rng) {
    const std::size_t d = point.x.size();
    Vector x = point.x;
    if (cfg.mode == AdversaryMode::LinfBox) {
        for (std::size_t i = 0; i < d; ++i) x[i] += rng.uniform(-cfg.rho, cfg.rho);
        return x;
    }
    // Uniform geodesic angle over the feasible cap along a random tangent direction.
    const std::size_t n = d - 1;
    Vector c_hat(point.x.begin(), point.x.begin() + static_cast<long>(n));
    const double c_norm = norm2(c_hat);
    for (double& v : c_hat) v /= c_norm;
    Vector t(n);
    for (double& v : t) v = rng.normal();
    const double along = dot(t, c_hat);
    for (std::size_t i = 0; i < n; ++i) t[i] -= along * c_hat[i];
    const double tn = norm2(t);
    if (!(tn > 0.0)) return x;
    const double cos_max = std::max(-1.0, 1.0 - cfg.rho * cfg.rho / (2.0 * kLeadingNorm * kLeadingNorm));
    const double theta = std::acos(cos_max) * rng.uniform01();
    for (std::size_t i = 0; i < n; ++i) x[i] = kLeadingNorm * (std::cos(theta) * c_hat[i] + std::sin(theta) * t[i] / tn);
    x[n] = kManifoldLast;
    return project_ball_manifold(x, point.x, cfg.rho);
}

/// Grid maximizer and its loss.
template <typename Eval>
std::pair<Vector, double> grid_search(Eval&& model, const DataPoint& point, double rho,
                                      std::size_t resolution, LossKind loss) {
    const GridArc arc = grid_arc(point.x, rho, resolution);
    Vector best_x = point.x;
    double best = -1.0;
    for (std::size_t i = 0; i < resolution; ++i) {
        const double angle = arc.full_circle
                                 ? arc.center_angle - std::numbers::pi + arc.spacing * static_cast<double>(i)
                                 : arc.center_angle - arc.half_width + arc.spacing * static_cast<double>(i);
        Vector x = circle_point(angle);
        const double v = point_loss(model, x, point.y, loss);
        if (v > best) {
            best = v;
            best_x = std::move(x);
        }
    }
    return {best_x, best};
}

}  // namespace

std::string to_string(AdversaryMode mode) {
    switch (mode) {
        case AdversaryMode::L2Sphere: return "l2-sphere";
        case AdversaryMode::LinfBox: return "linf-box";
        case AdversaryMode::GridOracle: return "grid-oracle";
    }
    return "unknown";
}

AdversaryMode adversary_mode_from_string(const std::string& s) {
    if (s == "l2-sphere") return AdversaryMode::L2Sphere;
    if (s == "linf-box") return AdversaryMode::LinfBox;
    if (s == "grid-oracle") return AdversaryMode::GridOracle;
    throw std::invalid_argument("unknown adversary mode '" + s + "' (expected l2-sphere, linf-box, grid-oracle)");
}

void validate(const AdversaryConfig& cfg, bool theory_mode) {
    if (!(cfg.rho >= 0.0) || !std::isfinite(cfg.rho)) throw std::invalid_argument("adversary: rho must be >= 0");
    if (theory_mode && cfg.rho >= 0.5) throw std::invalid_argument("adversary: rho must be < 1/2 in theory mode");
    if (cfg.steps < 1) throw std::invalid_argument("adversary: steps must be >= 1");
    if (cfg.restarts < 1) throw std::invalid_argument("adversary: restarts must be >= 1");
    if (!(cfg.step_size >= 0.0)) throw std::invalid_argument("adversary: step_size must be >= 0");
    if (cfg.mode == AdversaryMode::GridOracle && cfg.grid_resolution < 100)
        throw std::invalid_argument("adversary: grid_resolution must be >= 100");
}

InputModel input_model(const NetParams& p) { return DirectModel{p}; }

bool on_manifold(std::span<const double> x, double tol) {
    if (x.size() < 2) return false;
    return std::abs(norm2(x) - 1.0) <= tol && std::abs(x.back() - kManifoldLast) <= tol;
}

Vector project_manifold(std::span<const double> x, std::span<const double> fallback) {
    const std::size_t d = x.size();
    Vector out(x.begin(), x.end());
    double n = norm2(std::span<const double>(out.data(), d - 1));
    if (n == 0.0) {
        std::copy(fallback.begin(), fallback.end() - 1, out.begin());
        n = norm2(std::span<const double>(out.data(), d - 1));
    }
    for (std::size_t i = 0; i + 1 < d; ++i) out[i] *= kLeadingNorm / n;
    out[d - 1] = kManifoldLast;
    return out;
}

Vector project_ball_manifold(std::span<const double> candidate, std::span<const double> center, double rho) {
    const std::size_t d = center.size();
    if (d < 2) throw std::invalid_argument("project_ball_manifold: dimension must be >= 2");
    if (candidate.size() != d) throw std::invalid_argument("project_ball_manifold: dimension mismatch");
    if (!on_manifold(center)) throw std::invalid_argument("project_ball_manifold: center is off the manifold");
    if (!(rho >= 0.0)) throw std::invalid_argument("project_ball_manifold: rho must be >= 0");
    if (rho == 0.0) return Vector(center.begin(), center.end());

    // The feasible set is a cap of the (d-2)-sphere of radius sqrt(3)/2 in the
    // leading coordinates: every direction within angle theta_max of the center.
    const std::size_t n = d - 1;
    Vector c_hat(center.begin(), center.begin() + static_cast<long>(n));
    const double c_norm = norm2(c_hat);
    for (double& v : c_hat) v /= c_norm;
    Vector u_hat(candidate.begin(), candidate.begin() + static_cast<long>(n));
    const double u_norm = norm2(u_hat);
    if (!(u_norm > 0.0)) return Vector(center.begin(), center.end());
    for (double& v : u_hat) v /= u_norm;

    auto embed = [&](const Vector& dir) {
        Vector out(d);
        for (std::size_t i = 0; i < n; ++i) out[i] = kLeadingNorm * dir[i];
        out[n] = kManifoldLast;
        return out;
    };

    const double cos_max = 1.0 - rho * rho / (2.0 * kLeadingNorm * kLeadingNorm);
    const double cos_phi = std::clamp(dot(c_hat, u_hat), -1.0, 1.0);
    if (cos_max <= -1.0 || cos_phi >= cos_max) {
        Vector inside = embed(u_hat);
        if (cos_max <= -1.0 || distance2(inside, center) <= rho) return inside;
    }

    // Rotate from the center toward the candidate, stopping on the cap boundary.
    Vector w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = u_hat[i] - cos_phi * c_hat[i];
    double w_norm = norm2(w);
    if (w_norm < 1e-12) {
        // antipodal candidate: any direction orthogonal to the center will do
        const std::size_t k = static_cast<std::size_t>(
            std::min_element(c_hat.begin(), c_hat.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) -
            c_hat.begin());
        std::fill(w.begin(), w.end(), 0.0);
        w[k] = 1.0;
        for (std::size_t i = 0; i < n; ++i) w[i] -= c_hat[k] * c_hat[i];
        w_norm = norm2(w);
    }
    // Boundary angle; rounding can leave the boundary point a few ulps outside,
    // so back off slightly until it is feasible.
    double theta = std::acos(cos_max);
    Vector out;
    for (int it = 0; it < 8; ++it, theta *= 1.0 - 1e-12) {
        Vector dir(n);
        for (std::size_t i = 0; i < n; ++i) dir[i] = std::cos(theta) * c_hat[i] + std::sin(theta) * w[i] / w_norm;
        out = embed(dir);
        if (distance2(out, center) <= rho) return out;
    }
    return Vector(center.begin(), center.end());
}

namespace {

template <typename Eval>
Vector perturb_impl(const AdversaryConfig& cfg, Eval&& model, const DataPoint& point) {
    require_point(cfg, point);
    if (cfg.rho == 0.0) return point.x;
    if (cfg.mode == AdversaryMode::GridOracle) {
        if (point.x.size() != 3) throw std::invalid_argument("grid oracle adversary requires d == 3");
        return grid_search(model, point, cfg.rho, cfg.grid_resolution, cfg.loss).first;
    }
    double best = 0.0;
    return run_pgd(cfg, model, point, point.x, best);
}

template <typename Eval>
double worst_case_impl(const AdversaryConfig& cfg, Eval&& model, const DataPoint& point, RngStream rng) {
    require_point(cfg, point);
    double best = point_loss(model, point.x, point.y, cfg.loss);
    if (cfg.rho == 0.0) return best;
    if (cfg.mode == AdversaryMode::GridOracle)
        return std::max(best, grid_search(model, point, cfg.rho, cfg.grid_resolution, cfg.loss).second);
    run_pgd(cfg, model, point, point.x, best);
    for (std::size_t r = 1; r < cfg.restarts; ++r) {
        RngStream restart_rng = rng.derive(r);
        run_pgd(cfg, model, point, random_start(cfg, point, restart_rng), best);
    }
    return best;
}

}  // namespace

Vector perturb(const AdversaryConfig& cfg, const InputModel& model, const DataPoint& point) {
    return perturb_impl(cfg, model, point);
}

Vector perturb(const AdversaryConfig& cfg, const NetParams& p, const DataPoint& point) {
    return perturb_impl(cfg, DirectModel{p}, point);
}

double worst_case_loss(const AdversaryConfig& cfg, const InputModel& model, const DataPoint& point,
                       RngStream rng) {
    return worst_case_impl(cfg, model, point, rng);
}

double worst_case_loss(const AdversaryConfig& cfg, const NetParams& p, const DataPoint& point, RngStream rng) {
    return worst_case_impl(cfg, DirectModel{p}, point, rng);
}

GridArc grid_arc(std::span<const double> center, double rho, std::size_t resolution) {
    if (center.size() != 3) throw std::invalid_argument("grid oracle requires d == 3");
    if (resolution < 100) throw std::invalid_argument("grid oracle: resolution must be >= 100");
    if (!on_manifold(center)) throw std::invalid_argument("grid oracle: point is off the manifold");
    GridArc arc{};
    arc.center_angle = std::atan2(center[1], center[0]);
    // Chord length between angles differing by t on the circle of radius sqrt(3)/2.
    const double max_chord = 2.0 * kLeadingNorm;
    arc.full_circle = rho >= max_chord;
    const double res = static_cast<double>(resolution);
    if (arc.full_circle) {
        arc.half_width = std::numbers::pi;
        arc.spacing = 2.0 * std::numbers::pi / res;
    } else {
        arc.half_width = 2.0 * std::asin(rho / max_chord);
        arc.spacing = 2.0 * arc.half_width / (res - 1.0);
    }
    return arc;
}

double grid_oracle_worst_case(const InputModel& model, const DataPoint& point, double rho,
                              std::size_t resolution, LossKind loss) {
    return grid_search(model, point, rho, resolution, loss).second;
}

double grid_oracle_worst_case(const NetParams& p, const DataPoint& point, double rho, std::size_t resolution,
                              LossKind loss) {
    return grid_search(DirectModel{p}, point, rho, resolution, loss).second;
}

double adversary_distance(AdversaryMode mode, std::span<const double> a, std::span<const double> b) {
    if (mode != AdversaryMode::LinfBox) return distance2(a, b);
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace fal
