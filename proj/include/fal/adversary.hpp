#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "fal/core.hpp"
#include "fal/model.hpp"

namespace fal {

enum class AdversaryMode { L2Sphere, LinfBox, GridOracle };

std::string to_string(AdversaryMode mode);
AdversaryMode adversary_mode_from_string(const std::string& s);

struct AdversaryConfig {
    AdversaryMode mode = AdversaryMode::L2Sphere;
    double rho = 0.05;
    std::size_t steps = 10;
    double step_size = 0.0125;
    std::size_t restarts = 1;
    std::size_t grid_resolution = 1000;
    LossKind loss = LossKind::Absolute;
};

/// Throws std::invalid_argument on a bad config. In theory mode rho must lie in
/// [0, 1/2); rho == 0 is accepted and makes every adversary the identity.
void validate(const AdversaryConfig& cfg, bool theory_mode);

/// Model as seen by the adversary: returns f(x) and, when `grad` is non-null,
/// writes df/dx into it.
using InputModel = std::function<double(std::span<const double> x, Vector* grad)>;

InputModel input_model(const NetParams& p);

inline constexpr double kManifoldTol = 1e-9;
inline constexpr double kManifoldLast = 0.5;

/// True when ||x||_2 = 1 and x_d = 1/2 within `tol`.
bool on_manifold(std::span<const double> x, double tol = kManifoldTol);

/// Nearest manifold point for the radial part: last coordinate set to 1/2,
/// the rest rescaled to norm sqrt(3)/2. `fallback` supplies the direction when
/// the leading coordinates are all zero.
Vector project_manifold(std::span<const double> x, std::span<const double> fallback);

/// Nearest point of B_2(center, rho) intersected with the manifold to the
/// radial projection of `candidate`. The intersection is a spherical cap around
/// the center, so the answer is the candidate's direction when it lies inside
/// the cap and the cap boundary along the great circle toward it otherwise.
Vector project_ball_manifold(std::span<const double> candidate, std::span<const double> center, double rho);

/// One PGD run from the clean point. L2Sphere: normalized ascent steps followed
/// by projection onto the ball-manifold set. LinfBox: signed-gradient steps
/// clipped coordinate-wise to [x - rho, x + rho]. GridOracle: the best grid
/// point (d = 3 only).
Vector perturb(const AdversaryConfig& cfg, const InputModel& model, const DataPoint& point);
Vector perturb(const AdversaryConfig& cfg, const NetParams& p, const DataPoint& point);

/// Max loss over `restarts` PGD runs (run 0 from the clean point, the rest from
/// random feasible starts), taken over every iterate. A lower bound on the
/// worst-case loss.
double worst_case_loss(const AdversaryConfig& cfg, const InputModel& model, const DataPoint& point,
                       RngStream rng);
double worst_case_loss(const AdversaryConfig& cfg, const NetParams& p, const DataPoint& point, RngStream rng);

/// Brute-force worst case for d = 3, where the manifold is the circle
/// x1^2 + x2^2 = 3/4, x3 = 1/2: the max loss over `resolution` equally spaced
/// angles of the feasible arc.
double grid_oracle_worst_case(const InputModel& model, const DataPoint& point, double rho,
                              std::size_t resolution, LossKind loss = LossKind::Absolute);
double grid_oracle_worst_case(const NetParams& p, const DataPoint& point, double rho, std::size_t resolution,
                              LossKind loss = LossKind::Absolute);

/// Angular half-width of the feasible arc and the spacing of the grid oracle.
struct GridArc {
    double center_angle;
    double half_width;
    double spacing;
    bool full_circle;
};
GridArc grid_arc(std::span<const double> center, double rho, std::size_t resolution);

/// Distance used for rho-boundedness in the given mode (l2 or l-infinity).
double adversary_distance(AdversaryMode mode, std::span<const double> a, std::span<const double> b);

}  // namespace fal
