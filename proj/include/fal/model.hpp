#pragma once

#include <span>
#include <utility>

#include "fal/core.hpp"

namespace fal {

struct DataPoint {
    Vector x;
    double y = 0.0;
};

/// Two-layer ReLU network f(x) = sum_r a_r * relu(<U_r, x> + b_r).
/// Only `hidden` is trained; `output` and `bias` keep their initial values.
struct NetParams {
    Matrix hidden;  // d x m
    Vector output;  // a, length m
    Vector bias;    // b, length m

    std::size_t width() const { return hidden.cols(); }
    std::size_t dim() const { return hidden.rows(); }
};

/// Frozen copy of the initial parameters. The pseudo-network and every
/// distance-from-initialization measurement are taken against it.
struct InitAnchor {
    Matrix hidden0;
    Vector output0;
    Vector bias0;

    std::size_t width() const { return hidden0.cols(); }
    std::size_t dim() const { return hidden0.rows(); }
};

enum class LossKind { Absolute };

/// Where the loss slope of a pseudo-network gradient is evaluated.
/// `Pseudo` gives the true gradient of the pseudo-network loss; `Real` reuses the
/// real network's slope so the two gradients differ only through activation
/// patterns.
enum class SlopeAt { Pseudo, Real };

/// a_r ~ U[-m^{-1/3}, m^{-1/3}], U_{i,r}, b_r ~ N(0, 1/m).
std::pair<NetParams, InitAnchor> init_params(std::size_t m, std::size_t d, RngStream& rng);

InitAnchor make_anchor(const NetParams& p);

double forward(const NetParams& p, std::span<const double> x);

/// g_U(x) = sum_r a_r <U_r - U_r(0), x> 1{<U_r(0), x> + b_r >= 0}.
double pseudo_forward(const NetParams& p, const InitAnchor& anchor, std::span<const double> x);

double loss_eval(LossKind k, double z, double y);
/// Subgradient in z; 0 at the kink.
double loss_subgrad(LossKind k, double z, double y);

double batch_loss(const NetParams& p, std::span<const DataPoint> batch, LossKind k);
double pseudo_batch_loss(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> batch,
                         LossKind k);

/// Gradient of batch_loss with respect to the hidden matrix:
/// column r = mean_j l'(f(x_j), y_j) a_r 1{<U_r, x_j> + b_r >= 0} x_j.
Matrix grad_hidden(const NetParams& p, std::span<const DataPoint> batch, LossKind k);

/// Same formula with the activation indicator taken at the anchor weights.
Matrix pseudo_grad_hidden(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> batch,
                          LossKind k, SlopeAt slope = SlopeAt::Pseudo);

/// Gradient of l(f(x), y) with respect to the input x.
Vector input_gradient(const NetParams& p, std::span<const double> x, double y, LossKind k);

/// Upper bound on the Lipschitz constant of f in x: sum_r |a_r| ||U_r||_2.
double input_lipschitz_bound(const NetParams& p);

}  // namespace fal
