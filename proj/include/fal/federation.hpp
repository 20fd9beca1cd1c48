#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fal/adversary.hpp"
#include "fal/data.hpp"
#include "fal/model.hpp"

namespace fal {

/// How a local step combines the per-point loss gradients.
enum class Reduction { Mean, Sum };

std::string to_string(Reduction r);
Reduction reduction_from_string(const std::string& s);

/// Training hyper-parameters. Client count, points per client and input
/// dimension are taken from the dataset the run is given.
struct FalConfig {
    std::size_t width = 128;        // m
    std::size_t local_steps = 1;    // K
    std::size_t rounds = 1;         // T
    double eta_local = 1.0;
    double eta_global = 1.0;
    LossKind loss = LossKind::Absolute;
    AdversaryConfig adversary;
    std::size_t batch_size = 0;     // 0: full client batch
    Reduction reduction = Reduction::Mean;
    std::uint64_t seed = 0;
    bool parallel_clients = true;
    std::size_t grad_audit_every = 0;  // 0: no gradient audits
    /// Train each local step on every adversarial example generated so far in
    /// the round instead of only the freshest J.
    bool accumulate_adv_set = false;
    /// Unit-norm theory regime: rho < 1/2 and the per-round displacement bound
    /// is asserted.
    bool theory = true;
};

void validate(const FalConfig& cfg, const FederatedDataset& train);

/// Theory-regime defaults: full-batch local steps, eta_local = 1/K,
/// eta_global = 0.5 / (N J), and an l2 manifold adversary taking 10 steps of
/// rho / 4.
FalConfig theory_preset(std::size_t n_clients, std::size_t per_client, std::size_t width, std::size_t local_steps,
                        double rho, std::size_t rounds);

/// Gradient coupling measurements at one round.
struct GradientReport {
    double fl_gap_21 = 0.0;        // ||grad f - FL gradient||_{2,1}
    double fl_gap_fro = 0.0;       // same difference in Frobenius norm
    double coupling_gap_21 = 0.0;  // ||grad g - grad f||_{2,1}
    std::size_t flip_count = 0;    // columns where grad g and grad f differ
};

/// Metrics of round t (1-based `round` = t + 1). Model quantities refer to the
/// global weights U(t) the round starts from; `adv_loss` is their loss on the
/// adversarial set S(t) generated during the round.
struct RoundRecord {
    std::size_t round = 0;
    double adv_loss = 0.0;
    double clean_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;  // NaN without a test set
    double dist_init_2inf = 0.0;
    double delta_u_fro = 0.0;
    std::optional<GradientReport> grad;
};

struct ClientUpdate {
    Matrix delta;                     // W_c(t, K) - U(t)
    std::vector<DataPoint> adv_set;   // freshest adversarial example of every point
    std::size_t accumulated = 0;      // size of the accumulated multiset S_c(t)
};

enum class Algorithm { Fal, FedAvg };

/// K local steps from W_c(t,0) = U(t); each step perturbs the step's points
/// against the current local weights and descends the mean (or summed) loss on them.
ClientUpdate client_update(const ClientDataset& ds, std::size_t t, const NetParams& global, const FalConfig& cfg,
                           Algorithm algo = Algorithm::Fal);

/// -(1/N) * sum_c deltas[c]: the direction the server moves the global weights.
Matrix fl_gradient(std::span<const Matrix> deltas);

/// Mean of the client deltas in client order.
Matrix average_deltas(std::span<const Matrix> deltas);

struct GlobalLosses {
    double clean = 0.0;   // real net on the clean points
    double adv = 0.0;     // real net on the adversarial points
    double pseudo = 0.0;  // pseudo-net on the adversarial points
};

/// `clean` and `adv` are index-aligned: adv[i] is the perturbed clean[i].
GlobalLosses global_losses(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> clean,
                           std::span<const DataPoint> adv, LossKind k);

/// Fraction of points with sign(f(x)) == sign(y) (f(x) = 0 counts as +1).
double accuracy(const NetParams& p, std::span<const DataPoint> points);

/// Measurements of grad f, the FL gradient and the pseudo gradient at U(t) on S(t).
/// The pseudo gradient reuses the real network's loss slope.
GradientReport gradient_report(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> adv_set,
                               std::span<const Matrix> deltas, LossKind k);

struct FederationState {
    NetParams params;
    InitAnchor anchor;
};

/// Runs every client on U(t), aggregates in client order and applies
/// U(t+1) = U(t) + eta_global * mean delta.
RoundRecord server_round(std::size_t t, FederationState& state, const FalConfig& cfg,
                         const FederatedDataset& train, std::span<const DataPoint> test,
                         Algorithm algo = Algorithm::Fal);

struct RunResult {
    std::vector<RoundRecord> records;
    FederationState state;
};

FederationState initial_state(const FalConfig& cfg, std::size_t d);

RunResult run_fal(const FalConfig& cfg, const FederatedDataset& train, std::span<const DataPoint> test = {});
/// Same loop with the identity adversary.
RunResult run_fedavg(const FalConfig& cfg, const FederatedDataset& train, std::span<const DataPoint> test = {});
RunResult run(Algorithm algo, const FalConfig& cfg, const FederatedDataset& train,
              std::span<const DataPoint> test = {});

/// eta_global * eta_local * t * K * m^{-1/3}
double displacement_bound(const FalConfig& cfg, std::size_t t);

}  // namespace fal
