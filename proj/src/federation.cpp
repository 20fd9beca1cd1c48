#include "fal/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fal/parallel.hpp"

namespace fal {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kClientStream = 2;

AdversaryConfig identity_adversary(AdversaryConfig cfg) {
    cfg.rho = 0.0;
    return cfg;
}

}  // namespace

std::string to_string(Reduction r) { return r == Reduction::Sum ? "sum" : "mean"; }

Reduction reduction_from_string(const std::string& s) {
    if (s == "mean") return Reduction::Mean;
    if (s == "sum") return Reduction::Sum;
    throw std::invalid_argument("unknown reduction '" + s + "' (expected mean, sum)");
}

void validate(const FalConfig& cfg, const FederatedDataset& train) {
    if (cfg.width == 0) throw std::invalid_argument("config: width must be >= 1");
    if (cfg.local_steps == 0) throw std::invalid_argument("config: local_steps must be >= 1");
    if (!(cfg.eta_local >= 0.0) || !std::isfinite(cfg.eta_local))
        throw std::invalid_argument("config: eta_local must be finite and >= 0");
    if (!(cfg.eta_global >= 0.0) || !std::isfinite(cfg.eta_global))
        throw std::invalid_argument("config: eta_global must be finite and >= 0");
    if (train.num_clients() == 0 || train.points_per_client() == 0)
        throw std::invalid_argument("config: empty training set");
    for (const auto& c : train.clients)
        if (c.points.size() != train.points_per_client())
            throw std::invalid_argument("config: clients must hold equally many points");
    if (cfg.batch_size > train.points_per_client())
        throw std::invalid_argument("config: batch_size exceeds points per client");
    if (cfg.accumulate_adv_set && cfg.batch_size != 0)
        throw std::invalid_argument("config: accumulate_adv_set requires full-batch local steps");
    validate(cfg.adversary, cfg.theory);
    if (cfg.theory && cfg.reduction != Reduction::Mean)
        throw std::invalid_argument("config: theory mode uses the mean reduction");
    if (cfg.theory) {
        for (const auto& c : train.clients)
            for (const auto& pt : c.points)
                if (!on_manifold(pt.x) || std::abs(pt.y) > 1.0)
                    throw std::invalid_argument("config: theory mode needs manifold inputs and |y| <= 1");
    }
}

FalConfig theory_preset(std::size_t n_clients, std::size_t per_client, std::size_t width, std::size_t local_steps,
                        double rho, std::size_t rounds) {
    if (n_clients == 0 || per_client == 0 || local_steps == 0)
        throw std::invalid_argument("theory_preset: counts must be >= 1");
    FalConfig cfg;
    cfg.width = width;
    cfg.local_steps = local_steps;
    cfg.rounds = rounds;
    cfg.eta_local = 1.0 / static_cast<double>(local_steps);
    cfg.eta_global = 0.5 / static_cast<double>(n_clients * per_client);
    cfg.adversary.mode = AdversaryMode::L2Sphere;
    cfg.adversary.rho = rho;
    cfg.adversary.steps = 10;
    cfg.adversary.step_size = rho / 4.0;
    cfg.batch_size = 0;
    cfg.theory = true;
    return cfg;
}

ClientUpdate client_update(const ClientDataset& ds, std::size_t t, const NetParams& global, const FalConfig& cfg,
                           Algorithm algo) {
    if (ds.points.empty()) throw std::invalid_argument("client_update: client has no data");
    if (ds.points.front().x.size() != global.dim())
        throw std::invalid_argument("client_update: data dimension does not match the model");

    const AdversaryConfig adv = algo == Algorithm::Fal ? cfg.adversary : identity_adversary(cfg.adversary);
    const std::size_t J = ds.points.size();
    const std::size_t B = cfg.batch_size == 0 ? J : cfg.batch_size;
    RngStream rng = RngStream(cfg.seed, kClientStream).derive(t, ds.id);

    NetParams local = global;
    std::vector<DataPoint> latest(J);
    std::vector<char> have(J, 0);
    std::vector<DataPoint> accumulated;

    std::vector<std::size_t> order(J);
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = J;  // forces a shuffle before the first minibatch

    std::vector<DataPoint> batch;
    batch.reserve(B);
    for (std::size_t k = 0; k < cfg.local_steps; ++k) {
        batch.clear();
        if (B == J) {
            for (std::size_t j = 0; j < J; ++j) batch.push_back(ds.points[j]);
            for (std::size_t j = 0; j < J; ++j) {
                batch[j].x = perturb(adv, local, ds.points[j]);
                latest[j] = batch[j];
                have[j] = 1;
            }
        } else {
            for (std::size_t b = 0; b < B; ++b) {
                if (cursor == J) {
                    rng.shuffle(order);
                    cursor = 0;
                }
                const std::size_t j = order[cursor++];
                DataPoint pt{perturb(adv, local, ds.points[j]), ds.points[j].y};
                latest[j] = pt;
                have[j] = 1;
                batch.push_back(std::move(pt));
            }
        }
        Matrix grad;
        std::size_t used = batch.size();
        if (cfg.accumulate_adv_set) {
            accumulated.insert(accumulated.end(), batch.begin(), batch.end());
            grad = grad_hidden(local, accumulated, cfg.loss);
            used = accumulated.size();
        } else {
            grad = grad_hidden(local, batch, cfg.loss);
        }
        const double scale = cfg.reduction == Reduction::Sum ? static_cast<double>(used) : 1.0;
        local.hidden.add_scaled(grad, -cfg.eta_local * scale);
    }

    // Points no minibatch reached this round are perturbed against U(t).
    for (std::size_t j = 0; j < J; ++j)
        if (!have[j]) latest[j] = DataPoint{perturb(adv, global, ds.points[j]), ds.points[j].y};

    ClientUpdate out;
    out.delta = local.hidden - global.hidden;
    out.adv_set = std::move(latest);
    out.accumulated = cfg.accumulate_adv_set ? accumulated.size() : cfg.local_steps * B;
    return out;
}

Matrix average_deltas(std::span<const Matrix> deltas) {
    if (deltas.empty()) throw std::invalid_argument("average_deltas: no client deltas");
    Matrix sum = deltas.front();
    for (std::size_t c = 1; c < deltas.size(); ++c) sum += deltas[c];
    sum *= 1.0 / static_cast<double>(deltas.size());
    return sum;
}

Matrix fl_gradient(std::span<const Matrix> deltas) {
    Matrix g = average_deltas(deltas);
    g *= -1.0;
    return g;
}

GlobalLosses global_losses(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> clean,
                           std::span<const DataPoint> adv, LossKind k) {
    if (clean.empty() || adv.empty()) throw std::invalid_argument("global_losses: empty point set");
    if (clean.size() != adv.size()) throw std::invalid_argument("global_losses: clean/adversarial size mismatch");
    GlobalLosses out;
    out.clean = batch_loss(p, clean, k);
    out.adv = batch_loss(p, adv, k);
    out.pseudo = pseudo_batch_loss(p, anchor, adv, k);
    return out;
}

double accuracy(const NetParams& p, std::span<const DataPoint> points) {
    if (points.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t hits = 0;
    for (const auto& pt : points) {
        const bool pos = forward(p, pt.x) >= 0.0;
        if (pos == (pt.y >= 0.0)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(points.size());
}

GradientReport gradient_report(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> adv_set,
                               std::span<const Matrix> deltas, LossKind k) {
    const Matrix real = grad_hidden(p, adv_set, k);
    const Matrix fl = fl_gradient(deltas);
    const Matrix pseudo = pseudo_grad_hidden(p, anchor, adv_set, k, SlopeAt::Real);

    GradientReport rep;
    const Matrix fl_diff = real - fl;
    rep.fl_gap_21 = norm_2_1(fl_diff);
    rep.fl_gap_fro = frobenius(fl_diff);
    const Matrix coupling = pseudo - real;
    rep.coupling_gap_21 = norm_2_1(coupling);
    for (std::size_t r = 0; r < coupling.cols(); ++r) {
        auto c = coupling.col(r);
        if (std::any_of(c.begin(), c.end(), [](double v) { return v != 0.0; })) ++rep.flip_count;
    }
    return rep;
}

double displacement_bound(const FalConfig& cfg, std::size_t t) {
    return cfg.eta_global * cfg.eta_local * static_cast<double>(t) * static_cast<double>(cfg.local_steps) /
           std::cbrt(static_cast<double>(cfg.width));
}

FederationState initial_state(const FalConfig& cfg, std::size_t d) {
    RngStream rng(cfg.seed, kInitStream);
    auto [params, anchor] = init_params(cfg.width, d, rng);
    return FederationState{std::move(params), std::move(anchor)};
}

RoundRecord server_round(std::size_t t, FederationState& state, const FalConfig& cfg,
                         const FederatedDataset& train, std::span<const DataPoint> test, Algorithm algo) {
    const std::size_t N = train.num_clients();
    std::vector<std::optional<ClientUpdate>> updates(N);
    auto work = [&](std::size_t c) { updates[c] = client_update(train.clients[c], t, state.params, cfg, algo); };
    if (cfg.parallel_clients) {
        parallel_for(N, work);
    } else {
        for (std::size_t c = 0; c < N; ++c) work(c);
    }

    std::vector<Matrix> deltas;
    std::vector<DataPoint> adv_set;
    deltas.reserve(N);
    for (std::size_t c = 0; c < N; ++c) {
        if (!updates[c]) throw std::runtime_error("round " + std::to_string(t) + ": missing delta of client " +
                                                  std::to_string(c));
        deltas.push_back(std::move(updates[c]->delta));
        adv_set.insert(adv_set.end(), updates[c]->adv_set.begin(), updates[c]->adv_set.end());
    }
    const std::vector<DataPoint> clean = train.flatten();

    RoundRecord rec;
    rec.round = t + 1;
    rec.adv_loss = batch_loss(state.params, adv_set, cfg.loss);
    rec.clean_loss = batch_loss(state.params, clean, cfg.loss);
    rec.train_acc = accuracy(state.params, clean);
    rec.test_acc = accuracy(state.params, test);
    rec.dist_init_2inf = norm_2_inf(state.params.hidden - state.anchor.hidden0);
    if (cfg.grad_audit_every > 0 && t % cfg.grad_audit_every == 0)
        rec.grad = gradient_report(state.params, state.anchor, adv_set, deltas, cfg.loss);

    const Matrix mean_delta = average_deltas(deltas);
    rec.delta_u_fro = frobenius(mean_delta);
    state.params.hidden.add_scaled(mean_delta, cfg.eta_global);
    if (!state.params.hidden.all_finite())
        throw std::runtime_error("round " + std::to_string(t) + ": global weights became non-finite");
    return rec;
}

RunResult run(Algorithm algo, const FalConfig& cfg, const FederatedDataset& train, std::span<const DataPoint> test) {
    validate(cfg, train);
    RunResult out{{}, initial_state(cfg, train.dim())};
    out.records.reserve(cfg.rounds);
    for (std::size_t t = 0; t < cfg.rounds; ++t) {
        out.records.push_back(server_round(t, out.state, cfg, train, test, algo));
        if (cfg.theory) {
            const double dist = norm_2_inf(out.state.params.hidden - out.state.anchor.hidden0);
            if (dist > displacement_bound(cfg, t + 1))
                throw std::logic_error("round " + std::to_string(t) + ": displacement " + format_double(dist) +
                                       " exceeds eta_glo*eta_loc*t*K*m^{-1/3} = " +
                                       format_double(displacement_bound(cfg, t + 1)));
        }
    }
    if (out.state.params.output != out.state.anchor.output0 || out.state.params.bias != out.state.anchor.bias0)
        throw std::logic_error("output weights or biases changed during training");
    return out;
}

RunResult run_fal(const FalConfig& cfg, const FederatedDataset& train, std::span<const DataPoint> test) {
    return run(Algorithm::Fal, cfg, train, test);
}

RunResult run_fedavg(const FalConfig& cfg, const FederatedDataset& train, std::span<const DataPoint> test) {
    return run(Algorithm::FedAvg, cfg, train, test);
}

}  // namespace fal
