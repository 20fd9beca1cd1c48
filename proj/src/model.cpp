#include "fal/model.hpp"

#include <cmath>
#include <stdexcept>

namespace fal {

namespace {

void require_dim(const NetParams& p, std::span<const double> x) {
    if (x.size() != p.dim()) throw std::invalid_argument("model: input dimension mismatch");
}

void require_compatible(const NetParams& p, const InitAnchor& anchor) {
    if (p.dim() != anchor.dim() || p.width() != anchor.width())
        throw std::invalid_argument("model: params and anchor have different shapes");
}

void require_batch(std::span<const DataPoint> batch) {
    if (batch.empty()) throw std::invalid_argument("model: empty batch");
}

}  // namespace

std::pair<NetParams, InitAnchor> init_params(std::size_t m, std::size_t d, RngStream& rng) {
    if (m == 0 || d == 0) throw std::invalid_argument("init_params: m and d must be >= 1");
    const double variance = 1.0 / static_cast<double>(m);
    NetParams p;
    p.output = sample_uniform_sym(rng, m, std::cbrt(variance));
    p.hidden = Matrix(d, m);
    Vector entries = sample_gaussian(rng, d * m, variance);
    std::copy(entries.begin(), entries.end(), p.hidden.data().begin());
    p.bias = sample_gaussian(rng, m, variance);
    InitAnchor anchor = make_anchor(p);
    return {std::move(p), std::move(anchor)};
}

InitAnchor make_anchor(const NetParams& p) { return InitAnchor{p.hidden, p.output, p.bias}; }

double forward(const NetParams& p, std::span<const double> x) {
    require_dim(p, x);
    double out = 0.0;
    for (std::size_t r = 0; r < p.width(); ++r) {
        const double z = dot(p.hidden.col(r), x) + p.bias[r];
        if (z > 0.0) out += p.output[r] * z;
    }
    return out;
}

double pseudo_forward(const NetParams& p, const InitAnchor& anchor, std::span<const double> x) {
    require_dim(p, x);
    require_compatible(p, anchor);
    double out = 0.0;
    for (std::size_t r = 0; r < p.width(); ++r) {
        auto u0 = anchor.hidden0.col(r);
        if (dot(u0, x) + anchor.bias0[r] < 0.0) continue;
        auto u = p.hidden.col(r);
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (u[i] - u0[i]) * x[i];
        out += p.output[r] * s;
    }
    return out;
}

double loss_eval(LossKind k, double z, double y) {
    switch (k) {
        case LossKind::Absolute: return std::abs(z - y);
    }
    throw std::logic_error("loss_eval: unknown loss");
}

double loss_subgrad(LossKind k, double z, double y) {
    switch (k) {
        case LossKind::Absolute: return z > y ? 1.0 : (z < y ? -1.0 : 0.0);
    }
    throw std::logic_error("loss_subgrad: unknown loss");
}

double batch_loss(const NetParams& p, std::span<const DataPoint> batch, LossKind k) {
    require_batch(batch);
    double s = 0.0;
    for (const auto& pt : batch) s += loss_eval(k, forward(p, pt.x), pt.y);
    return s / static_cast<double>(batch.size());
}

double pseudo_batch_loss(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> batch,
                         LossKind k) {
    require_batch(batch);
    double s = 0.0;
    for (const auto& pt : batch) s += loss_eval(k, pseudo_forward(p, anchor, pt.x), pt.y);
    return s / static_cast<double>(batch.size());
}

Matrix grad_hidden(const NetParams& p, std::span<const DataPoint> batch, LossKind k) {
    require_batch(batch);
    const std::size_t m = p.width();
    const std::size_t d = p.dim();
    Matrix g(d, m);
    std::vector<char> active(m);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& pt : batch) {
        require_dim(p, pt.x);
        double f = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            const double z = dot(p.hidden.col(r), pt.x) + p.bias[r];
            active[r] = z >= 0.0;
            if (active[r]) f += p.output[r] * z;
        }
        const double slope = loss_subgrad(k, f, pt.y) * inv_n;
        if (slope == 0.0) continue;
        for (std::size_t r = 0; r < m; ++r) {
            if (!active[r]) continue;
            const double c = slope * p.output[r];
            auto col = g.col(r);
            for (std::size_t i = 0; i < d; ++i) col[i] += c * pt.x[i];
        }
    }
    return g;
}

Matrix pseudo_grad_hidden(const NetParams& p, const InitAnchor& anchor, std::span<const DataPoint> batch,
                          LossKind k, SlopeAt slope_at) {
    require_batch(batch);
    require_compatible(p, anchor);
    const std::size_t m = p.width();
    const std::size_t d = p.dim();
    Matrix g(d, m);
    std::vector<char> active0(m);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& pt : batch) {
        require_dim(p, pt.x);
        double out = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            auto u0 = anchor.hidden0.col(r);
            active0[r] = dot(u0, pt.x) + anchor.bias0[r] >= 0.0;
            if (slope_at == SlopeAt::Pseudo && active0[r]) {
                auto u = p.hidden.col(r);
                double s = 0.0;
                for (std::size_t i = 0; i < d; ++i) s += (u[i] - u0[i]) * pt.x[i];
                out += p.output[r] * s;
            }
        }
        if (slope_at == SlopeAt::Real) out = forward(p, pt.x);
        const double slope = loss_subgrad(k, out, pt.y) * inv_n;
        if (slope == 0.0) continue;
        for (std::size_t r = 0; r < m; ++r) {
            if (!active0[r]) continue;
            const double c = slope * p.output[r];
            auto col = g.col(r);
            for (std::size_t i = 0; i < d; ++i) col[i] += c * pt.x[i];
        }
    }
    return g;
}

Vector input_gradient(const NetParams& p, std::span<const double> x, double y, LossKind k) {
    require_dim(p, x);
    const std::size_t m = p.width();
    const std::size_t d = p.dim();
    Vector df(d, 0.0);
    double f = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
        auto u = p.hidden.col(r);
        const double z = dot(u, x) + p.bias[r];
        if (z < 0.0) continue;
        f += p.output[r] * z;
        for (std::size_t i = 0; i < d; ++i) df[i] += p.output[r] * u[i];
    }
    const double slope = loss_subgrad(k, f, y);
    for (double& v : df) v *= slope;
    return df;
}

double input_lipschitz_bound(const NetParams& p) {
    double s = 0.0;
    for (std::size_t r = 0; r < p.width(); ++r) s += std::abs(p.output[r]) * norm2(p.hidden.col(r));
    return s;
}

}  // namespace fal
