#include "doctest.h"

#include <cmath>

#include "fal/adversary.hpp"
#include "fal/core.hpp"
#include "fal/data.hpp"
#include "fal/model.hpp"
#include "fal/verification.hpp"

using namespace fal;

namespace {

NetParams single(double a, std::vector<double> u, double b) {
    NetParams p;
    p.hidden = Matrix::from_columns({u});
    p.output = {a};
    p.bias = {b};
    return p;
}

std::vector<DataPoint> manifold_batch(RngStream& rng, std::size_t n, std::size_t d) {
    std::vector<DataPoint> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({sample_manifold_point(rng, d), rng.uniform(-1.0, 1.0)});
    return out;
}

}  // namespace

TEST_CASE("initialization") {
    RngStream rng(11, 1);
    auto [p, anchor] = init_params(128, 3, rng);
    double var = 0.0;
    const auto data = p.hidden.data();
    const std::size_t n = 128 * 3;
    for (std::size_t i = 0; i < n; ++i) var += data[i] * data[i];
    var /= static_cast<double>(n);
    CHECK(std::abs(var - 1.0 / 128.0) <= 0.1 / 128.0 * 2.0);  // 384 draws: 2x the nominal band
    CHECK(anchor.hidden0 == p.hidden);
    CHECK(anchor.output0 == p.output);
    CHECK(anchor.bias0 == p.bias);

    RngStream rng4(3, 3);
    auto [q, a4] = init_params(4, 2, rng4);
    for (double a : q.output) CHECK(std::abs(a) <= 0.62996053);
    CHECK_THROWS(init_params(0, 3, rng));
}

TEST_CASE("hidden variance over many entries") {
    RngStream rng(12, 1);
    double sum = 0.0;
    std::size_t n = 0;
    for (int rep = 0; rep < 50; ++rep) {
        auto [p, anchor] = init_params(128, 3, rng);
        for (std::size_t i = 0; i < 384; ++i) sum += p.hidden.data()[i] * p.hidden.data()[i];
        n += 384;
    }
    CHECK(std::abs(sum / static_cast<double>(n) - 1.0 / 128.0) <= 0.1 / 128.0);
}

TEST_CASE("forward") {
    NetParams zero = single(0.0, {1.0, 1.0}, 0.3);
    CHECK(forward(zero, std::vector<double>{0.4, 0.2}) == 0.0);
    CHECK(forward(single(1.0, {1.0, 0.0}, -2.0), std::vector<double>{1.0, 0.0}) == 0.0);
    CHECK(forward(single(2.0, {1.0, 0.0}, 0.5), std::vector<double>{1.0, 0.0}) == 3.0);
    CHECK_THROWS(forward(zero, std::vector<double>{1.0}));
}

TEST_CASE("pseudo_forward") {
    RngStream rng(5, 5);
    auto [p, anchor] = init_params(64, 3, rng);
    const Vector x = sample_manifold_point(rng, 3);
    CHECK(pseudo_forward(p, anchor, x) == 0.0);

    NetParams q = p;
    displace_columns(q, anchor, 0.1, rng);
    const double g1 = pseudo_forward(q, anchor, x);
    NetParams q2 = q;
    for (std::size_t r = 0; r < 64; ++r)
        for (std::size_t i = 0; i < 3; ++i) q2.hidden(i, r) = anchor.hidden0(i, r) + 2.0 * (q.hidden(i, r) - anchor.hidden0(i, r));
    CHECK(pseudo_forward(q2, anchor, x) == doctest::Approx(2.0 * g1).epsilon(1e-12));
}

TEST_CASE("absolute loss") {
    CHECK(loss_eval(LossKind::Absolute, 0.3, 0.3) == 0.0);
    CHECK(loss_eval(LossKind::Absolute, 1.0, -1.0) == 2.0);
    CHECK(loss_subgrad(LossKind::Absolute, 0.2, 0.2) == 0.0);
    CHECK(loss_subgrad(LossKind::Absolute, 0.5, 0.2) == 1.0);
    CHECK(loss_subgrad(LossKind::Absolute, -0.5, 0.2) == -1.0);
    RngStream rng(1, 2);
    for (int i = 0; i < 1000; ++i) {
        const double z1 = rng.normal(), z2 = rng.normal(), y = rng.normal();
        CHECK(std::abs(loss_eval(LossKind::Absolute, z1, y) - loss_eval(LossKind::Absolute, z2, y)) <=
              std::abs(z1 - z2) + 1e-15);
    }
}

TEST_CASE("grad_hidden") {
    RngStream rng(21, 1);
    auto [p, anchor] = init_params(32, 3, rng);
    const auto batch = manifold_batch(rng, 6, 3);

    NetParams z = p;
    std::fill(z.output.begin(), z.output.end(), 0.0);
    CHECK(frobenius(grad_hidden(z, batch, LossKind::Absolute)) == 0.0);

    // Column norm never exceeds |a_r| for unit-norm inputs.
    for (int rep = 0; rep < 20; ++rep) {
        displace_columns(p, anchor, rng.uniform(0.0, 1.0), rng);
        const auto b = manifold_batch(rng, 1 + rng.below(10), 3);
        const Matrix g = grad_hidden(p, b, LossKind::Absolute);
        for (std::size_t r = 0; r < p.width(); ++r) CHECK(norm2(g.col(r)) <= std::abs(p.output[r]) + 1e-15);
    }
    CHECK_THROWS(grad_hidden(p, std::vector<DataPoint>{}, LossKind::Absolute));
}

TEST_CASE("grad_hidden matches finite differences") {
    RngStream rng(22, 1);
    for (int rep = 0; rep < 5; ++rep) {
        auto [p, anchor] = init_params(48, 3, rng);
        displace_columns(p, anchor, 0.05, rng);
        const auto batch = manifold_batch(rng, 6, 3);
        const FiniteDiffResult r = finite_diff_audit(p, anchor, batch, 1e-6, rng.derive(rep), 60);
        CHECK(r.checked_real > 0);
        CHECK(r.checked_pseudo > 0);
        CHECK(r.max_rel_error_real <= 1e-5);
        CHECK(r.max_rel_error_pseudo <= 1e-7);
    }
}

TEST_CASE("pseudo gradient") {
    RngStream rng(23, 1);
    auto [p, anchor] = init_params(40, 3, rng);
    const auto batch = manifold_batch(rng, 5, 3);
    CHECK(pseudo_grad_hidden(p, anchor, batch, LossKind::Absolute, SlopeAt::Real) == grad_hidden(p, batch, LossKind::Absolute));

    displace_columns(p, anchor, 0.05, rng);
    const Matrix real = grad_hidden(p, batch, LossKind::Absolute);
    const Matrix coupled = pseudo_grad_hidden(p, anchor, batch, LossKind::Absolute, SlopeAt::Real);
    for (std::size_t r = 0; r < p.width(); ++r) {
        bool flipped = false;
        for (const auto& pt : batch) {
            const bool now = dot(p.hidden.col(r), pt.x) + p.bias[r] >= 0.0;
            const bool then = dot(anchor.hidden0.col(r), pt.x) + anchor.bias0[r] >= 0.0;
            flipped = flipped || now != then;
        }
        if (flipped) continue;
        for (std::size_t i = 0; i < 3; ++i) CHECK(coupled(i, r) == real(i, r));
    }
}

TEST_CASE("input gradient and Lipschitz bound") {
    RngStream rng(24, 1);
    auto [p, anchor] = init_params(30, 3, rng);
    displace_columns(p, anchor, 0.5, rng);
    const double L = input_lipschitz_bound(p);
    for (int i = 0; i < 200; ++i) {
        const Vector x = sample_manifold_point(rng, 3), y = sample_manifold_point(rng, 3);
        CHECK(std::abs(forward(p, x) - forward(p, y)) <= L * distance2(x, y) + 1e-12);
    }
    const Vector x = sample_manifold_point(rng, 3);
    const Vector g = input_gradient(p, x, 5.0, LossKind::Absolute);  // f < y: slope -1
    Vector fg;
    input_model(p)(x, &fg);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == -fg[i]);
}
