#include "doctest.h"

#include <cmath>

#include "fal/verification.hpp"

using namespace fal;

TEST_CASE("loglog slope") {
    const std::vector<double> xs{1.0, 10.0, 100.0, 1000.0};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(3.0 * std::pow(x, -1.0 / 3.0));
    CHECK(loglog_slope(xs, ys) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
    CHECK(std::isnan(loglog_slope(xs, std::vector<double>{1.0, 0.0, 1.0, 1.0})));
    CHECK_THROWS(loglog_slope(std::vector<double>{1.0}, std::vector<double>{1.0}));
}

TEST_CASE("small statistics") {
    CHECK(max_min_ratio(std::vector<double>{2.0, 8.0, 4.0}) == 4.0);
    CHECK(std::isinf(max_min_ratio(std::vector<double>{0.0, 1.0})));
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(nonincreasing_steps(std::vector<double>{5.0, 4.0, 4.0, 6.0, 1.0}) == 3);
}

TEST_CASE("displace_columns moves every column by exactly the step") {
    RngStream rng(1, 1);
    auto [p, anchor] = init_params(64, 4, rng);
    displace_columns(p, anchor, 0.125, rng);
    const Matrix diff = p.hidden - anchor.hidden0;
    for (std::size_t r = 0; r < 64; ++r) CHECK(norm2(diff.col(r)) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("sup gap") {
    RngStream rng(2, 1);
    auto [p, anchor] = init_params(128, 3, rng);
    std::vector<Vector> xs;
    for (int i = 0; i < 50; ++i) xs.push_back(sample_manifold_point(rng, 3));
    double f0 = 0.0;
    for (const auto& x : xs) f0 = std::max(f0, std::abs(forward(p, x)));
    CHECK(sup_gap(p, anchor, xs) == doctest::Approx(f0).epsilon(1e-12));  // g is zero at U(0)
    CHECK_THROWS(sup_gap(p, anchor, std::vector<Vector>{Vector{1.0, 0.0}}));
}

TEST_CASE("finite difference study") {
    FiniteDiffOptions opt;
    opt.seeds = 3;
    const StudyReport rep = finite_diff_study(opt);
    CHECK(rep.passed());
    CHECK(rep.summary["max_rel_error"].get<double>() <= 1e-5);
    CHECK(rep.summary["max_rel_error_pseudo"].get<double>() <= 1e-7);
    CHECK(rep.json()["pass"].get<bool>());
}

TEST_CASE("uniform approximation study on a small grid") {
    UniformApproxOptions opt;
    opt.m_grid = {64, 256, 1024};
    opt.n_samples = 500;
    opt.seeds = 3;
    const StudyReport rep = uniform_approx_study(opt);
    CHECK(rep.rows.size() == 3 * 3);
    CHECK(rep.summary["slope"].get<double>() < 0.0);
    CHECK(rep.summary["max_pseudo_at_init"].get<double>() == 0.0);
    CHECK(rep.csv().rfind(rep.header.front(), 0) == 0);
}

TEST_CASE("coupling study fields") {
    CouplingOptions opt;
    opt.m_grid = {256, 1024};
    opt.seeds = 2;
    const StudyReport rep = coupling_study(opt);
    CHECK(rep.summary.contains("flip_fraction_slope"));
    CHECK(rep.summary.contains("normalized_gap_ratio"));
    CHECK_FALSE(rep.checks.empty());
}

TEST_CASE("fl gap study with one local step") {
    FlGapOptions opt;
    opt.m_grid = {64, 256};
    opt.local_steps = 1;
    opt.rounds = 3;
    const StudyReport rep = fl_gap_study(opt);
    CHECK(rep.passed());
    CHECK(rep.summary["max_fl_gap_fro"].get<double>() <= 1e-9);
}

TEST_CASE("fl gap trace and loss summaries") {
    std::vector<RoundRecord> recs(3);
    recs[0].adv_loss = 0.5;
    recs[1].adv_loss = 0.2;
    recs[2].adv_loss = 0.3;
    recs[1].grad = GradientReport{0.8, 0.1, 0.0, 0};
    const FlGapTrace tr = fl_gap_trace(recs, 64);
    CHECK(tr.audits == 1);
    CHECK(tr.max_gap_21 == 0.8);
    CHECK(tr.max_normalized == doctest::Approx(0.8 / 16.0));
    CHECK(min_adv_loss(recs) == 0.2);
    CHECK(mean_adv_loss(recs) == doctest::Approx(1.0 / 3.0));
}
