#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "risres/sca.hpp"
#include "support.hpp"

using namespace risres;

namespace {

struct Setup {
    SystemConfig cfg;
    ChannelState ch;
    IterateState s;
};

Setup make(int n, int l, int k, int m, std::uint64_t seed) {
    Setup out;
    out.cfg = oracle::small_config(n, l, k, m, seed);
    out.ch = build_channel_state(build_geometry(out.cfg), out.cfg);
    auto rng = substream(seed, stream_id::phase_init);
    out.s = initialize_iterates(out.ch, out.cfg, rng);
    return out;
}

StepRecord record_at(double t, RVec rates, double gap) {
    StepRecord r;
    r.time_s = t;
    r.rates = std::move(rates);
    r.gap = gap;
    return r;
}

}  // namespace

TEST(Sca, MethodNames) {
    for (auto m : {Method::Proposed, Method::Baseline, Method::RobustnessOnly})
        EXPECT_EQ(parse_method(method_name(m)), m);
    EXPECT_THROW(parse_method("greedy"), ConfigError);
}

TEST(Sca, MethodWeightMapping) {
    const auto st = make(2, 2, 3, 16, 1);
    const auto uw = user_weights(st.ch.direct);
    const auto p = objective_weights(Method::Proposed, st.ch);
    EXPECT_EQ(p.alpha_gradient, uw.alpha_gradient);
    EXPECT_EQ(p.alpha_redundancy, uw.alpha_redundancy);
    const auto b = objective_weights(Method::Baseline, st.ch);
    EXPECT_TRUE(b.alpha_gradient.isZero());
    EXPECT_TRUE(b.alpha_redundancy.isZero());
    const auto r = objective_weights(Method::RobustnessOnly, st.ch);
    EXPECT_TRUE(r.alpha_gradient.isZero());
    EXPECT_EQ(r.alpha_redundancy, uw.alpha_redundancy);
    EXPECT_DOUBLE_EQ(p.nu_const, 1e3);
}

TEST(Sca, InitializationRespectsPowerAndSlacks) {
    const auto st = make(2, 4, 4, 16, 7);
    BeamformingMatrix bm{st.s.w, 4};
    for (int n = 0; n < 2; ++n) EXPECT_LE(bm.ap_power(n), st.cfg.max_tx_power_w * (1 + 1e-12));
    for (int k = 0; k < 4; ++k) {
        const CVec eff = st.ch.direct.col(k) + st.ch.cascaded[static_cast<std::size_t>(k)] * st.s.v;
        const double ref = oracle::ref_sinr(eff, st.s.w, k, st.cfg.noise_power_w);
        EXPECT_LE(st.s.q(k), ref * (1 + 1e-12));
        EXPECT_NEAR(st.s.q(k), std::max(ref, 1e-12), 1e-9 * ref);
        EXPECT_LE(st.s.rate(k), st.cfg.bandwidth_hz * std::log2(1 + st.s.q(k)) * (1 + 1e-12));
        EXPECT_LE(st.s.rate(k), st.cfg.demand(k));
        EXPECT_NEAR(std::abs(st.s.v(k)), 1.0, 1e-15);
    }
}

TEST(Sca, ProjectUnitModulus) {
    CVec v(4);
    v << cdouble(2, 0), cdouble(0, -0.5), cdouble(0, 0), cdouble(-3, 0);
    const auto p = project_unit_modulus(v);
    EXPECT_NEAR(std::abs(p.v(0) - 1.0), 0.0, 1e-16);
    EXPECT_NEAR(std::abs(p.v(1) - cdouble(0, -1)), 0.0, 1e-16);
    EXPECT_EQ(p.v(2), cdouble(1, 0));
    EXPECT_NEAR(p.theta(1), 1.5 * std::numbers::pi, 1e-15);
    EXPECT_NEAR(p.theta(3), std::numbers::pi, 1e-15);
    for (int m = 0; m < 4; ++m) {
        EXPECT_GE(p.theta(m), 0.0);
        EXPECT_LT(p.theta(m), 2 * std::numbers::pi);
    }
}

TEST(Sca, StepsAlternateAndDoNotIncreaseObjective) {
    auto st = make(2, 2, 3, 16, 3);
    auto w = objective_weights(Method::Proposed, st.ch);
    ScaSettings set;
    IterateState s = st.s;
    for (int i = 0; i < 6; ++i) {
        w.alpha_v = set.penalty.at(i / 2);
        const Stage stage = s.stage;
        const double f0 = surrogate_objective(s, w, st.cfg);
        const auto res = step(s, stage, st.ch, st.cfg, w, set);
        EXPECT_NE(res.next.stage, stage);
        EXPECT_EQ(res.record.stage, stage);
        EXPECT_LE(surrogate_objective(res.next, w, st.cfg), f0 + 1e-9 * std::abs(f0));
        BeamformingMatrix bm{res.next.w, 2};
        for (int n = 0; n < 2; ++n) EXPECT_LE(bm.ap_power(n), st.cfg.max_tx_power_w * (1 + 1e-6));
        s = res.next;
    }
}

TEST(Sca, SubIterationsPerBlock) {
    SystemConfig c;
    EXPECT_EQ(sub_iterations_per_block(c), 20);
    c.per_subproblem_time_s = 0.1;
    EXPECT_EQ(sub_iterations_per_block(c), 2);
    c.per_subproblem_time_s = 0.02;
    EXPECT_EQ(sub_iterations_per_block(c), 10);
}

TEST(Sca, BlockageOrderStrongestFirst) {
    auto st = make(2, 2, 3, 4, 5);
    RVec norms = st.ch.direct.colwise().norm().transpose();
    std::vector<int> expected = {0, 1, 2};
    std::sort(expected.begin(), expected.end(), [&](int a, int b) { return norms(a) > norms(b); });
    for (int i = 0; i < 3; ++i) EXPECT_EQ(apply_blockage(st.ch), expected[static_cast<std::size_t>(i)]);
    EXPECT_THROW(apply_blockage(st.ch), DomainError);
}

TEST(Sca, DetectRecoveryDemandRule) {
    const RVec d = RVec::Constant(2, 10.0);
    std::vector<StepRecord> recs = {record_at(1.00, RVec::Constant(2, 5.0), 1.0),
                                    record_at(1.01, RVec::Constant(2, 9.95), 0.01),
                                    record_at(1.02, RVec::Constant(2, 10.0), 0.0)};
    const auto r = detect_recovery(recs, 1.0, d, 1e-2);
    EXPECT_TRUE(r.recovered);
    EXPECT_EQ(r.rule, 'd');
    EXPECT_DOUBLE_EQ(r.tq, 1.01);
}

TEST(Sca, DetectRecoveryPlateauRule) {
    const RVec d = RVec::Constant(1, 10.0);
    std::vector<StepRecord> recs;
    const double gaps[] = {0.8, 0.5, 0.3, 0.299, 0.2985, 0.2984, 0.1};
    for (int i = 0; i < 7; ++i) recs.push_back(record_at(0.01 * (i + 1), RVec::Constant(1, 5.0), gaps[i]));
    const auto r = detect_recovery(recs, 0.0, d, 1e-2);
    EXPECT_TRUE(r.recovered);
    EXPECT_EQ(r.rule, 'p');
    EXPECT_DOUBLE_EQ(r.tq, 0.06);
}

TEST(Sca, DetectRecoveryHorizonEnd) {
    const RVec d = RVec::Constant(1, 10.0);
    std::vector<StepRecord> recs;
    for (int i = 0; i < 5; ++i) recs.push_back(record_at(0.01 * (i + 1), RVec::Constant(1, 1.0), 1.0 / (i + 1)));
    const auto r = detect_recovery(recs, 0.0, d, 1e-2);
    EXPECT_FALSE(r.recovered);
    EXPECT_EQ(r.rule, '-');
    EXPECT_DOUBLE_EQ(r.tq, 0.05);
}

TEST(Sca, OptimizerTimelineAndBlockages) {
    auto cfg = oracle::small_config(2, 2, 3, 16, 2);
    cfg.per_subproblem_time_s = 0.05;  // four steps per interval
    AlternatingOptimizer opt(build_channel_state(build_geometry(cfg), cfg), cfg, Method::Proposed, ScaSettings{});
    opt.run_coherence_interval();
    ASSERT_EQ(opt.steps(), 4);
    const auto& recs = opt.timeline().records;
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(recs[static_cast<std::size_t>(i)].iteration, i + 1);
        EXPECT_NEAR(recs[static_cast<std::size_t>(i)].time_s, 0.05 * (i + 1), 1e-12);
        EXPECT_EQ(recs[static_cast<std::size_t>(i)].stage, i % 2 == 0 ? Stage::Beamforming : Stage::Phase);
        EXPECT_EQ(recs[static_cast<std::size_t>(i)].event, 0);
    }
    for (Eigen::Index m = 0; m < opt.state().v.size(); ++m) EXPECT_NEAR(std::abs(opt.state().v(m)), 1.0, 1e-14);

    const auto e = opt.blockage();
    EXPECT_EQ(e.index, 1);
    EXPECT_NEAR(e.time_s, 0.2, 1e-12);
    EXPECT_TRUE(opt.channels().user_fully_blocked(e.user));
    EXPECT_EQ(e.rates_at_onset.size(), 3);
    opt.run_coherence_interval();
    EXPECT_EQ(opt.timeline().records.back().event, 1);
    const auto rep = opt.report(1, MetricWeights{});
    EXPECT_DOUBLE_EQ(rep.t0, 0.2);
    EXPECT_GT(rep.tq, rep.t0);
    EXPECT_LE(rep.capped.absorption, 1.0);
    EXPECT_LE(rep.capped.adaptation, 1.0);
    EXPECT_GE(rep.score, 0.0);
    EXPECT_LE(rep.score, 1.0 + 1e-12);
    EXPECT_THROW((void)opt.report(2, MetricWeights{}), DomainError);
}

TEST(Sca, RepairSlacksClipsToExactConstraints) {
    auto st = make(2, 2, 3, 16, 9);
    IterateState s = st.s;
    s.q *= 10.0;
    s.rate = RVec::Constant(3, 1e9);
    s.u = RVec::Constant(3, 1e30);
    repair_slacks(s, st.ch, st.cfg);
    const auto rates = evaluate_rates(st.ch, s.w, s.v, st.cfg.noise_power_w, st.cfg.bandwidth_hz);
    for (int k = 0; k < 3; ++k) {
        EXPECT_LE(s.q(k), std::max(rates.sinr(k), 1e-12) * (1 + 1e-12));
        EXPECT_LE(s.rate(k), achievable_rate(s.q(k), st.cfg.bandwidth_hz) * (1 + 1e-12));
        EXPECT_LE(s.u(k), std::max(gradient_norm_bound(s, st.ch.cascaded[static_cast<std::size_t>(k)], k,
                                                       st.cfg.noise_power_w, st.cfg.bandwidth_hz),
                                   1e-6) * (1 + 1e-12));
    }
}
