// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only name,...] [--known-failures name,...] [--work DIR]
//
// Exit status is non-zero when a criterion fails that is not listed as a known failure.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "risres/experiment.hpp"
#include "risres/metrics.hpp"
#include "support.hpp"

using namespace risres;
using namespace risres::oracle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string format(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    const double h = 1e-6;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto in = random_instance(2, 2, 3, 16, seed);
        const double noise = in.config.noise_power_w, bw = in.config.bandwidth_hz;
        for (int k = 0; k < 3; ++k) {
            const CMat& g = in.channels.cascaded[static_cast<std::size_t>(k)];
            const CVec grad = ris_rate_gradient(in.state.v, g, in.state.w, k, noise, bw);
            CVec fd(grad.size());
            for (Eigen::Index m = 0; m < grad.size(); ++m) {
                double part[2];
                for (int c = 0; c < 2; ++c) {
                    const cdouble step = c == 0 ? cdouble(h, 0.0) : cdouble(0.0, h);
                    CVec vp = in.state.v, vm = in.state.v;
                    vp(m) += step;
                    vm(m) -= step;
                    part[c] = (ref_ris_rate(g, vp, in.state.w, k, noise, bw) -
                               ref_ris_rate(g, vm, in.state.w, k, noise, bw)) / (2.0 * h);
                }
                fd(m) = {part[0], part[1]};
            }
            worst = std::max(worst, (grad - fd).cwiseAbs().maxCoeff() / grad.cwiseAbs().maxCoeff());
        }
    }
    const double t = seconds_since(t0);
    return {worst < 1e-6 && t < 5.0, format("max relative error %.2e over 150 gradients, %.2f s", worst, t)};
}

// Row value at the expansion point against the exact expression. The rows are scaled by
// 1/sigma^2 and their terms can be large, so the error is taken relative to the largest
// term of the exact expression (at least 1).
Outcome taylor_exactness() {
    std::map<std::string, double> worst{{"sinr-w", 0.0}, {"ris-sinr-w", 0.0}, {"gradient-w", 0.0}, {"gradient-v", 0.0}};
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto in = random_instance(2, 2, 3, 16, seed);
        const auto ctx = context_for(in);
        const int k = static_cast<int>(seed % 3);
        const auto& s = in.state;
        const double noise = in.config.noise_power_w, bw = in.config.bandwidth_hz;
        const CMat& g = in.channels.cascaded[static_cast<std::size_t>(k)];
        const CVec ris = g * s.v;
        const CVec eff = in.channels.direct.col(k) + ris;

        const auto bf = assemble_beamforming_problem(s, ctx);
        const RVec xw = pack_expansion(bf, s, ctx);
        const auto ph = assemble_phase_problem(s, ctx);
        const RVec xv = pack_expansion(ph, s, ctx);

        const auto record = [&](const char* row_name, double row, double exact, double scale) {
            worst[row_name] = std::max(worst[row_name], std::abs(row - exact) / std::max(1.0, scale));
        };
        const auto sinr_eff = ref_sinr_row(eff, s.w, k, s.q(k), noise);
        record("sinr-w", sinr_restriction_w(s, eff, k, Link::Effective, bf.beamforming, noise).evaluate(xw),
               sinr_eff.value(), sinr_eff.scale());
        const auto sinr_ris = ref_sinr_row(ris, s.w, k, s.q_ris(k), noise);
        record("ris-sinr-w", sinr_restriction_w(s, ris, k, Link::RisOnly, bf.beamforming, noise).evaluate(xw),
               sinr_ris.value(), sinr_ris.scale());
        const auto exact = ref_gradient_row(g, s.v, s.w, k, s.q_ris(k), s.u(k), noise, bw);
        record("gradient-w", gradient_norm_restriction_w(s, g, k, bf.beamforming, ctx).evaluate(xw), exact.value(),
               exact.scale());
        record("gradient-v", gradient_norm_restriction_v(s, g, k, ph.phase, ctx).evaluate(xv), exact.value(),
               exact.scale());
    }
    bool pass = true;
    std::string detail = "100 points each, max scaled error";
    for (const auto& [row_name, err] : worst) {
        pass = pass && err < 1e-9;
        detail += format(" %s %.1e", row_name.c_str(), err);
    }
    return {pass, detail};
}

Outcome sca_behavior() {
    SystemConfig cfg = small_config(2, 4, 4, 64, 1);
    const auto channels = build_channel_state(build_geometry(cfg), cfg);
    auto rng = substream(cfg.rng_seed, stream_id::phase_init);
    IterateState state = initialize_iterates(channels, cfg, rng);
    const RVec mf = evaluate_rates(channels, state.w, state.v, cfg.noise_power_w, cfg.bandwidth_hz).rate;
    cfg.qos_rates_bps.assign(mf.data(), mf.data() + mf.size());
    for (auto& r : cfg.qos_rates_bps) r *= 0.8;
    rng = substream(cfg.rng_seed, stream_id::phase_init);
    state = initialize_iterates(channels, cfg, rng);

    const ScaSettings settings;
    ObjectiveWeights weights = objective_weights(Method::Proposed, channels);
    double worst_increase = 0.0, worst_power = 0.0, worst_rate = 0.0, final_gap = 0.0;
    int phase_steps = 0, failures = 0;
    for (int z = 0; z < 50; ++z) {
        weights.alpha_v = settings.penalty.at(phase_steps);
        const Stage stage = state.stage;
        const double before = surrogate_objective(state, weights, cfg);
        const auto res = step(state, stage, channels, cfg, weights, settings);
        if (stage == Stage::Phase) ++phase_steps;
        if (res.record.status != conic::SolveStatus::Optimal && res.record.status != conic::SolveStatus::NearOptimal)
            ++failures;
        const double after = surrogate_objective(res.next, weights, cfg);
        worst_increase = std::max(worst_increase, (after - before) / std::max(1.0, std::abs(before)));
        for (int n = 0; n < cfg.num_aps; ++n) {
            const double p = res.next.w.middleRows(n * cfg.antennas_per_ap, cfg.antennas_per_ap).squaredNorm();
            worst_power = std::max(worst_power, (p - cfg.max_tx_power_w) / cfg.max_tx_power_w);
        }
        for (int k = 0; k < cfg.num_users; ++k) {
            const double cap = cfg.bandwidth_hz * std::log2(1.0 + res.next.q(k));
            const double cap_ris = cfg.bandwidth_hz * std::log2(1.0 + res.next.q_ris(k));
            worst_rate = std::max({worst_rate, (res.next.rate(k) - cap) / cap, (res.next.rate_ris(k) - cap_ris) / cap_ris});
        }
        final_gap = res.record.gap;
        state = res.next;
    }
    const double tol = settings.solver.feas_tol;
    const bool pass = worst_increase <= 1e-6 && worst_power <= 1e-6 && worst_rate <= tol && final_gap < 1e-2;
    return {pass, format("max objective increase %.1e (relative), power excess %.1e P, rate excess %.1e, final "
                         "gap %.2e, %d solver failures",
                         worst_increase, worst_power, worst_rate, final_gap, failures)};
}

Outcome unit_modulus() {
    double worst_pre = 0.0, worst_post = 0.0, worst_change = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SystemConfig cfg;
        cfg.rng_seed = seed;
        AlternatingOptimizer opt(build_channel_state(build_geometry(cfg), cfg), cfg, Method::Proposed, ScaSettings{});
        const int n = sub_iterations_per_block(cfg);
        for (int i = 0; i < n; ++i) opt.advance();
        const CVec v = opt.state().v;
        worst_pre = std::max(worst_pre, (v.cwiseAbs().array() - 1.0).abs().maxCoeff());
        const CVec projected = project_unit_modulus(v).v;
        worst_post = std::max(worst_post, (projected.cwiseAbs().array() - 1.0).abs().maxCoeff());
        const auto& ch = opt.channels();
        const RVec before = evaluate_rates(ch, opt.state().w, v, cfg.noise_power_w, cfg.bandwidth_hz).rate;
        const RVec after = evaluate_rates(ch, opt.state().w, projected, cfg.noise_power_w, cfg.bandwidth_hz).rate;
        worst_change = std::max(worst_change, ((after - before).array().abs() / before.array()).maxCoeff());
    }
    const double ulp = 4.0 * std::numeric_limits<double>::epsilon();
    return {worst_pre < 1e-2 && worst_post <= ulp && worst_change < 1e-2,
            format("5 seeds: pre-projection max ||v|-1| %.2e, post %.1e, max rate change %.3f%%", worst_pre,
                   worst_post, 100.0 * worst_change)};
}

Outcome metric_suite() {
    std::vector<std::string> bad;
    const auto expect = [&](const char* what, double got, double want) {
        if (std::abs(got - want) > 1e-15) bad.push_back(format("%s: %.17g != %.17g", what, got, want));
    };
    const RVec demand = RVec::Constant(3, 6.0);
    RVec low(3), mid(3), high(3);
    low << 3.0, 6.0, 9.0;
    mid << 6.0, 6.0, 3.0;
    high << 6.0, 12.0, 6.0;
    const std::vector<RateSample> traj{{0.0, low}, {0.1, mid}, {0.3, high}};
    const auto fast = resilience_components(traj, 0.0, 0.1, 0.15, demand);
    expect("r_rec at 0.1 s", fast.recovery, 1.0);
    expect("r_abs averaging", fast.absorption, 1.0);
    expect("r_ada averaging", fast.adaptation, 5.0 / 6.0);
    const auto slow = resilience_components(traj, 0.0, 0.3, 0.15, demand);
    expect("r_rec at 0.3 s", slow.recovery, 0.5);
    expect("r_ada at 0.3 s", slow.adaptation, 4.0 / 3.0);
    const auto capped = capped_components(traj, 0.0, 0.3, 0.15, demand);
    expect("capped r_abs", capped.absorption, 2.5 / 3.0);
    expect("capped r_ada", capped.adaptation, 1.0);
    MetricWeights thirds;
    expect("best case r", resilience_score({1.0, 1.0, 1.0}, thirds), 1.0);
    MetricWeights skew;
    skew.lambda_abs = 0.5;
    skew.lambda_ada = 0.25;
    skew.lambda_rec = 0.25;
    expect("weighted r", resilience_score({0.5, 1.0, 0.5}, skew), 0.625);
    skew.lambda_rec = 0.5;
    bool threw = false;
    try {
        resilience_score({1.0, 1.0, 1.0}, skew);
    } catch (const ConfigError&) {
        threw = true;
    }
    if (!threw) bad.emplace_back("non-simplex weights accepted");
    std::string detail = bad.empty() ? "piecewise, simplex and averaging cases exact" : bad.front();
    return {bad.empty(), detail};
}

double fraction(const std::vector<bool>& xs) {
    return xs.empty() ? 0.0 : static_cast<double>(std::count(xs.begin(), xs.end(), true)) / static_cast<double>(xs.size());
}

struct AdaptationData {
    fs::path manifest;
    std::map<std::pair<std::string, int>, std::map<std::uint64_t, ResilienceReport>> reports;
};

Outcome adaptation_trend(const fs::path& work, AdaptationData& data) {
    ExperimentSpec spec;
    spec.seeds = parse_seed_list("1-20");
    spec.output_dir = work / "adaptation";
    spec.threads = 0;
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run_adaptation_experiment(spec);
    const double t = seconds_since(t0);
    data.manifest = result.manifest_path;
    for (const auto& run : result.runs)
        for (std::size_t b = 0; b < run.reports.size(); ++b)
            data.reports[{method_name(run.method), static_cast<int>(b + 1)}][run.seed] = run.reports[b];

    const auto& r = data.reports;
    bool pass = t <= 15 * 60;
    std::string detail = format("%.0f s, %d failed runs;", t, result.failed_runs());
    for (int b : {2, 3}) {
        double mp = 0.0, mb = 0.0;
        std::vector<bool> greater;
        for (auto seed : spec.seeds) {
            const double p = r.at({"proposed", b}).at(seed).capped.adaptation;
            const double q = r.at({"baseline", b}).at(seed).capped.adaptation;
            mp += p / 20.0;
            mb += q / 20.0;
            greater.push_back(p > q);
        }
        pass = pass && mp >= mb && fraction(greater) >= 0.7;
        detail += format(" b%d r_ada proposed %.4f baseline %.4f, proposed > baseline in %.0f%% of seeds;", b, mp, mb,
                         100.0 * fraction(greater));
    }
    std::vector<bool> lower;
    for (auto seed : spec.seeds)
        lower.push_back(r.at({"robustness-only", 1}).at(seed).capped.absorption <
                        r.at({"proposed", 1}).at(seed).capped.absorption);
    pass = pass && fraction(lower) >= 0.7;
    detail += format(" robustness-only r_abs < proposed in %.0f%% of seeds", 100.0 * fraction(lower));
    return {pass, detail};
}

std::vector<double> ranks(const std::vector<double>& xs) {
    std::vector<std::size_t> idx(xs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        for (std::size_t t = i; t <= j; ++t) out[idx[t]] = 0.5 * static_cast<double>(i + j) + 1.0;
        i = j + 1;
    }
    return out;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i] / n;
        my += ry[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

Outcome scaling_trend(const fs::path& work, const std::string& seeds) {
    ExperimentSpec spec;
    spec.seeds = parse_seed_list(seeds);
    spec.output_dir = work / "scaling";
    spec.methods = {Method::Proposed, Method::Baseline};
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = run_scaling_experiment(spec);
    const double t = seconds_since(t0);
    std::map<std::pair<int, std::string>, double> mean;
    const auto b = static_cast<std::size_t>(spec.scaling_blockage - 1);
    for (const auto& run : result.runs)
        mean[{run.ris_elements, method_name(run.method)}] += run.reports[b].score / static_cast<double>(spec.seeds.size());
    std::vector<double> ms, rs;
    std::string curve;
    for (int m : spec.ris_sweep) {
        ms.push_back(m);
        rs.push_back(mean[{m, "proposed"}]);
        curve += format(" %d:%.4f", m, rs.back());
    }
    const double rho = spearman(ms, rs);
    const int top = spec.ris_sweep.back();
    const double p = mean[{top, "proposed"}], q = mean[{top, "baseline"}];
    return {rho > 0.8 && p >= q,
            format("%zu seeds, %.0f s; proposed mean r by M%s; Spearman %.2f; at M=%d proposed %.4f baseline %.4f",
                   spec.seeds.size(), t, curve.c_str(), rho, top, p, q)};
}

Outcome determinism(const fs::path& work, const AdaptationData& data) {
    if (data.manifest.empty()) return {false, "adaptation experiment did not run"};
    const auto rep = rerun_manifest(data.manifest, work / "adaptation_rerun");
    return {rep.ok(), format("re-run from manifest: %zu mismatched, %zu missing files", rep.mismatched.size(),
                             rep.missing.size())};
}

std::set<std::string> split(const std::string& s) {
    std::set<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.insert(item);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string only, known, work_dir = (fs::temp_directory_path() / "risres_acceptance").string();
    std::string scaling_seeds = "1-20";
    app.add_option("--only", only, "comma-separated subset of criteria");
    app.add_option("--known-failures", known, "criteria whose failure does not fail the run");
    app.add_option("--work", work_dir, "scratch directory for experiment outputs");
    app.add_option("--scaling-seeds", scaling_seeds, "seed list of the M sweep");
    CLI11_PARSE(app, argc, argv);

    const auto selected = split(only);
    const auto known_failures = split(known);
    const fs::path work = work_dir;
    fs::remove_all(work);
    fs::create_directories(work);

    AdaptationData adaptation;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient-oracle", gradient_oracle},
        {"taylor-exactness", taylor_exactness},
        {"sca-behavior", sca_behavior},
        {"unit-modulus", unit_modulus},
        {"metric-suite", metric_suite},
        {"adaptation-trend", [&] { return adaptation_trend(work, adaptation); }},
        {"scaling-trend", [&] { return scaling_trend(work, scaling_seeds); }},
        {"determinism", [&] { return determinism(work, adaptation); }},
    };
    int unexpected = 0;
    for (const auto& [name, run] : criteria) {
        if (!selected.empty() && !selected.count(name)) continue;
        if (name == "determinism" && adaptation.manifest.empty() && !selected.empty() && !selected.count("adaptation-trend")) {
            AdaptationData tmp;
            adaptation_trend(work, tmp);
            adaptation = tmp;
        }
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const bool tolerated = !o.pass && known_failures.count(name);
        if (!o.pass && !tolerated) ++unexpected;
        std::printf("%s %s: %s%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                    tolerated ? " [known failure]" : "");
        std::fflush(stdout);
    }
    return unexpected == 0 ? 0 : 1;
}
