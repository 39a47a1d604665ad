#include "risres/sca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace risres {

const char* method_name(Method m) {
    switch (m) {
        case Method::Proposed: return "proposed";
        case Method::Baseline: return "baseline";
        case Method::RobustnessOnly: return "robustness-only";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "proposed") return Method::Proposed;
    if (name == "baseline") return Method::Baseline;
    if (name == "robustness-only") return Method::RobustnessOnly;
    throw ConfigError("unknown method '" + name + "'");
}

ObjectiveWeights objective_weights(Method method, const ChannelState& channels, double nu_scale) {
    const auto uw = user_weights(channels.direct);
    const auto users = uw.alpha_gradient.size();
    ObjectiveWeights w;
    w.alpha_gradient = RVec::Zero(users);
    w.alpha_redundancy = RVec::Zero(users);
    if (method == Method::Proposed) {
        w.alpha_gradient = uw.alpha_gradient;
        w.alpha_redundancy = uw.alpha_redundancy;
    } else if (method == Method::RobustnessOnly) {
        w.alpha_redundancy = uw.alpha_redundancy;
    }
    double top = 1.0;
    if (users > 0) top = std::max({top, w.alpha_gradient.maxCoeff(), w.alpha_redundancy.maxCoeff()});
    w.nu_const = nu_scale * top;
    return w;
}

PhaseShiftVector project_unit_modulus(const CVec& v) {
    PhaseShiftVector out;
    out.v.resize(v.size());
    out.theta.resize(v.size());
    for (Eigen::Index m = 0; m < v.size(); ++m) {
        double theta = std::abs(v(m)) > 0.0 ? std::arg(v(m)) : 0.0;
        if (theta < 0.0) theta += 2.0 * std::numbers::pi;
        if (theta >= 2.0 * std::numbers::pi) theta = 0.0;
        out.theta(m) = theta;
        out.v(m) = std::abs(v(m)) > 0.0 ? v(m) / std::abs(v(m)) : cdouble(1.0, 0.0);
    }
    return out;
}

IterateState initialize_iterates(const ChannelState& channels, const SystemConfig& config, std::mt19937_64& rng) {
    const int users = channels.num_users();
    const int per_ap = channels.antennas_per_ap;
    IterateState s;
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    s.v.resize(channels.num_elements());
    for (Eigen::Index m = 0; m < s.v.size(); ++m) s.v(m) = std::polar(1.0, phase(rng));

    s.w = CMat::Zero(channels.stacked_dim(), users);
    const double per_user = std::sqrt(config.max_tx_power_w / users);
    for (int k = 0; k < users; ++k) {
        const CVec h = effective_channel(channels.direct.col(k), channels.cascaded[static_cast<std::size_t>(k)], s.v);
        for (int n = 0; n < channels.num_aps; ++n) {
            const auto block = h.segment(static_cast<Eigen::Index>(n) * per_ap, per_ap);
            const double norm = block.norm();
            auto target = s.w.block(static_cast<Eigen::Index>(n) * per_ap, k, per_ap, 1);
            if (norm > 0.0) {
                target = per_user * block / norm;
            } else {
                target.setZero();
                target(0, 0) = per_user;
            }
        }
    }
    const auto rates = evaluate_rates(channels, s.w, s.v, config.noise_power_w, config.bandwidth_hz);
    s.q = rates.sinr;
    s.q_ris = rates.sinr_ris;
    const RVec demands = config.demands();
    s.rate = rates.rate.cwiseMin(demands);
    s.rate_ris = rates.rate_ris.cwiseMin(demands);
    s.u = RVec::Constant(users, std::numeric_limits<double>::infinity());
    s.stage = Stage::Beamforming;
    repair_slacks(s, channels, config);
    return s;
}

void repair_slacks(IterateState& state, const ChannelState& channels, const SystemConfig& config) {
    const auto rates = evaluate_rates(channels, state.w, state.v, config.noise_power_w, config.bandwidth_hz);
    const auto users = state.rate.size();
    for (Eigen::Index k = 0; k < users; ++k) {
        state.q(k) = std::max(std::min(state.q(k), rates.sinr(k)), 1e-12);
        state.q_ris(k) = std::max(std::min(state.q_ris(k), rates.sinr_ris(k)), 1e-12);
        state.rate(k) = std::clamp(state.rate(k), 0.0, achievable_rate(state.q(k), config.bandwidth_hz));
        state.rate_ris(k) = std::clamp(state.rate_ris(k), 0.0, achievable_rate(state.q_ris(k), config.bandwidth_hz));
        const double bound = gradient_norm_bound(state, channels.cascaded[static_cast<std::size_t>(k)],
                                                 static_cast<int>(k), config.noise_power_w, config.bandwidth_hz);
        state.u(k) = std::max(std::min(state.u(k), bound), 1e-6);
    }
}

RVec delivered_rates(const IterateState& state, const ChannelState& channels, const SystemConfig& config) {
    const auto rates = evaluate_rates(channels, state.w, state.v, config.noise_power_w, config.bandwidth_hz);
    return state.rate.cwiseMin(rates.rate);
}

double surrogate_objective(const IterateState& state, const ObjectiveWeights& weights, const SystemConfig& config) {
    const RVec demands = config.demands();
    const auto users = state.rate.size();
    double f = weights.nu_const * adaptation_gap(state.rate, demands);
    for (Eigen::Index k = 0; k < users; ++k) {
        if (weights.alpha_gradient.size() == users) f -= weights.alpha_gradient(k) * state.u(k) / demands(k);
        if (weights.alpha_redundancy.size() == users) {
            const double g = (state.rate(k) - state.rate_ris(k)) / demands(k);
            f += weights.alpha_redundancy(k) * g * g;
        }
    }
    return f - weights.alpha_v * state.v.squaredNorm();
}

namespace {

IterateState interpolate(const IterateState& a, const IterateState& b, double t) {
    IterateState s = a;
    s.w = a.w + t * (b.w - a.w);
    s.v = a.v + t * (b.v - a.v);
    s.rate = a.rate + t * (b.rate - a.rate);
    s.rate_ris = a.rate_ris + t * (b.rate_ris - a.rate_ris);
    s.q = a.q + t * (b.q - a.q);
    s.q_ris = a.q_ris + t * (b.q_ris - a.q_ris);
    s.u = a.u + t * (b.u - a.u);
    return s;
}

}  // namespace

StepResult step(const IterateState& state, Stage stage, const ChannelState& channels, const SystemConfig& config,
                const ObjectiveWeights& weights, const ScaSettings& settings) {
    ProblemContext ctx;
    ctx.channels = &channels;
    ctx.config = &config;
    ctx.weights = weights;
    ctx.rate_unit_bps = settings.rate_unit_bps;

    StepResult out;
    out.next = state;
    out.record.stage = stage;
    out.record.alpha_v = weights.alpha_v;

    const auto problem =
        stage == Stage::Beamforming ? assemble_beamforming_problem(state, ctx) : assemble_phase_problem(state, ctx);
    const auto sol = conic::solve(problem.program, settings.solver);
    out.record.status = sol.status;

    // A feasible point of the convex restriction is enough: the line search below
    // only accepts it when the surrogate objective does not increase.
    if (sol.usable() || sol.feasible) {
        const IterateState candidate = unpack_solution(problem, sol.x, state, ctx);
        const double f0 = surrogate_objective(state, weights, config);
        double t = 1.0;
        for (int i = 0; i <= settings.backtracking_steps; ++i, t *= 0.5) {
            IterateState trial = interpolate(state, candidate, t);
            repair_slacks(trial, channels, config);
            if (surrogate_objective(trial, weights, config) <= f0) {
                out.next = std::move(trial);
                out.record.step_fraction = t;
                break;
            }
        }
    }
    out.next.stage = stage == Stage::Beamforming ? Stage::Phase : Stage::Beamforming;
    const RVec delivered = delivered_rates(out.next, channels, config);
    out.record.rates = delivered;
    out.record.gap = adaptation_gap(delivered, config.demands());
    out.record.objective = surrogate_objective(out.next, weights, config);
    return out;
}

int apply_blockage(ChannelState& channels) {
    int best = -1;
    double best_norm = -1.0;
    for (int k = 0; k < channels.num_users(); ++k) {
        if (channels.user_fully_blocked(k)) continue;
        const double n = channels.direct.col(k).norm();
        if (n > best_norm) {
            best_norm = n;
            best = k;
        }
    }
    if (best < 0) throw DomainError("apply_blockage: every user is already blocked");
    block_user(channels, best);
    return best;
}

RecoveryResult detect_recovery(const std::vector<StepRecord>& records, double t0, const RVec& demands, double eps) {
    RecoveryResult out;
    out.tq = t0;
    const StepRecord* prev = nullptr;
    int flat = 0;
    for (const auto& r : records) {
        if (r.time_s <= t0 + 1e-12) continue;
        out.tq = r.time_s;
        if ((r.rates.array() >= demands.array() * (1.0 - eps)).all()) {
            out.recovered = true;
            out.rule = 'd';
            return out;
        }
        if (prev != nullptr) {
            const double change = std::abs(r.gap - prev->gap) / std::max(std::abs(prev->gap), 1e-12);
            flat = change < eps ? flat + 1 : 0;
            if (flat >= 3) {
                out.recovered = true;
                out.rule = 'p';
                return out;
            }
        }
        prev = &r;
    }
    return out;
}

int sub_iterations_per_block(const SystemConfig& config) {
    return static_cast<int>(std::floor(config.coherence_time_s / config.per_subproblem_time_s + 1e-9));
}

AlternatingOptimizer::AlternatingOptimizer(ChannelState channels, SystemConfig config, Method method,
                                           ScaSettings settings)
    : channels_(std::move(channels)), config_(std::move(config)), method_(method), settings_(std::move(settings)) {
    config_.validate();
    weights_ = objective_weights(method_, channels_);
    weights_.alpha_v = settings_.penalty.at(0);
    auto rng = substream(config_.rng_seed, stream_id::phase_init);
    state_ = initialize_iterates(channels_, config_, rng);
}

const StepRecord& AlternatingOptimizer::advance() {
    const Stage stage = state_.stage;
    weights_.alpha_v = settings_.penalty.at(phase_steps_);
    auto res = step(state_, stage, channels_, config_, weights_, settings_);
    if (stage == Stage::Phase) ++phase_steps_;
    if (res.record.status != conic::SolveStatus::Optimal && res.record.status != conic::SolveStatus::NearOptimal)
        ++solver_failures_;
    ++iteration_;
    elapsed_ += config_.per_subproblem_time_s;
    res.record.iteration = iteration_;
    res.record.time_s = elapsed_;
    res.record.event = current_event_;
    state_ = std::move(res.next);
    timeline_.records.push_back(std::move(res.record));
    return timeline_.records.back();
}

void AlternatingOptimizer::run_coherence_interval() {
    phase_steps_ = 0;
    const int n = sub_iterations_per_block(config_);
    for (int i = 0; i < n; ++i) advance();
    state_.v = project_unit_modulus(state_.v).v;
    repair_slacks(state_, channels_, config_);
}

const BlockageEvent& AlternatingOptimizer::blockage() {
    BlockageEvent e;
    e.index = current_event_ + 1;
    e.time_s = elapsed_;
    e.user = apply_blockage(channels_);
    const double alpha_v = weights_.alpha_v;
    weights_ = objective_weights(method_, channels_);
    weights_.alpha_v = alpha_v;
    e.rates_at_onset = delivered_rates(state_, channels_, config_);
    repair_slacks(state_, channels_, config_);
    current_event_ = e.index;
    timeline_.events.push_back(std::move(e));
    return timeline_.events.back();
}

ResilienceReport AlternatingOptimizer::report(int index, const MetricWeights& lambda) const {
    if (index < 1 || index > static_cast<int>(timeline_.events.size()))
        throw DomainError("report: no blockage event " + std::to_string(index));
    const auto& e = timeline_.events[static_cast<std::size_t>(index - 1)];
    std::vector<StepRecord> window;
    std::vector<RateSample> trajectory{{e.time_s, e.rates_at_onset}};
    for (const auto& r : timeline_.records)
        if (r.event == index) {
            window.push_back(r);
            trajectory.push_back({r.time_s, r.rates});
        }
    const RVec demands = config_.demands();
    const auto rec = detect_recovery(window, e.time_s, demands, settings_.recovery_eps);
    ResilienceReport out;
    out.t0 = e.time_s;
    out.tq = rec.tq;
    out.recovered = rec.recovered;
    out.raw = resilience_components(trajectory, out.t0, out.tq, config_.desired_recovery_time_s, demands);
    out.capped = capped_components(trajectory, out.t0, out.tq, config_.desired_recovery_time_s, demands);
    out.score = resilience_score(out.capped, lambda);
    return out;
}

}  // namespace risres
