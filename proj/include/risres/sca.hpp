#pragma once

#include <random>
#include <string>
#include <vector>

#include "risres/channel.hpp"
#include "risres/config.hpp"
#include "risres/metrics.hpp"
#include "risres/solver.hpp"
#include "risres/subproblems.hpp"

namespace risres {

/// How the objective weights alpha_{1,k}, alpha_{2,k} follow the channel.
enum class Method { Proposed, Baseline, RobustnessOnly };

const char* method_name(Method m);
Method parse_method(const std::string& name);

/// Objective weights for `method` from the current direct channels.
ObjectiveWeights objective_weights(Method method, const ChannelState& channels, double nu_scale = 1e3);

struct PhaseShiftVector {
    CVec v;
    RVec theta;  // in [0, 2 pi)
};

/// v_m / |v_m| (zero entries map to phase 0).
PhaseShiftVector project_unit_modulus(const CVec& v);

/// Matched filtering on the effective channel with an equal per-AP power split,
/// random initial phases, and slacks from the achieved SINRs and rates.
IterateState initialize_iterates(const ChannelState& channels, const SystemConfig& config,
                                 std::mt19937_64& rng);

/// Clips the slacks so that the exact constraints hold at the current (w, v):
/// q <= SINR, r <= B log2(1 + q), u <= exact gradient-norm bound.
void repair_slacks(IterateState& state, const ChannelState& channels, const SystemConfig& config);

/// Rates actually delivered: min(allocated rate, B log2(1 + SINR)).
RVec delivered_rates(const IterateState& state, const ChannelState& channels,
                     const SystemConfig& config);

/// nu Psi - sum alpha_1 u / r^des + sum alpha_2 ((r - r_ris) / r^des)^2 - alpha_v sum |v_m|^2,
/// evaluated on the slack variables.
double surrogate_objective(const IterateState& state, const ObjectiveWeights& weights,
                           const SystemConfig& config);

struct StepRecord {
    int iteration = 0;
    double time_s = 0.0;
    Stage stage = Stage::Beamforming;
    double gap = 0.0;  // Psi of the delivered rates
    RVec rates;        // delivered, bit/s
    double objective = 0.0;
    conic::SolveStatus status = conic::SolveStatus::Optimal;
    double step_fraction = 0.0;
    double alpha_v = 0.0;
    int event = 0;  // blockage number whose interval this record belongs to (0 = none)
};

struct StepResult {
    IterateState next;
    StepRecord record;
};

/// One SCA iteration of the given stage around `state`. On solver failure the
/// expansion point is kept. A backtracking search along the segment towards the
/// subproblem solution keeps the surrogate objective from increasing.
StepResult step(const IterateState& state, Stage stage, const ChannelState& channels,
                const SystemConfig& config, const ObjectiveWeights& weights,
                const ScaSettings& settings);

struct BlockageEvent {
    int index = 0;  // 1-based
    double time_s = 0.0;
    int user = -1;
    std::string policy = "strongest-next";
    RVec rates_at_onset;
};

/// Blocks all direct links of the strongest not-yet-blocked user; returns that user.
/// Throws DomainError when every user is already blocked.
int apply_blockage(ChannelState& channels);

struct RecoveryResult {
    double tq = 0.0;
    bool recovered = false;
    char rule = '-';  // 'd' demand satisfaction, 'p' plateau, '-' horizon end
};

/// Earliest record after t0 where every demand is met within (1 - eps) or where the
/// gap has changed by less than eps (relative) over three consecutive records.
RecoveryResult detect_recovery(const std::vector<StepRecord>& records, double t0,
                               const RVec& demands, double eps);

struct ScenarioTimeline {
    std::vector<StepRecord> records;
    std::vector<BlockageEvent> events;
};

/// Sequential driver of the alternating optimization over coherence intervals and
/// blockage events.
class AlternatingOptimizer {
public:
    AlternatingOptimizer(ChannelState channels, SystemConfig config, Method method,
                         ScaSettings settings);

    /// floor(T_c / T_calc) alternating steps; afterwards v is projected to unit modulus.
    void run_coherence_interval();
    /// Strongest-next blockage at the current time; returns the event.
    const BlockageEvent& blockage();

    [[nodiscard]] const IterateState& state() const { return state_; }
    [[nodiscard]] const ChannelState& channels() const { return channels_; }
    [[nodiscard]] const ScenarioTimeline& timeline() const { return timeline_; }
    [[nodiscard]] const ObjectiveWeights& weights() const { return weights_; }
    [[nodiscard]] double elapsed() const { return elapsed_; }
    [[nodiscard]] int solver_failures() const { return solver_failures_; }
    [[nodiscard]] int steps() const { return iteration_; }

    /// Resilience report of blockage `index` (1-based) using records up to the next event.
    [[nodiscard]] ResilienceReport report(int index, const MetricWeights& lambda) const;

    /// Single step with the engine's bookkeeping (time, stage toggle, ladder).
    const StepRecord& advance();

private:
    ChannelState channels_;
    SystemConfig config_;
    Method method_;
    ScaSettings settings_;
    ObjectiveWeights weights_;
    IterateState state_;
    ScenarioTimeline timeline_;
    double elapsed_ = 0.0;
    int iteration_ = 0;
    int phase_steps_ = 0;
    int solver_failures_ = 0;
    int current_event_ = 0;
};

int sub_iterations_per_block(const SystemConfig& config);

}  // namespace risres
