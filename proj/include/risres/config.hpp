#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "risres/types.hpp"

namespace risres {

enum class RisChannelMode { LineOfSight, CorrelatedRayleigh };

/// Radio, geometry and timing parameters of one scenario. Powers are stored in
/// watts; the dBm fields of the config file are converted at parse time.
struct SystemConfig {
    int num_aps = 2;
    int antennas_per_ap = 4;
    int num_users = 4;
    int num_ris_elements = 100;

    double bandwidth_hz = 10e6;
    double noise_power_w = dbm_to_watt(-100.0);
    double max_tx_power_w = dbm_to_watt(32.0);
    double wavelength_m = 0.1;

    double coherence_time_s = 0.2;
    double desired_recovery_time_s = 0.15;
    double per_subproblem_time_s = 0.01;

    /// Per-user QoS demand in bit/s. A single entry is broadcast to all users.
    std::vector<double> qos_rates_bps = {6e6};

    double area_half_width_m = 500.0;
    double user_circle_radius_m = 250.0;
    double ap_height_m = 10.0;
    double ris_height_m = 5.0;
    double user_height_m = 1.5;

    double shadowing_std_db = 8.0;
    double pathloss_ref_db = 30.0;
    double pathloss_exponent_direct = 3.5;
    double pathloss_exponent_ris = 2.2;

    RisChannelMode ris_channel_mode = RisChannelMode::LineOfSight;
    std::uint64_t rng_seed = 1;

    /// Demand of user k (broadcasts a single configured value).
    [[nodiscard]] double demand(int k) const;
    [[nodiscard]] RVec demands() const;

    /// Throws ConfigError on any invariant violation.
    void validate() const;
};

/// Weights of the optimization objective and of the resilience metric.
struct MetricWeights {
    double lambda_abs = 1.0 / 3.0;
    double lambda_ada = 1.0 / 3.0;
    double lambda_rec = 1.0 / 3.0;
    RVec alpha_gradient;    // alpha_{1,k}
    RVec alpha_redundancy;  // alpha_{2,k}
    double nu_const = 1e3;
    double alpha_v = 1.0;

    void validate_simplex() const;
};

/// Phase-penalty schedule: alpha_v = min(max, initial * growth^j) for the j-th phase step.
struct PenaltyLadder {
    double initial = 1.0;
    double growth = 1.5;
    double max = 100.0;

    [[nodiscard]] double at(int phase_step) const;
};

struct SolverSettings {
    double abs_gap_tol = 1e-8;
    double rel_gap_tol = 1e-8;
    double feas_tol = 1e-7;
    int max_newton_steps = 400;
    double barrier_growth = 12.0;

    static SolverSettings inner_loop() {
        SolverSettings s;
        s.abs_gap_tol = 1e-6;
        s.rel_gap_tol = 1e-6;
        return s;
    }
};

struct ScaSettings {
    /// Rate unit used inside the conic subproblems (bit/s).
    double rate_unit_bps = 1e6;
    double recovery_eps = 1e-2;
    int backtracking_steps = 8;
    PenaltyLadder penalty;
    SolverSettings solver = SolverSettings::inner_loop();
};

}  // namespace risres
