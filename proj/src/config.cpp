#include "risres/config.hpp"

#include <algorithm>
#include <cmath>

#include "risres/geometry.hpp"

namespace risres {

double SystemConfig::demand(int k) const {
    if (qos_rates_bps.empty()) throw ConfigError("no QoS rates configured");
    if (qos_rates_bps.size() == 1) return qos_rates_bps.front();
    return qos_rates_bps.at(static_cast<std::size_t>(k));
}

RVec SystemConfig::demands() const {
    RVec d(num_users);
    for (int k = 0; k < num_users; ++k) d(k) = demand(k);
    return d;
}

void SystemConfig::validate() const {
    if (num_aps < 1 || antennas_per_ap < 1 || num_users < 1 || num_ris_elements < 1)
        throw ConfigError("N, L, K and M must all be at least 1");
    if (perfect_square_side(num_ris_elements) < 0)
        throw ConfigError("num_ris_elements = " + std::to_string(num_ris_elements) +
                          " is not a perfect square");
    const auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
    if (!positive(bandwidth_hz) || !positive(noise_power_w) || !positive(max_tx_power_w) ||
        !positive(wavelength_m))
        throw ConfigError("bandwidth, noise power, transmit power and wavelength must be positive");
    if (!positive(coherence_time_s) || !positive(desired_recovery_time_s) ||
        !positive(per_subproblem_time_s))
        throw ConfigError("all times must be positive");
    if (per_subproblem_time_s > coherence_time_s)
        throw ConfigError("per-subproblem time exceeds the coherence time");
    if (qos_rates_bps.size() != 1 && static_cast<int>(qos_rates_bps.size()) != num_users)
        throw ConfigError("qos_rates must have one entry or one per user");
    if (std::any_of(qos_rates_bps.begin(), qos_rates_bps.end(), [&](double r) { return !positive(r); }))
        throw ConfigError("QoS rates must be positive");
    if (!positive(area_half_width_m) || !positive(user_circle_radius_m))
        throw ConfigError("area and circle radius must be positive");
    if (shadowing_std_db < 0.0) throw ConfigError("shadowing std must be non-negative");
}

void MetricWeights::validate_simplex() const {
    const double sum = lambda_abs + lambda_ada + lambda_rec;
    if (lambda_abs < 0.0 || lambda_ada < 0.0 || lambda_rec < 0.0 || std::abs(sum - 1.0) > 1e-12)
        throw ConfigError("resilience weights must be non-negative and sum to one");
}

double PenaltyLadder::at(int phase_step) const {
    return std::min(max, initial * std::pow(growth, phase_step));
}

}  // namespace risres
