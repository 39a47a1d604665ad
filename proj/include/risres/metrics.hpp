#pragma once

#include <vector>

#include "risres/channel.hpp"
#include "risres/config.hpp"
#include "risres/types.hpp"

namespace risres {

/// Beamformers as the columns of an NL x K matrix; rows [n*L, (n+1)*L) belong to AP n.
struct BeamformingMatrix {
    CMat w;
    int antennas_per_ap = 0;

    [[nodiscard]] int num_aps() const { return static_cast<int>(w.rows()) / antennas_per_ap; }
    [[nodiscard]] int num_users() const { return static_cast<int>(w.cols()); }
    /// sum_k ||w_{n,k}||^2
    [[nodiscard]] double ap_power(int n) const;
};

/// |c^H w_k|^2 / (sum_{i != k} |c^H w_i|^2 + sigma^2).
double sinr(const CVec& channel, const CMat& w, int k, double noise_power);

/// B log2(1 + sinr).
double achievable_rate(double sinr_value, double bandwidth_hz);

/// Quantities entering the RIS-link rate gradient of user k.
struct GradientTerms {
    CVec a;     // a_{k,i} = v^H G_k^H w_i
    CMat b;     // column i: b_{k,i} = (w_i^H G_k v) G_k^H w_i
    CMat h_w;   // column i: G_k^H w_i
    double sinr_ris = 0.0;
    double numerator = 0.0;    // |a_{k,k}|^2
    double denominator = 0.0;  // sum_{i != k} |a_{k,i}|^2 + sigma^2
    CVec grad;
};

/// Gradient of r_k^RIS with respect to the phase vector, built from the (a, b) terms.
///
/// The returned vector is d r / d Re(v) + j d r / d Im(v) (twice the conjugate
/// Wirtinger derivative), so the first-order change of the rate along dv is
/// Re{grad^H dv}.
GradientTerms ris_gradient_terms(const CVec& v, const CMat& cascaded, const CMat& w, int k,
                                 double noise_power, double bandwidth_hz);

CVec ris_rate_gradient(const CVec& v, const CMat& cascaded, const CMat& w, int k,
                       double noise_power, double bandwidth_hz);

/// Same gradient computed through the projections h^w_{k,i} = G_k^H w_i and the
/// quotient-rule form; an independent path used for cross-checking.
CVec ris_rate_gradient_projection_form(const CVec& v, const CMat& cascaded, const CMat& w, int k,
                                       double noise_power, double bandwidth_hz);

/// Per-user SINRs and rates for a given operating point.
struct RateState {
    RVec sinr;
    RVec sinr_ris;
    RVec rate;      // B log2(1 + sinr)
    RVec rate_ris;  // B log2(1 + sinr_ris)
};

RateState evaluate_rates(const ChannelState& channels, const CMat& w, const CVec& v,
                         double noise_power, double bandwidth_hz);

/// sum_k |r_k / r_k^des - 1|.
double adaptation_gap(const RVec& rates, const RVec& demands);

/// |r - r_ris|^2 in (bit/s)^2.
double redundancy_gap(double rate, double rate_ris);

struct UserWeights {
    RVec alpha_gradient;
    RVec alpha_redundancy;
};

/// alpha_{1,k} = alpha_{2,k} = ||h_k|| / max_i ||h_i|| on the current direct channels.
/// All-zero channels fall back to unit weights.
UserWeights user_weights(const CMat& direct);

/// Snapshot of delivered per-user rates at one point in time.
struct RateSample {
    double time_s = 0.0;
    RVec rates;
};

struct ResilienceComponents {
    double absorption = 0.0;
    double adaptation = 0.0;
    double recovery = 0.0;
};

struct ResilienceReport {
    ResilienceComponents raw;
    ResilienceComponents capped;
    double score = 0.0;  // from the capped components
    double t0 = 0.0;
    double tq = 0.0;
    bool recovered = false;
};

/// Absorption from the sample at t0, adaptation from the sample at tq, recovery
/// from the piecewise time-to-recovery rule. The trajectory must contain samples
/// at (or nearest below) t0 and tq.
ResilienceComponents resilience_components(const std::vector<RateSample>& trajectory, double t0,
                                           double tq, double desired_recovery_time,
                                           const RVec& demands);

/// lambda_1 r_abs + lambda_2 r_ada + lambda_3 r_rec; weights must lie on the simplex.
double resilience_score(const ResilienceComponents& c, const MetricWeights& weights);

/// Components with the two rate ratios capped at 1 per user.
ResilienceComponents capped_components(const std::vector<RateSample>& trajectory, double t0,
                                       double tq, double desired_recovery_time,
                                       const RVec& demands);

}  // namespace risres
