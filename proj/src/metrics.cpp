#include "risres/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace risres {

double BeamformingMatrix::ap_power(int n) const {
    return w.middleRows(static_cast<Eigen::Index>(n) * antennas_per_ap, antennas_per_ap).squaredNorm();
}

double sinr(const CVec& channel, const CMat& w, int k, double noise_power) {
    if (channel.size() != w.rows()) throw DimensionError("sinr: channel and beamformer sizes differ");
    const CVec proj = w.adjoint() * channel;  // conj(c^H w_i)
    double interference = 0.0;
    for (Eigen::Index i = 0; i < proj.size(); ++i)
        if (i != k) interference += std::norm(proj(i));
    return std::norm(proj(k)) / (interference + noise_power);
}

double achievable_rate(double sinr_value, double bandwidth_hz) {
    return bandwidth_hz * std::log2(1.0 + sinr_value);
}

GradientTerms ris_gradient_terms(const CVec& v, const CMat& cascaded, const CMat& w, int k,
                                 double noise_power, double bandwidth_hz) {
    if (cascaded.cols() != v.size() || cascaded.rows() != w.rows())
        throw DimensionError("ris_gradient_terms: inconsistent dimensions");
    const auto users = w.cols();
    GradientTerms t;
    t.h_w = cascaded.adjoint() * w;
    t.a.resize(users);
    t.b.resize(v.size(), users);
    for (Eigen::Index i = 0; i < users; ++i) {
        t.a(i) = v.dot(t.h_w.col(i));
        t.b.col(i) = std::conj(t.a(i)) * t.h_w.col(i);
    }
    t.numerator = std::norm(t.a(k));
    t.denominator = noise_power;
    CVec interference_b = CVec::Zero(v.size());
    for (Eigen::Index i = 0; i < users; ++i) {
        if (i == k) continue;
        t.denominator += std::norm(t.a(i));
        interference_b += t.b.col(i);
    }
    t.sinr_ris = t.numerator / t.denominator;
    t.grad = 2.0 * bandwidth_hz * (t.b.col(k) - t.sinr_ris * interference_b) /
             (std::numbers::ln2 * (t.numerator + t.denominator));
    return t;
}

CVec ris_rate_gradient(const CVec& v, const CMat& cascaded, const CMat& w, int k, double noise_power,
                       double bandwidth_hz) {
    return ris_gradient_terms(v, cascaded, w, k, noise_power, bandwidth_hz).grad;
}

CVec ris_rate_gradient_projection_form(const CVec& v, const CMat& cascaded, const CMat& w, int k,
                                       double noise_power, double bandwidth_hz) {
    const Eigen::Index m = v.size();
    CMat signal = CMat::Zero(m, m);
    CMat interference = CMat::Zero(m, m);
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        const CVec hw = cascaded.adjoint() * w.col(i);
        if (i == k)
            signal += hw * hw.adjoint();
        else
            interference += hw * hw.adjoint();
    }
    const double n_gamma = v.dot(signal * v).real();
    const double d_gamma = v.dot(interference * v).real() + noise_power;
    const double gamma = n_gamma / d_gamma;
    return 2.0 * bandwidth_hz * (signal * v - gamma * (interference * v)) /
           (std::numbers::ln2 * (n_gamma + d_gamma));
}

RateState evaluate_rates(const ChannelState& channels, const CMat& w, const CVec& v, double noise_power,
                         double bandwidth_hz) {
    const int users = channels.num_users();
    RateState s;
    s.sinr.resize(users);
    s.sinr_ris.resize(users);
    s.rate.resize(users);
    s.rate_ris.resize(users);
    for (int k = 0; k < users; ++k) {
        const CVec ris = channels.cascaded[static_cast<std::size_t>(k)] * v;
        const CVec eff = channels.direct.col(k) + ris;
        s.sinr(k) = sinr(eff, w, k, noise_power);
        s.sinr_ris(k) = sinr(ris, w, k, noise_power);
        s.rate(k) = achievable_rate(s.sinr(k), bandwidth_hz);
        s.rate_ris(k) = achievable_rate(s.sinr_ris(k), bandwidth_hz);
    }
    return s;
}

double adaptation_gap(const RVec& rates, const RVec& demands) {
    if (rates.size() != demands.size()) throw DimensionError("adaptation_gap: size mismatch");
    if ((demands.array() <= 0.0).any()) throw DomainError("adaptation_gap: demands must be positive");
    return (rates.array() / demands.array() - 1.0).abs().sum();
}

double redundancy_gap(double rate, double rate_ris) {
    const double d = rate - rate_ris;
    return d * d;
}

UserWeights user_weights(const CMat& direct) {
    const RVec norms = direct.colwise().norm().transpose();
    UserWeights w;
    const double top = norms.size() > 0 ? norms.maxCoeff() : 0.0;
    if (!(top > 0.0)) {
        w.alpha_gradient = RVec::Ones(norms.size());
    } else {
        w.alpha_gradient = norms / top;
    }
    w.alpha_redundancy = w.alpha_gradient;
    return w;
}

namespace {

const RateSample& sample_at(const std::vector<RateSample>& trajectory, double t) {
    const RateSample* best = nullptr;
    for (const auto& s : trajectory)
        if (s.time_s <= t + 1e-9 && (best == nullptr || s.time_s >= best->time_s)) best = &s;
    if (best == nullptr) throw DomainError("no rate sample at or before t = " + std::to_string(t));
    return *best;
}

double recovery_component(double t0, double tq, double desired) {
    if (tq < t0) throw DomainError("t_q precedes t_0");
    const double dt = tq - t0;
    return dt <= desired ? 1.0 : desired / dt;
}

ResilienceComponents components_impl(const std::vector<RateSample>& trajectory, double t0, double tq,
                                     double desired, const RVec& demands, bool capped) {
    if (trajectory.empty()) throw DomainError("empty rate trajectory");
    const auto mean_ratio = [&](const RVec& rates) {
        if (rates.size() != demands.size()) throw DimensionError("rate sample and demand sizes differ");
        RVec ratio = rates.array() / demands.array();
        if (capped) ratio = ratio.cwiseMin(1.0);
        return ratio.mean();
    };
    ResilienceComponents c;
    c.recovery = recovery_component(t0, tq, desired);
    c.absorption = mean_ratio(sample_at(trajectory, t0).rates);
    c.adaptation = mean_ratio(sample_at(trajectory, tq).rates);
    return c;
}

}  // namespace

ResilienceComponents resilience_components(const std::vector<RateSample>& trajectory, double t0, double tq,
                                           double desired_recovery_time, const RVec& demands) {
    return components_impl(trajectory, t0, tq, desired_recovery_time, demands, false);
}

ResilienceComponents capped_components(const std::vector<RateSample>& trajectory, double t0, double tq,
                                       double desired_recovery_time, const RVec& demands) {
    return components_impl(trajectory, t0, tq, desired_recovery_time, demands, true);
}

double resilience_score(const ResilienceComponents& c, const MetricWeights& weights) {
    weights.validate_simplex();
    return weights.lambda_abs * c.absorption + weights.lambda_ada * c.adaptation + weights.lambda_rec * c.recovery;
}

}  // namespace risres
