#pragma once
// Shared fixtures and independent reference formulas for the tests. Nothing here
// calls into the library's metric or row code: the oracles are written out from
// the definitions.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "risres/channel.hpp"
#include "risres/config.hpp"
#include "risres/geometry.hpp"
#include "risres/sca.hpp"
#include "risres/subproblems.hpp"

namespace risres::oracle {

inline SystemConfig small_config(int n, int l, int k, int m, std::uint64_t seed) {
    SystemConfig c;
    c.num_aps = n;
    c.antennas_per_ap = l;
    c.num_users = k;
    c.num_ris_elements = m;
    c.rng_seed = seed;
    return c;
}

inline CVec random_cvec(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> g(0.0, 1.0);
    CVec x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = {g(rng), g(rng)};
    return x;
}

inline CVec random_phases(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(1.0, u(rng));
    return v;
}

// |c^H w_k|^2 / (sum_{i != k} |c^H w_i|^2 + sigma^2), summed term by term.
inline double ref_sinr(const CVec& c, const CMat& w, int k, double noise) {
    double signal = 0.0, interference = noise;
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        cdouble s = 0.0;
        for (Eigen::Index j = 0; j < c.size(); ++j) s += std::conj(c(j)) * w(j, i);
        if (i == k)
            signal = std::norm(s);
        else
            interference += std::norm(s);
    }
    return signal / interference;
}

// B log2(1 + SINR) of the RIS link, accumulated in long double: central differences with a
// 1e-6 step lose about 1e-5 relative accuracy to double rounding at rates near 1e7 bit/s.
inline double ref_ris_rate(const CMat& g, const CVec& v, const CMat& w, int k, double noise, double bw) {
    using C = std::complex<long double>;
    long double signal = 0.0L, interference = noise;
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        C s = 0.0L;
        for (Eigen::Index m = 0; m < v.size(); ++m) {
            C gw = 0.0L;
            for (Eigen::Index j = 0; j < g.rows(); ++j) gw += C(std::conj(w(j, i))) * C(g(j, m));
            s += gw * C(v(m));
        }
        if (i == k)
            signal = std::norm(s);
        else
            interference += std::norm(s);
    }
    return static_cast<double>(static_cast<long double>(bw) * std::log2(1.0L + signal / interference));
}

// Terms of the SINR row divided by sigma^2: (sum_{i != k} |c^H w_i|^2 + sigma^2) and
// |c^H w_k|^2 / q.
struct RowTerms {
    double positive = 0.0;
    double negative = 0.0;
    [[nodiscard]] double value() const { return positive - negative; }
    [[nodiscard]] double scale() const { return std::max(std::abs(positive), std::abs(negative)); }
};

inline RowTerms ref_sinr_row(const CVec& c, const CMat& w, int k, double q, double noise) {
    double interference = noise, signal = 0.0;
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
        const double p = std::norm(c.dot(w.col(i)));
        if (i == k)
            signal = p;
        else
            interference += p;
    }
    return {interference / noise, signal / (q * noise)};
}

// The two terms of the gradient-norm row divided by sigma^2: ln2 (sum_i |a_i|^2 + sigma^2)
// and 2B ||b_kk - q_ris sum_{i != k} b_ki|| / u, with a_i = v^H G^H w_i and
// b_i = conj(a_i) G^H w_i; u in bit/s.
inline RowTerms ref_gradient_row(const CMat& g, const CVec& v, const CMat& w, int k, double q_ris,
                                         double u, double noise, double bw) {
    const auto users = w.cols();
    double sum_a = 0.0;
    CVec eta = CVec::Zero(v.size());
    for (Eigen::Index i = 0; i < users; ++i) {
        const CVec hw = g.adjoint() * w.col(i);
        cdouble a = 0.0;
        for (Eigen::Index m = 0; m < v.size(); ++m) a += std::conj(v(m)) * hw(m);
        sum_a += std::norm(a);
        const CVec b = std::conj(a) * hw;
        if (i == k)
            eta += b;
        else
            eta -= q_ris * b;
    }
    return {std::numbers::ln2 * (sum_a + noise) / noise, 2.0 * bw * eta.norm() / (u * noise)};
}

struct Instance {
    SystemConfig config;
    ChannelState channels;
    IterateState state;
};

// Channels from the library's generator (they are inputs, not outputs under test) and a
// random, strictly positive expansion point.
inline Instance random_instance(int n, int l, int k, int m, std::uint64_t seed) {
    Instance in;
    in.config = small_config(n, l, k, m, seed);
    in.channels = build_channel_state(build_geometry(in.config), in.config);
    std::mt19937_64 rng(seed * 7919 + 17);
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    auto& s = in.state;
    s.w = CMat(n * l, k);
    for (int i = 0; i < k; ++i) s.w.col(i) = random_cvec(rng, n * l);
    for (int a = 0; a < n; ++a) {
        const double p = s.w.middleRows(a * l, l).squaredNorm();
        s.w.middleRows(a * l, l) *= std::sqrt(0.9 * in.config.max_tx_power_w / p);
    }
    s.v = random_phases(rng, m);
    s.rate.resize(k);
    s.rate_ris.resize(k);
    s.q.resize(k);
    s.q_ris.resize(k);
    s.u.resize(k);
    const double noise = in.config.noise_power_w;
    const double bw = in.config.bandwidth_hz;
    for (int i = 0; i < k; ++i) {
        const CMat& g = in.channels.cascaded[static_cast<std::size_t>(i)];
        const CVec ris = g * s.v;
        const CVec eff = in.channels.direct.col(i) + ris;
        s.q(i) = ref_sinr(eff, s.w, i, noise) * jitter(rng);
        s.q_ris(i) = ref_sinr(ris, s.w, i, noise) * jitter(rng);
        s.rate(i) = 0.9 * bw * std::log2(1.0 + s.q(i));
        s.rate_ris(i) = 0.9 * bw * std::log2(1.0 + s.q_ris(i));
        s.u(i) = std::max(1e-3, gradient_norm_bound(s, g, i, noise, bw) * jitter(rng));
    }
    return in;
}

inline ProblemContext context_for(const Instance& in, Method method = Method::Proposed) {
    ProblemContext ctx;
    ctx.channels = &in.channels;
    ctx.config = &in.config;
    ctx.weights = objective_weights(method, in.channels);
    ctx.weights.alpha_v = 1.0;
    return ctx;
}

}  // namespace risres::oracle
