#include "risres/subproblems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace risres {

using conic::AffineExpr;
using conic::ConeBlock;
using conic::ConeKind;

namespace {

constexpr double kDegenerateEta = 1e-12;

/// Real and imaginary parts of a complex-affine form sum_j c_j z_j + c0, where z_j is
/// stored as (x[re_j], x[re_j + 1]).
struct ComplexAffine {
    AffineExpr re;
    AffineExpr im;

    void add(int re_index, cdouble c) {
        re.add(re_index, c.real());
        re.add(re_index + 1, -c.imag());
        im.add(re_index, c.imag());
        im.add(re_index + 1, c.real());
    }
    void add_constant(cdouble c) {
        re.constant += c.real();
        im.constant += c.imag();
    }
    /// Re{c * this}.
    [[nodiscard]] AffineExpr real_of_product(cdouble c) const {
        AffineExpr out = c.real() * re;
        out += (-c.imag()) * im;
        return out;
    }
};

std::string indexed(const char* base, int a) { return std::string(base) + "[" + std::to_string(a) + "]"; }
std::string indexed(const char* base, int a, int b) {
    return std::string(base) + "[" + std::to_string(a) + "," + std::to_string(b) + "]";
}

/// c^H w_i as a complex-affine form of the beamforming variables of user i.
ComplexAffine projection_w(const CVec& c, int i, const BeamformingLayout& layout) {
    ComplexAffine z;
    for (int j = 0; j < layout.stacked_dim; ++j) z.add(layout.w_re(j, i), std::conj(c(j)));
    return z;
}

/// Normalized expansion quantities of the gradient-norm row of user k.
struct EtaTerms {
    CMat h;        // column i: Gn^H w~_i
    CVec a_bar;    // a_i / sigma
    CVec eta;      // (b_kk - q~ sum b_ki) / sigma^2
    CVec interference_b;
    double norm = 0.0;
};

EtaTerms eta_terms(const IterateState& s, const CMat& cascaded, int k, double noise_power) {
    const double sigma = std::sqrt(noise_power);
    const CMat gn = cascaded / sigma;
    EtaTerms t;
    t.h = gn.adjoint() * s.w;
    const auto users = s.w.cols();
    t.a_bar.resize(users);
    t.interference_b = CVec::Zero(gn.cols());
    for (Eigen::Index i = 0; i < users; ++i) {
        t.a_bar(i) = s.v.dot(t.h.col(i));
        if (i != k) t.interference_b += std::conj(t.a_bar(i)) * t.h.col(i);
    }
    t.eta = std::conj(t.a_bar(k)) * t.h.col(k) - s.q_ris(k) * t.interference_b;
    t.norm = t.eta.norm();
    return t;
}

double scale_of(const AffineExpr& e) {
    double m = std::abs(e.constant);
    for (const auto& [i, c] : e.terms) m = std::max(m, std::abs(c));
    return m;
}

/// Linear row `expr >= 0` scaled to unit coefficient magnitude.
AffineExpr normalized(AffineExpr e) {
    e.compress();
    const double m = scale_of(e);
    if (m > 0.0) e *= 1.0 / m;
    return e;
}

/// Adds variables, shared rows, and objective terms for the rate/SINR/gradient slacks.
/// `with_u[k]` selects users whose gradient slack enters the program.
SlackLayout add_slacks(conic::ConicProgram& p, const IterateState& s, const ProblemContext& ctx,
                       const std::vector<bool>& with_u) {
    const SystemConfig& cfg = *ctx.config;
    const ObjectiveWeights& wts = ctx.weights;
    const int users = static_cast<int>(s.rate.size());
    const double unit = ctx.rate_unit_bps;
    SlackLayout l;
    // Rates may dip to -1 program unit: for a link with SINR near zero, r >= 0 together
    // with r <= B log2(1 + q) leaves no interior. Read-back clamps them to [0, B log2(1 + q)].
    l.rate = p.num_vars;
    for (int k = 0; k < users; ++k) p.add_variable(indexed("r", k), -1.0);
    l.rate_ris = p.num_vars;
    for (int k = 0; k < users; ++k) p.add_variable(indexed("r_ris", k), -1.0);
    l.q = p.num_vars;
    for (int k = 0; k < users; ++k) p.add_variable(indexed("q", k), 0.0);
    l.q_ris = p.num_vars;
    for (int k = 0; k < users; ++k) p.add_variable(indexed("q_ris", k), 0.0);
    l.q_scale.resize(static_cast<std::size_t>(users));
    l.q_ris_scale.resize(static_cast<std::size_t>(users));
    for (int k = 0; k < users; ++k) {
        l.q_scale[static_cast<std::size_t>(k)] = std::clamp(s.q(k), 1e-12, 1.0);
        l.q_ris_scale[static_cast<std::size_t>(k)] = std::clamp(s.q_ris(k), 1e-12, 1.0);
    }
    // u is measured relative to its expansion value; in absolute units a small u~
    // would squeeze the variable into a sliver next to its bound.
    l.u.assign(static_cast<std::size_t>(users), -1);
    l.u_scale.assign(static_cast<std::size_t>(users), 0.0);
    for (int k = 0; k < users; ++k) {
        if (!with_u[static_cast<std::size_t>(k)]) continue;
        l.u[static_cast<std::size_t>(k)] = p.add_variable(indexed("u", k), 0.0);
        l.u_scale[static_cast<std::size_t>(k)] = s.u(k);
    }
    l.gap_aux.assign(static_cast<std::size_t>(users), -1);
    for (int k = 0; k < users; ++k) l.gap_aux[static_cast<std::size_t>(k)] = p.add_variable(indexed("e", k));
    l.redundancy_aux.assign(static_cast<std::size_t>(users), -1);
    for (int k = 0; k < users; ++k)
        if (wts.alpha_redundancy.size() == users && wts.alpha_redundancy(k) > 0.0)
            l.redundancy_aux[static_cast<std::size_t>(k)] = p.add_variable(indexed("d", k));

    p.objective.conservativeResize(p.num_vars);
    const double log_scale = unit * std::numbers::ln2 / cfg.bandwidth_hz;
    for (int k = 0; k < users; ++k) {
        const double inv_des = unit / cfg.demand(k);
        // r U ln2 / B <= ln(1 + q) as (x, 1, 1 + q) in the exponential cone.
        for (int link = 0; link < 2; ++link) {
            const int r = (link == 0 ? l.rate : l.rate_ris) + k;
            const int q = (link == 0 ? l.q : l.q_ris) + k;
            auto& b = p.add_block(ConeKind::Exponential, indexed(link == 0 ? "rate" : "rate_ris", k));
            AffineExpr x;
            x.add(r, log_scale);
            AffineExpr z(1.0);
            z.add(q, l.sinr_scale(link == 1, k));
            b.rows = {x, AffineExpr(1.0), z};
        }
        // e_k >= |r_k / r_k^des - 1|
        const int e = l.gap_aux[static_cast<std::size_t>(k)];
        auto& g = p.add_block(ConeKind::Nonnegative, indexed("gap", k));
        AffineExpr up(1.0);
        up.add(e, 1.0).add(l.rate + k, -inv_des);
        AffineExpr down(-1.0);
        down.add(e, 1.0).add(l.rate + k, inv_des);
        g.rows = {up, down};
        p.objective(e) += wts.nu_const;

        const int u = l.u[static_cast<std::size_t>(k)];
        if (u >= 0) p.objective(u) -= wts.alpha_gradient(k) * l.u_scale[static_cast<std::size_t>(k)] / cfg.demand(k);

        // d_k >= ((r_k - r_k^RIS) / r_k^des)^2
        const int d = l.redundancy_aux[static_cast<std::size_t>(k)];
        if (d >= 0) {
            TaylorRow row;
            AffineExpr diff;
            diff.add(l.rate + k, inv_des).add(l.rate_ris + k, -inv_des);
            row.squares = {diff};
            row.affine.add(d, -1.0);
            const double gap = (s.rate(k) - s.rate_ris(k)) / cfg.demand(k);
            p.blocks.push_back(row.to_block(indexed("redundancy", k), std::max(gap * gap, 1e-2)));
            p.objective(d) += wts.alpha_redundancy(k);
        }
    }
    return l;
}

double taylor_tau(const TaylorRow& row, const RVec& x) {
    AffineExpr neg = row.affine;
    neg *= -1.0;
    const double l = neg.evaluate(x);
    return l > 1e-12 ? l : 1.0;
}

std::vector<bool> gradient_users(const IterateState& s, const ChannelState& ch, const ProblemContext& ctx,
                                 int& dropped) {
    const int users = ch.num_users();
    std::vector<bool> with_u(static_cast<std::size_t>(users), false);
    dropped = 0;
    for (int k = 0; k < users; ++k) {
        if (ctx.weights.alpha_gradient.size() != users || ctx.weights.alpha_gradient(k) <= 0.0) continue;
        const auto t = eta_terms(s, ch.cascaded[static_cast<std::size_t>(k)], k, ctx.config->noise_power_w);
        if (t.norm < kDegenerateEta || !(s.u(k) > 0.0)) {
            ++dropped;
            continue;
        }
        with_u[static_cast<std::size_t>(k)] = true;
    }
    return with_u;
}

}  // namespace

double TaylorRow::evaluate(const RVec& x) const {
    double v = affine.evaluate(x);
    for (const auto& s : squares) {
        const double e = s.evaluate(x);
        v += e * e;
    }
    return v;
}

ConeBlock TaylorRow::to_block(std::string name, double tau) const {
    ConeBlock b;
    b.name = std::move(name);
    AffineExpr l = affine;
    l *= -1.0 / tau;
    if (squares.empty()) {
        b.kind = ConeKind::Nonnegative;
        b.rows = {normalized(l)};
        return b;
    }
    // sum s^2 <= L  <=>  ||(2 s / sqrt(tau), L / tau - 1)|| <= L / tau + 1
    b.kind = ConeKind::SecondOrder;
    AffineExpr head = l;
    head.constant += 1.0;
    head.compress();
    b.rows.push_back(head);
    const double f = 2.0 / std::sqrt(tau);
    for (const auto& s : squares) {
        AffineExpr r = s;
        r *= f;
        r.compress();
        b.rows.push_back(r);
    }
    AffineExpr tail = l;
    tail.constant -= 1.0;
    tail.compress();
    b.rows.push_back(tail);
    return b;
}

TaylorRow sinr_restriction_w(const IterateState& expansion, const CVec& channel, int k, Link link,
                             const BeamformingLayout& layout, double noise_power) {
    if (channel.size() != layout.stacked_dim) throw DimensionError("sinr_restriction_w: channel size");
    const double q_tilde = link == Link::Effective ? expansion.q(k) : expansion.q_ris(k);
    if (!(q_tilde > 0.0)) throw DomainError("sinr_restriction_w: expansion slack must be positive");
    const CVec c = channel / std::sqrt(noise_power);
    TaylorRow row;
    for (int i = 0; i < layout.num_users; ++i) {
        if (i == k) continue;
        const auto z = projection_w(c, i, layout);
        row.squares.push_back(z.re);
        row.squares.push_back(z.im);
    }
    const cdouble gamma = c.dot(expansion.w.col(k));
    const int q = (link == Link::Effective ? layout.slack.q : layout.slack.q_ris) + k;
    row.affine = AffineExpr(1.0);
    row.affine.add(q, std::norm(gamma) / (q_tilde * q_tilde) * layout.slack.sinr_scale(link == Link::RisOnly, k));
    row.affine += (-2.0 / q_tilde) * projection_w(c, k, layout).real_of_product(std::conj(gamma));
    row.affine.compress();
    return row;
}

TaylorRow gradient_norm_restriction_w(const IterateState& expansion, const CMat& cascaded, int k,
                                      const BeamformingLayout& layout, const ProblemContext& ctx) {
    const double noise = ctx.config->noise_power_w;
    const auto t = eta_terms(expansion, cascaded, k, noise);
    if (t.norm < kDegenerateEta) throw DegenerateGradientError("gradient row: eta vanishes");
    const int u = layout.slack.u.at(static_cast<std::size_t>(k));
    if (u < 0) throw DomainError("gradient row: user has no gradient slack");
    const double u_tilde = expansion.u(k) / ctx.rate_unit_bps;
    if (!(u_tilde > 0.0)) throw DomainError("gradient row: expansion slack must be positive");

    const double sigma = std::sqrt(noise);
    const CMat gn = cascaded / sigma;
    const CVec rho = gn * expansion.v;
    const CVec g_eta = gn * t.eta;
    const double beta = 2.0 * ctx.config->bandwidth_hz / (ctx.rate_unit_bps * u_tilde);
    const double q_tilde = expansion.q_ris(k);

    TaylorRow row;
    const double root_ln2 = std::sqrt(std::numbers::ln2);
    for (int i = 0; i < layout.num_users; ++i) {
        const auto z = projection_w(rho, i, layout);
        row.squares.push_back(root_ln2 * z.re);
        row.squares.push_back(root_ln2 * z.im);
    }

    // T = beta ||eta|| - beta ||eta|| / u~ (u - u~) + beta / ||eta|| Re{eta^H d eta}
    AffineExpr taylor(beta * t.norm);
    taylor.add(u, -beta * t.norm);
    taylor.constant += beta * t.norm;
    const double lin = beta / t.norm;
    const double dq = -t.eta.dot(t.interference_b).real();
    taylor.add(layout.slack.q_ris + k, lin * dq * layout.slack.sinr_scale(true, k));
    taylor.constant -= lin * dq * q_tilde;
    for (int i = 0; i < layout.num_users; ++i) {
        const double sign = i == k ? 1.0 : -q_tilde;
        // d b_i = (rho^H dw_i) h_i + conj(a_i) Gn^H dw_i
        const cdouble c1 = t.eta.dot(t.h.col(i));
        const cdouble c2 = std::conj(t.a_bar(i));
        ComplexAffine z;
        for (int j = 0; j < layout.stacked_dim; ++j) {
            const cdouble coeff = c1 * std::conj(rho(j)) + c2 * std::conj(g_eta(j));
            z.add(layout.w_re(j, i), coeff);
            z.add_constant(-coeff * expansion.w(j, i));
        }
        AffineExpr re = z.re;
        re *= lin * sign;
        taylor += re;
    }
    row.affine = AffineExpr(std::numbers::ln2) - taylor;
    row.affine.compress();
    return row;
}

TaylorRow sinr_restriction_v(const IterateState& expansion, const ChannelState& channels, int k, Link link,
                             const PhaseLayout& layout, double noise_power) {
    const double q_tilde = link == Link::Effective ? expansion.q(k) : expansion.q_ris(k);
    if (!(q_tilde > 0.0)) throw DomainError("sinr_restriction_v: expansion slack must be positive");
    const double sigma = std::sqrt(noise_power);
    const CMat gn = channels.cascaded[static_cast<std::size_t>(k)] / sigma;
    const CVec hn = channels.direct.col(k) / sigma;

    // y_i = w~_i^H h_k / sigma + Z_{k,i}
    auto y_form = [&](int i) {
        ComplexAffine y;
        y.add(layout.z_re(k, i), 1.0);
        if (link == Link::Effective) y.add_constant(expansion.w.col(i).dot(hn));
        return y;
    };
    TaylorRow row;
    for (int i = 0; i < layout.num_users; ++i) {
        if (i == k) continue;
        const auto y = y_form(i);
        row.squares.push_back(y.re);
        row.squares.push_back(y.im);
    }
    cdouble y_tilde = expansion.w.col(k).dot(gn * expansion.v);
    if (link == Link::Effective) y_tilde += expansion.w.col(k).dot(hn);
    const int q = (link == Link::Effective ? layout.slack.q : layout.slack.q_ris) + k;
    row.affine = AffineExpr(1.0);
    row.affine.add(q, std::norm(y_tilde) / (q_tilde * q_tilde) * layout.slack.sinr_scale(link == Link::RisOnly, k));
    row.affine += (-2.0 / q_tilde) * y_form(k).real_of_product(std::conj(y_tilde));
    row.affine.compress();
    return row;
}

TaylorRow gradient_norm_restriction_v(const IterateState& expansion, const CMat& cascaded, int k,
                                      const PhaseLayout& layout, const ProblemContext& ctx) {
    const auto t = eta_terms(expansion, cascaded, k, ctx.config->noise_power_w);
    if (t.norm < kDegenerateEta) throw DegenerateGradientError("gradient row: eta vanishes");
    const int u = layout.slack.u.at(static_cast<std::size_t>(k));
    if (u < 0) throw DomainError("gradient row: user has no gradient slack");
    const double u_tilde = expansion.u(k) / ctx.rate_unit_bps;
    if (!(u_tilde > 0.0)) throw DomainError("gradient row: expansion slack must be positive");
    const double beta = 2.0 * ctx.config->bandwidth_hz / (ctx.rate_unit_bps * u_tilde);
    const double q_tilde = expansion.q_ris(k);

    TaylorRow row;
    const double root_ln2 = std::sqrt(std::numbers::ln2);
    for (int i = 0; i < layout.num_users; ++i) {
        ComplexAffine z;
        z.add(layout.z_re(k, i), 1.0);
        row.squares.push_back(root_ln2 * z.re);
        row.squares.push_back(root_ln2 * z.im);
    }

    AffineExpr taylor(beta * t.norm);
    taylor.add(u, -beta * t.norm);
    taylor.constant += beta * t.norm;
    const double lin = beta / t.norm;
    const double dq = -t.eta.dot(t.interference_b).real();
    taylor.add(layout.slack.q_ris + k, lin * dq * layout.slack.sinr_scale(true, k));
    taylor.constant -= lin * dq * q_tilde;
    for (int i = 0; i < layout.num_users; ++i) {
        // b_i = Z_{k,i} h_i with h_i fixed, so Re{eta^H d b_i} = Re{(eta^H h_i) dZ_{k,i}}.
        const double sign = i == k ? 1.0 : -q_tilde;
        const cdouble c = t.eta.dot(t.h.col(i));
        ComplexAffine z;
        z.add(layout.z_re(k, i), c);
        z.add_constant(-c * std::conj(t.a_bar(i)));
        AffineExpr re = z.re;
        re *= lin * sign;
        taylor += re;
    }
    row.affine = AffineExpr(std::numbers::ln2) - taylor;
    row.affine.compress();
    return row;
}

PenaltyTerms modulus_penalty(const CVec& expansion_v, double alpha_v, const PhaseLayout& layout) {
    PenaltyTerms out;
    for (int m = 0; m < layout.num_elements; ++m) {
        const cdouble vt = expansion_v(m);
        if (alpha_v != 0.0) {
            out.objective.add(layout.v_re(m), -2.0 * alpha_v * vt.real());
            out.objective.add(layout.v_re(m) + 1, -2.0 * alpha_v * vt.imag());
            out.objective.constant += alpha_v * std::norm(vt);
        }
        ConeBlock b;
        b.kind = ConeKind::SecondOrder;
        b.name = indexed("modulus", m);
        AffineExpr re, im;
        re.add(layout.v_re(m), 1.0);
        im.add(layout.v_re(m) + 1, 1.0);
        b.rows = {AffineExpr(1.0), re, im};
        out.modulus_rows.push_back(std::move(b));
    }
    return out;
}

AssembledProblem assemble_beamforming_problem(const IterateState& state, const ProblemContext& ctx) {
    const ChannelState& ch = *ctx.channels;
    const SystemConfig& cfg = *ctx.config;
    const int users = ch.num_users();
    const int dim = ch.stacked_dim();
    if (state.w.rows() != dim || state.w.cols() != users || state.v.size() != ch.num_elements())
        throw DimensionError("assemble_beamforming_problem: iterate does not match channels");

    AssembledProblem out;
    out.stage = Stage::Beamforming;
    auto& p = out.program;
    auto& l = out.beamforming;
    l.stacked_dim = dim;
    l.num_users = users;
    l.w_offset = 0;
    for (int k = 0; k < users; ++k)
        for (int j = 0; j < dim; ++j) {
            p.add_variable(indexed("w_re", j, k));
            p.add_variable(indexed("w_im", j, k));
        }
    const auto with_u = gradient_users(state, ch, ctx, out.dropped_gradient_rows);
    l.slack = add_slacks(p, state, ctx, with_u);
    const RVec x0 = pack_expansion(out, state, ctx);

    // Per-AP power: ||w_n|| <= sqrt(P), scaled by 1 / sqrt(P).
    const double inv_root_p = 1.0 / std::sqrt(cfg.max_tx_power_w);
    for (int n = 0; n < ch.num_aps; ++n) {
        auto& b = p.add_block(ConeKind::SecondOrder, indexed("power", n));
        b.rows.emplace_back(1.0);
        for (int k = 0; k < users; ++k)
            for (int a = 0; a < ch.antennas_per_ap; ++a) {
                const int j = n * ch.antennas_per_ap + a;
                AffineExpr re, im;
                re.add(l.w_re(j, k), inv_root_p);
                im.add(l.w_re(j, k) + 1, inv_root_p);
                b.rows.push_back(re);
                b.rows.push_back(im);
            }
    }
    for (int k = 0; k < users; ++k) {
        const CVec h_eff = effective_channel(ch.direct.col(k), ch.cascaded[static_cast<std::size_t>(k)], state.v);
        const CVec h_ris = ch.cascaded[static_cast<std::size_t>(k)] * state.v;
        const auto eff = sinr_restriction_w(state, h_eff, k, Link::Effective, l, cfg.noise_power_w);
        p.blocks.push_back(eff.to_block(indexed("sinr", k), taylor_tau(eff, x0)));
        const auto ris = sinr_restriction_w(state, h_ris, k, Link::RisOnly, l, cfg.noise_power_w);
        p.blocks.push_back(ris.to_block(indexed("sinr_ris", k), taylor_tau(ris, x0)));
        if (with_u[static_cast<std::size_t>(k)]) {
            const auto g = gradient_norm_restriction_w(state, ch.cascaded[static_cast<std::size_t>(k)], k, l, ctx);
            p.blocks.push_back(g.to_block(indexed("gradient", k), taylor_tau(g, x0)));
        }
    }
    p.initial_point = x0;
    return out;
}

AssembledProblem assemble_phase_problem(const IterateState& state, const ProblemContext& ctx) {
    const ChannelState& ch = *ctx.channels;
    const SystemConfig& cfg = *ctx.config;
    const int users = ch.num_users();
    const int elements = ch.num_elements();
    if (state.w.rows() != ch.stacked_dim() || state.w.cols() != users || state.v.size() != elements)
        throw DimensionError("assemble_phase_problem: iterate does not match channels");

    AssembledProblem out;
    out.stage = Stage::Phase;
    auto& p = out.program;
    auto& l = out.phase;
    l.num_elements = elements;
    l.num_users = users;
    l.v_offset = 0;
    for (int m = 0; m < elements; ++m) {
        p.add_variable(indexed("v_re", m));
        p.add_variable(indexed("v_im", m));
    }
    l.z_offset = p.num_vars;
    for (int k = 0; k < users; ++k)
        for (int i = 0; i < users; ++i) {
            p.add_variable(indexed("z_re", k, i));
            p.add_variable(indexed("z_im", k, i));
        }
    const auto with_u = gradient_users(state, ch, ctx, out.dropped_gradient_rows);
    l.slack = add_slacks(p, state, ctx, with_u);
    const RVec x0 = pack_expansion(out, state, ctx);

    // Z_{k,i} = w~_i^H Gn_k v
    const double sigma = std::sqrt(cfg.noise_power_w);
    for (int k = 0; k < users; ++k) {
        const CMat gn = ch.cascaded[static_cast<std::size_t>(k)] / sigma;
        for (int i = 0; i < users; ++i) {
            const CVec row = gn.adjoint() * state.w.col(i);  // conj of w_i^H Gn
            ComplexAffine z;
            z.add(l.z_re(k, i), 1.0);
            for (int m = 0; m < elements; ++m) z.add(l.v_re(m), -std::conj(row(m)));
            auto& b = p.add_block(ConeKind::Zero, indexed("lift", k, i));
            z.re.compress();
            z.im.compress();
            b.rows = {z.re, z.im};
        }
    }
    for (int k = 0; k < users; ++k) {
        const auto eff = sinr_restriction_v(state, ch, k, Link::Effective, l, cfg.noise_power_w);
        p.blocks.push_back(eff.to_block(indexed("sinr", k), taylor_tau(eff, x0)));
        const auto ris = sinr_restriction_v(state, ch, k, Link::RisOnly, l, cfg.noise_power_w);
        p.blocks.push_back(ris.to_block(indexed("sinr_ris", k), taylor_tau(ris, x0)));
        if (with_u[static_cast<std::size_t>(k)]) {
            const auto g = gradient_norm_restriction_v(state, ch.cascaded[static_cast<std::size_t>(k)], k, l, ctx);
            p.blocks.push_back(g.to_block(indexed("gradient", k), taylor_tau(g, x0)));
        }
    }
    auto penalty = modulus_penalty(state.v, ctx.weights.alpha_v, l);
    p.add_objective(penalty.objective);
    for (auto& b : penalty.modulus_rows) p.blocks.push_back(std::move(b));
    p.initial_point = x0;
    return out;
}

RVec pack_expansion(const AssembledProblem& problem, const IterateState& state, const ProblemContext& ctx) {
    const auto& p = problem.program;
    RVec x = RVec::Zero(p.num_vars);
    const SlackLayout* slack = nullptr;
    if (problem.stage == Stage::Beamforming) {
        const auto& l = problem.beamforming;
        for (int k = 0; k < l.num_users; ++k)
            for (int j = 0; j < l.stacked_dim; ++j) {
                x(l.w_re(j, k)) = state.w(j, k).real();
                x(l.w_re(j, k) + 1) = state.w(j, k).imag();
            }
        slack = &l.slack;
    } else {
        const auto& l = problem.phase;
        for (int m = 0; m < l.num_elements; ++m) {
            x(l.v_re(m)) = state.v(m).real();
            x(l.v_re(m) + 1) = state.v(m).imag();
        }
        const double sigma = std::sqrt(ctx.config->noise_power_w);
        for (int k = 0; k < l.num_users; ++k) {
            const CVec gv = ctx.channels->cascaded[static_cast<std::size_t>(k)] * state.v / sigma;
            for (int i = 0; i < l.num_users; ++i) {
                const cdouble z = state.w.col(i).dot(gv);
                x(l.z_re(k, i)) = z.real();
                x(l.z_re(k, i) + 1) = z.imag();
            }
        }
        slack = &problem.phase.slack;
    }
    const double unit = ctx.rate_unit_bps;
    const auto users = static_cast<int>(state.rate.size());
    for (int k = 0; k < users; ++k) {
        x(slack->rate + k) = state.rate(k) / unit;
        x(slack->rate_ris + k) = state.rate_ris(k) / unit;
        x(slack->q + k) = state.q(k) / slack->sinr_scale(false, k);
        x(slack->q_ris + k) = state.q_ris(k) / slack->sinr_scale(true, k);
        const auto ku = static_cast<std::size_t>(k);
        if (slack->u[ku] >= 0) x(slack->u[ku]) = state.u(k) / slack->u_scale[ku];
        const double des = ctx.config->demand(k);
        // Epigraph variables start strictly above their bounds.
        x(slack->gap_aux[ku]) = std::abs(state.rate(k) / des - 1.0) + 1e-6;
        if (slack->redundancy_aux[ku] >= 0) {
            const double g = (state.rate(k) - state.rate_ris(k)) / des;
            x(slack->redundancy_aux[ku]) = g * g + 1e-6;
        }
    }
    return x;
}

IterateState unpack_solution(const AssembledProblem& problem, const RVec& x, const IterateState& expansion,
                             const ProblemContext& ctx) {
    if (x.size() != problem.program.num_vars) throw DimensionError("unpack_solution: wrong vector size");
    IterateState s = expansion;
    s.stage = problem.stage;
    const SlackLayout* slack = nullptr;
    if (problem.stage == Stage::Beamforming) {
        const auto& l = problem.beamforming;
        for (int k = 0; k < l.num_users; ++k)
            for (int j = 0; j < l.stacked_dim; ++j) s.w(j, k) = {x(l.w_re(j, k)), x(l.w_re(j, k) + 1)};
        slack = &l.slack;
    } else {
        const auto& l = problem.phase;
        for (int m = 0; m < l.num_elements; ++m) s.v(m) = {x(l.v_re(m)), x(l.v_re(m) + 1)};
        slack = &l.slack;
    }
    const double unit = ctx.rate_unit_bps;
    for (Eigen::Index k = 0; k < s.rate.size(); ++k) {
        const int kk = static_cast<int>(k);
        s.rate(k) = std::max(0.0, x(slack->rate + kk) * unit);
        s.rate_ris(k) = std::max(0.0, x(slack->rate_ris + kk) * unit);
        s.q(k) = std::max(0.0, x(slack->q + kk) * slack->sinr_scale(false, kk));
        s.q_ris(k) = std::max(0.0, x(slack->q_ris + kk) * slack->sinr_scale(true, kk));
        const int u = slack->u[static_cast<std::size_t>(k)];
        if (u >= 0) s.u(k) = std::max(0.0, x(u) * slack->u_scale[static_cast<std::size_t>(k)]);
    }
    return s;
}

double gradient_norm_bound(const IterateState& state, const CMat& cascaded, int k, double noise_power,
                           double bandwidth_hz) {
    const auto t = eta_terms(state, cascaded, k, noise_power);
    if (t.norm < kDegenerateEta) return 0.0;
    return 2.0 * bandwidth_hz * t.norm / (std::numbers::ln2 * (t.a_bar.squaredNorm() + 1.0));
}

}  // namespace risres
