#include "risres/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace risres::conic {

const char* status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::NearOptimal: return "near-optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::IterationLimit: return "iteration-limit";
    }
    return "?";
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Central point of the exponential cone; interior direction for phase I.
const Eigen::Vector3d kExpCentral(-1.051383945322714, 0.556409619469370, 1.258967884768947);

/// One cone block restricted to the variables it touches.
struct Block {
    ConeKind kind = ConeKind::Nonnegative;
    std::vector<int> cols;
    RMat a;  // dim x cols
    RVec b;
    RVec e;  // phase-I direction (interior point of the cone)

    [[nodiscard]] int dim() const { return static_cast<int>(b.size()); }
    [[nodiscard]] int degree() const {
        switch (kind) {
            case ConeKind::Nonnegative: return 1;
            case ConeKind::SecondOrder: return 2;
            case ConeKind::Exponential: return 3;
            default: return 0;
        }
    }
};

bool interior(ConeKind kind, const RVec& s) {
    switch (kind) {
        case ConeKind::Nonnegative: return s(0) > 0.0;
        case ConeKind::SecondOrder: {
            if (!(s(0) > 0.0)) return false;
            return s(0) * s(0) - s.tail(s.size() - 1).squaredNorm() > 0.0 &&
                   s(0) > s.tail(s.size() - 1).norm();
        }
        case ConeKind::Exponential: {
            const double x = s(0), y = s(1), z = s(2);
            if (!(y > 0.0) || !(z > 0.0)) return false;
            return y * std::log(z / y) - x > 0.0;
        }
        default: return false;
    }
}

void barrier_derivatives(ConeKind kind, const RVec& s, RVec& g, RMat& h) {
    const auto d = s.size();
    g.resize(d);
    h.resize(d, d);
    switch (kind) {
        case ConeKind::Nonnegative:
            g(0) = -1.0 / s(0);
            h(0, 0) = 1.0 / (s(0) * s(0));
            break;
        case ConeKind::SecondOrder: {
            RVec js = -s;
            js(0) = s(0);
            const double disc = s(0) * s(0) - s.tail(d - 1).squaredNorm();
            g = -2.0 * js / disc;
            h = (4.0 / (disc * disc)) * js * js.transpose();
            h.diagonal().array() += 2.0 / disc;
            h(0, 0) -= 4.0 / disc;
            break;
        }
        case ConeKind::Exponential: {
            const double x = s(0), y = s(1), z = s(2);
            const double lz = std::log(z / y);
            const double psi = y * lz - x;
            const Eigen::Vector3d dpsi(-1.0, lz - 1.0, y / z);
            Eigen::Matrix3d d2psi = Eigen::Matrix3d::Zero();
            d2psi(1, 1) = -1.0 / y;
            d2psi(1, 2) = d2psi(2, 1) = 1.0 / z;
            d2psi(2, 2) = -y / (z * z);
            g = -dpsi / psi;
            g(1) -= 1.0 / y;
            g(2) -= 1.0 / z;
            h = dpsi * dpsi.transpose() / (psi * psi) - d2psi / psi;
            h(1, 1) += 1.0 / (y * y);
            h(2, 2) += 1.0 / (z * z);
            break;
        }
        default: break;
    }
}

/// Internal standard form: min c^T x, E x = f, A_i x + b_i in K_i.
struct Problem {
    int n = 0;
    RVec c;
    std::vector<Block> blocks;
    SpMat eq;  // m x n
    RVec eq_rhs;
    int nu = 0;
};

Problem to_standard_form(const ConicProgram& p) {
    Problem prob;
    prob.n = p.num_vars;
    prob.c = p.objective;
    std::vector<Eigen::Triplet<double>> eq_trips;
    std::vector<double> eq_rhs;

    auto make_block = [&](ConeKind kind, const std::vector<const AffineExpr*>& rows) {
        Block b;
        b.kind = kind;
        std::map<int, int> local;
        for (const auto* r : rows)
            for (const auto& [i, c] : r->terms) local.emplace(i, 0);
        int idx = 0;
        for (auto& [var, pos] : local) {
            pos = idx++;
            b.cols.push_back(var);
        }
        b.a = RMat::Zero(static_cast<Eigen::Index>(rows.size()), idx);
        b.b.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (const auto& [i, c] : rows[r]->terms) b.a(static_cast<Eigen::Index>(r), local[i]) += c;
            b.b(static_cast<Eigen::Index>(r)) = rows[r]->constant;
        }
        b.e = RVec::Zero(b.dim());
        if (kind == ConeKind::Exponential)
            b.e = kExpCentral;
        else
            b.e(0) = 1.0;
        prob.nu += b.degree();
        prob.blocks.push_back(std::move(b));
    };

    for (const auto& blk : p.blocks) {
        switch (blk.kind) {
            case ConeKind::Zero:
                for (const auto& r : blk.rows) {
                    const auto row = static_cast<int>(eq_rhs.size());
                    for (const auto& [i, c] : r.terms) eq_trips.emplace_back(row, i, c);
                    eq_rhs.push_back(-r.constant);
                }
                break;
            case ConeKind::Nonnegative:
                for (const auto& r : blk.rows) make_block(ConeKind::Nonnegative, {&r});
                break;
            default: {
                std::vector<const AffineExpr*> rows;
                for (const auto& r : blk.rows) rows.push_back(&r);
                make_block(blk.kind, rows);
            }
        }
    }
    for (int i = 0; i < p.num_vars; ++i) {
        if (std::isfinite(p.lower(i))) {
            AffineExpr r(-p.lower(i));
            r.add(i, 1.0);
            make_block(ConeKind::Nonnegative, {&r});
        }
        if (std::isfinite(p.upper(i))) {
            AffineExpr r(p.upper(i));
            r.add(i, -1.0);
            make_block(ConeKind::Nonnegative, {&r});
        }
    }
    prob.eq.resize(static_cast<Eigen::Index>(eq_rhs.size()), p.num_vars);
    prob.eq.setFromTriplets(eq_trips.begin(), eq_trips.end());
    prob.eq_rhs = Eigen::Map<const RVec>(eq_rhs.data(), static_cast<Eigen::Index>(eq_rhs.size()));
    return prob;
}

RVec block_slack(const Block& b, const RVec& x) {
    RVec xl(static_cast<Eigen::Index>(b.cols.size()));
    for (std::size_t j = 0; j < b.cols.size(); ++j) xl(static_cast<Eigen::Index>(j)) = x(b.cols[j]);
    return b.a * xl + b.b;
}

RVec block_dir(const Block& b, const RVec& dx) {
    RVec dl(static_cast<Eigen::Index>(b.cols.size()));
    for (std::size_t j = 0; j < b.cols.size(); ++j) dl(static_cast<Eigen::Index>(j)) = dx(b.cols[j]);
    return b.a * dl;
}

/// Sparse quasi-definite KKT system [H + dp I, E^T; E, -dd I] with a fixed pattern.
class KktSystem {
public:
    explicit KktSystem(const Problem& prob) : prob_(prob) {
        const int n = prob.n;
        const auto m = static_cast<int>(prob.eq.rows());
        dim_ = n + m;
        std::vector<Eigen::Triplet<double>> trips;
        for (int i = 0; i < dim_; ++i) trips.emplace_back(i, i, 0.0);
        for (const auto& b : prob.blocks)
            for (std::size_t p = 0; p < b.cols.size(); ++p)
                for (std::size_t q = 0; q <= p; ++q) {
                    const int r = std::max(b.cols[p], b.cols[q]);
                    const int c = std::min(b.cols[p], b.cols[q]);
                    trips.emplace_back(r, c, 0.0);
                }
        for (int k = 0; k < prob.eq.outerSize(); ++k)
            for (SpMat::InnerIterator it(prob.eq, k); it; ++it)
                trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), 0.0);
        kkt_.resize(dim_, dim_);
        kkt_.setFromTriplets(trips.begin(), trips.end());
        kkt_.makeCompressed();

        diag_pos_.resize(static_cast<std::size_t>(dim_));
        for (int i = 0; i < dim_; ++i) diag_pos_[static_cast<std::size_t>(i)] = position(i, i);
        for (const auto& b : prob.blocks) {
            std::vector<int> pos;
            for (std::size_t p = 0; p < b.cols.size(); ++p)
                for (std::size_t q = 0; q <= p; ++q)
                    pos.push_back(position(std::max(b.cols[p], b.cols[q]), std::min(b.cols[p], b.cols[q])));
            block_pos_.push_back(std::move(pos));
        }
        base_ = RVec::Zero(kkt_.nonZeros());
        for (int k = 0; k < prob.eq.outerSize(); ++k)
            for (SpMat::InnerIterator it(prob.eq, k); it; ++it)
                base_(position(n + static_cast<int>(it.row()), static_cast<int>(it.col()))) += it.value();
        // Primal variables in AMD order, equality rows last: eliminating a row of
        // the -dd I block early divides by dd and destroys the factorization.
        SpMat hess_pattern = kkt_.topLeftCorner(n, n);
        SpMat hess_full = hess_pattern.selfadjointView<Eigen::Lower>();
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> amd;
        Eigen::AMDOrdering<int>()(hess_full, amd);
        perm_.resize(dim_);
        for (int i = 0; i < n; ++i) perm_.indices()(i) = amd.indices()(i);
        for (int i = n; i < dim_; ++i) perm_.indices()(i) = i;
        permuted_.resize(dim_, dim_);
        permuted_.selfadjointView<Eigen::Lower>() = kkt_.selfadjointView<Eigen::Lower>().twistedBy(perm_);
        ldlt_.analyzePattern(permuted_);
    }

    /// Assembles H from per-block local Hessians (already multiplied through A) and factorizes.
    bool factorize(const std::vector<RMat>& local_hessians, double extra_diag = 0.0) {
        Eigen::Map<RVec> values(kkt_.valuePtr(), kkt_.nonZeros());
        values = base_;
        double max_diag = 1.0;
        for (std::size_t bi = 0; bi < prob_.blocks.size(); ++bi) {
            const auto& h = local_hessians[bi];
            const auto& pos = block_pos_[bi];
            std::size_t t = 0;
            for (Eigen::Index p = 0; p < h.rows(); ++p)
                for (Eigen::Index q = 0; q <= p; ++q) values(pos[t++]) += h(p, q);
        }
        for (int i = 0; i < prob_.n; ++i) max_diag = std::max(max_diag, values(diag_pos_[static_cast<std::size_t>(i)]));
        // Primal shifts are relative to each diagonal entry: thin cone rows put 1e18
        // on a few diagonals, and a global shift of that size would swamp the rest.
        reg_primal_.resize(prob_.n);
        for (int i = 0; i < prob_.n; ++i) {
            double& d = values(diag_pos_[static_cast<std::size_t>(i)]);
            reg_primal_(i) = 1e-13 * (std::abs(d) + 1.0) + extra_diag;
            d += reg_primal_(i);
        }
        // The equality block is eliminated last, so its Schur complement is about
        // E H^-1 E^T ~ 1 / max_diag; the dual shift only has to be small against that.
        reg_dual_ = 1e-10 / max_diag;
        for (int i = prob_.n; i < dim_; ++i) values(diag_pos_[static_cast<std::size_t>(i)]) -= reg_dual_;
        permuted_.selfadjointView<Eigen::Lower>() = kkt_.selfadjointView<Eigen::Lower>().twistedBy(perm_);
        ldlt_.factorize(permuted_);
        return ldlt_.info() == Eigen::Success;
    }

    /// Solves the unregularized system with two steps of iterative refinement.
    RVec solve(const RVec& rhs) const {
        RVec sol = raw_solve(rhs);
        const double target = 1e-14 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
        for (int it = 0; it < 6; ++it) {
            RVec r = rhs - apply(sol);
            if (!r.allFinite() || r.lpNorm<Eigen::Infinity>() <= target) break;
            sol += raw_solve(r);
        }
        return sol;
    }

private:
    int position(int r, int c) const {
        const int start = kkt_.outerIndexPtr()[c];
        const int end = kkt_.outerIndexPtr()[c + 1];
        const int* first = kkt_.innerIndexPtr() + start;
        const int* it = std::lower_bound(first, kkt_.innerIndexPtr() + end, r);
        return static_cast<int>(it - kkt_.innerIndexPtr());
    }

    RVec raw_solve(const RVec& rhs) const {
        const RVec y = ldlt_.solve(perm_ * rhs);
        return perm_.transpose() * y;
    }

    RVec apply(const RVec& v) const {
        RVec out = kkt_.selfadjointView<Eigen::Lower>() * v;
        out.head(prob_.n) -= reg_primal_.cwiseProduct(v.head(prob_.n));
        out.tail(dim_ - prob_.n) += reg_dual_ * v.tail(dim_ - prob_.n);
        return out;
    }

    const Problem& prob_;
    int dim_ = 0;
    SpMat kkt_;
    RVec base_;
    std::vector<int> diag_pos_;
    std::vector<std::vector<int>> block_pos_;
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm_;
    SpMat permuted_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt_;
    RVec reg_primal_;
    double reg_dual_ = 0.0;
};

struct CenterResult {
    bool ok = true;
    bool diverged = false;
    bool centered = false;
    RVec dual_eq;
    double decrement = 0.0;
};

// Phase I pushes the starting point at least this far inside every cone.
constexpr double kStartDepth = 1e-4;

/// Barrier method on a standard-form problem starting from a strictly feasible x.
class BarrierMethod {
public:
    BarrierMethod(const Problem& prob, int& newton_budget) : prob_(prob), kkt_(prob), budget_(newton_budget) {
        grads_.resize(prob.blocks.size());
        hess_.resize(prob.blocks.size());
        local_.resize(prob.blocks.size());
    }

    [[nodiscard]] bool all_interior(const RVec& x) const {
        for (const auto& b : prob_.blocks)
            if (!interior(b.kind, block_slack(b, x))) return false;
        return true;
    }

    /// Builds gradient and KKT for (t c^T x + barrier) at x and factorizes.
    bool linearize(const RVec& x, double t, RVec& grad) {
        grad = t * prob_.c;
        for (std::size_t bi = 0; bi < prob_.blocks.size(); ++bi) {
            const auto& b = prob_.blocks[bi];
            const RVec s = block_slack(b, x);
            barrier_derivatives(b.kind, s, grads_[bi], hess_[bi]);
            const RVec gl = b.a.transpose() * grads_[bi];
            for (std::size_t j = 0; j < b.cols.size(); ++j) grad(b.cols[j]) += gl(static_cast<Eigen::Index>(j));
            local_[bi].noalias() = b.a.transpose() * (hess_[bi] * b.a);
        }
        return kkt_.factorize(local_);
    }

    RVec newton_direction(const RVec& x, const RVec& grad, RVec& dual_eq) const {
        const auto m = prob_.eq.rows();
        RVec rhs(prob_.n + m);
        rhs.head(prob_.n) = -grad;
        if (m > 0) rhs.tail(m) = prob_.eq_rhs - prob_.eq * x;
        const RVec sol = kkt_.solve(rhs);
        dual_eq = sol.tail(m);
        return sol.head(prob_.n);
    }

    /// potential(x + alpha dx) - potential(x), evaluated without forming either value.
    double potential_change(const RVec& x, const RVec& dx, double alpha, double t) const {
        double v = t * alpha * prob_.c.dot(dx);
        for (const auto& b : prob_.blocks) {
            const RVec s = block_slack(b, x);
            const RVec ds = alpha * block_dir(b, dx);
            switch (b.kind) {
                case ConeKind::Nonnegative: v -= std::log1p(ds(0) / s(0)); break;
                case ConeKind::SecondOrder: {
                    const double d0 = s(0) * s(0) - s.tail(s.size() - 1).squaredNorm();
                    // D(s + ds) - D(s) expanded to avoid cancelling two large numbers.
                    const double dd = 2.0 * (s(0) * ds(0) - s.tail(s.size() - 1).dot(ds.tail(s.size() - 1))) +
                                      ds(0) * ds(0) - ds.tail(s.size() - 1).squaredNorm();
                    v -= std::log1p(dd / d0);
                    break;
                }
                case ConeKind::Exponential: {
                    const RVec sn = s + ds;
                    const double psi0 = s(1) * std::log(s(2) / s(1)) - s(0);
                    const double psi1 = sn(1) * std::log(sn(2) / sn(1)) - sn(0);
                    v -= std::log(psi1 / psi0) + std::log1p(ds(1) / s(1)) + std::log1p(ds(2) / s(2));
                    break;
                }
                default: break;
            }
        }
        return v;
    }

    double max_step(const RVec& x, const RVec& dx) const {
        double alpha = 1.0;
        for (const auto& b : prob_.blocks) {
            if (b.kind != ConeKind::Nonnegative) continue;
            const double s = block_slack(b, x)(0);
            const double ds = block_dir(b, dx)(0);
            if (ds < 0.0) alpha = std::min(alpha, -0.99 * s / ds);
        }
        for (int halvings = 0; halvings < 60; ++halvings) {
            if (all_interior(x + alpha * dx)) return alpha;
            alpha *= 0.5;
        }
        return 0.0;
    }

    /// Damped Newton centering at fixed t. `stop` lets phase I exit early.
    template <typename Stop>
    CenterResult center(RVec& x, double t, double tol, Stop&& stop, int max_steps = 1 << 30) {
        CenterResult res;
        RVec grad;
        for (int k = 0;; ++k) {
            if (budget_ <= 0) {
                res.ok = false;
                return res;
            }
            --budget_;
            if (!linearize(x, t, grad)) {
                res.ok = false;
                return res;
            }
            RVec dual_eq;
            const RVec dx = newton_direction(x, grad, dual_eq);
            if (!dx.allFinite()) {
                res.ok = false;
                return res;
            }
            const double slope = grad.dot(dx);
            res.decrement = std::max(0.0, -slope);
            res.dual_eq = dual_eq;
            if (res.decrement / 2.0 <= tol) {
                res.centered = true;
                return res;
            }
            if (k >= max_steps) return res;
            double alpha = max_step(x, dx);
            if (alpha <= 0.0) {
                res.ok = false;
                return res;
            }
            int tries = 0;
            while (potential_change(x, dx, alpha, t) > 0.01 * alpha * slope && tries < 60) {
                alpha *= 0.5;
                ++tries;
            }
            if (tries == 60) {
                // Stalled: accept if the step is already tiny relative to x.
                return res;
            }
            x += alpha * dx;
            if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > 1e12) {
                res.diverged = true;
                return res;
            }
            if (stop(x)) return res;
        }
    }

    /// Initial barrier weight balancing the objective against the barrier gradient.
    double initial_t(const RVec& x) {
        RVec grad;
        if (!linearize(x, 0.0, grad)) return 1.0;
        const auto m = prob_.eq.rows();
        RVec rhs = RVec::Zero(prob_.n + m);
        rhs.head(prob_.n) = prob_.c;
        const RVec pc = kkt_.solve(rhs).head(prob_.n);
        rhs.head(prob_.n) = grad;
        const RVec pg = kkt_.solve(rhs).head(prob_.n);
        const double ccc = prob_.c.dot(pc);
        const double t = ccc > 0.0 ? -prob_.c.dot(pg) / ccc : 0.0;
        if (!std::isfinite(t) || t <= 0.0) return std::max(1e-6, prob_.nu / (1.0 + std::abs(prob_.c.dot(x))));
        return std::clamp(t, 1e-8, 1e8);
    }

private:
    const Problem& prob_;
    KktSystem kkt_;
    int& budget_;
    std::vector<RVec> grads_;
    std::vector<RMat> hess_;
    std::vector<RMat> local_;
};

/// Least-norm correction of x0 onto {E x = f}.
RVec project_equalities(const Problem& prob, const RVec& x0) {
    if (prob.eq.rows() == 0) return x0;
    const RVec resid = prob.eq * x0 - prob.eq_rhs;
    if (resid.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + prob.eq_rhs.lpNorm<Eigen::Infinity>())) return x0;
    SpMat eet = prob.eq * prob.eq.transpose();
    for (int i = 0; i < eet.rows(); ++i) eet.coeffRef(i, i) += 1e-12;
    Eigen::SimplicialLDLT<SpMat> ldlt(eet);
    if (ldlt.info() != Eigen::Success) return x0;
    return x0 - prob.eq.transpose() * ldlt.solve(resid);
}

/// True when A x + b - depth e lies in the interior of every block.
bool deep_interior(const Problem& prob, const RVec& x, double depth) {
    for (const auto& b : prob.blocks)
        if (!interior(b.kind, block_slack(b, x) - depth * b.e)) return false;
    return true;
}

/// Phase I: min sigma s.t. A x + b + sigma e in K, E x = f, sigma >= -sigma0, plus a
/// box around x0 so the auxiliary barrier problem stays bounded. Stops once
/// sigma <= -depth. Points barely inside the cone are poor starts for the barrier
/// method, since Newton only doubles a tiny slack per step. When the feasible set
/// is thinner than `depth`, the deepest point found is returned.
std::optional<RVec> find_interior(const Problem& prob, const RVec& x0, double depth, int& budget,
                                  bool& infeasible) {
    infeasible = false;
    double needed = 0.0;
    for (const auto& b : prob.blocks) {
        const RVec s = block_slack(b, x0) - depth * b.e;
        if (interior(b.kind, s)) continue;
        double lo = 0.0, hi = 1.0;
        while (!interior(b.kind, s + hi * b.e) && hi < 1e30) hi *= 2.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (interior(b.kind, s + mid * b.e) ? hi : lo) = mid;
        }
        needed = std::max(needed, hi);
    }
    double scale = 1.0;
    for (const auto& b : prob.blocks) scale = std::max(scale, block_slack(b, x0).lpNorm<Eigen::Infinity>());

    Problem aux;
    aux.n = prob.n + 1;
    const int sigma = prob.n;
    aux.c = RVec::Zero(aux.n);
    aux.c(sigma) = 1.0;
    for (const auto& b : prob.blocks) {
        Block nb = b;
        nb.cols.push_back(sigma);
        nb.a.conservativeResize(Eigen::NoChange, nb.a.cols() + 1);
        nb.a.col(nb.a.cols() - 1) = b.e;
        aux.blocks.push_back(std::move(nb));
    }
    auto add_bound = [&](int var, double coeff, double constant) {
        Block nb;
        nb.kind = ConeKind::Nonnegative;
        nb.cols = {var};
        nb.a = RMat::Constant(1, 1, coeff);
        nb.b = RVec::Constant(1, constant);
        nb.e = RVec::Ones(1);
        aux.blocks.push_back(std::move(nb));
    };
    const double sigma0 = 1.5 * needed + 1e-3 * scale + 2.0 * depth + 1e-6;
    add_bound(sigma, 1.0, sigma0);  // sigma >= -sigma0 keeps the phase-I objective bounded
    for (int i = 0; i < prob.n; ++i) {
        const double radius = 10.0 * (1.0 + std::abs(x0(i)));
        add_bound(i, 1.0, radius - x0(i));
        add_bound(i, -1.0, radius + x0(i));
    }
    for (const auto& b : aux.blocks) aux.nu += b.degree();
    aux.eq.resize(prob.eq.rows(), aux.n);
    {
        std::vector<Eigen::Triplet<double>> trips;
        for (int k = 0; k < prob.eq.outerSize(); ++k)
            for (SpMat::InnerIterator it(prob.eq, k); it; ++it)
                trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        aux.eq.setFromTriplets(trips.begin(), trips.end());
    }
    aux.eq_rhs = prob.eq_rhs;

    RVec z(aux.n);
    z.head(prob.n) = x0;
    z(sigma) = sigma0;
    BarrierMethod bm(aux, budget);
    if (!bm.all_interior(z)) return std::nullopt;
    // Large enough that the first center already has sigma within about sigma0 of optimal.
    double t = std::max(bm.initial_t(z), aux.nu / sigma0);
    auto deep = [&](const RVec& v) { return v(sigma) < -depth; };
    auto finish = [&]() -> std::optional<RVec> {
        RVec x = z.head(prob.n);
        // The slack of each block is (A x + b + sigma e) - sigma e with sigma < 0.
        if (!deep_interior(prob, x, 0.0)) return std::nullopt;
        return x;
    };
    for (int outer = 0; outer < 200; ++outer) {
        const auto res = bm.center(z, t, 1e-6, deep);
        if (deep(z)) return finish();
        if (!res.ok || res.diverged) return z(sigma) < 0.0 ? finish() : std::nullopt;
        // On the central path sigma - nu / t bounds the phase-I optimum from below.
        const double lower = z(sigma) - aux.nu / t;
        if (lower > 1e-9) {
            infeasible = true;
            return std::nullopt;
        }
        if (z(sigma) < 0.0 && lower > -depth) return finish();
        if (aux.nu / t < 1e-9 * (1.0 + std::abs(z(sigma)))) {
            infeasible = z(sigma) > 1e-9;
            return z(sigma) < 0.0 ? finish() : std::nullopt;
        }
        t *= 10.0;
    }
    return std::nullopt;
}

}  // namespace

Solution solve(const ConicProgram& program, const SolverSettings& settings) {
    Solution sol;
    if (program.lower.size() == program.num_vars && program.upper.size() == program.num_vars &&
        (program.lower.array() > program.upper.array()).any()) {
        sol.status = SolveStatus::Infeasible;
        sol.x = RVec::Zero(program.num_vars);
        return sol;
    }
    const auto diag = validate(program);
    if (!diag.valid) {
        sol.status = SolveStatus::IterationLimit;
        sol.x = RVec::Zero(program.num_vars);
        return sol;
    }
    const Problem prob = to_standard_form(program);
    sol.x = program.initial_point.size() == program.num_vars ? program.initial_point : RVec::Zero(program.num_vars);

    if (prob.n == 0) {
        sol.status = SolveStatus::Optimal;
        sol.objective = program.objective_constant;
        sol.feasible = true;
        return sol;
    }
    if (prob.blocks.empty() && prob.eq.rows() == 0) {
        sol.status = prob.c.isZero() ? SolveStatus::Optimal : SolveStatus::Unbounded;
        sol.objective = program.objective_value(sol.x);
        sol.feasible = true;
        return sol;
    }

    int budget = settings.max_newton_steps;
    RVec x = project_equalities(prob, sol.x);
    if (!deep_interior(prob, x, kStartDepth)) {
        bool infeasible = false;
        auto found = find_interior(prob, x, kStartDepth, budget, infeasible);
        if (!found && !infeasible && deep_interior(prob, x, 0.0)) found = x;
        if (!found) {
            sol.status = infeasible ? SolveStatus::Infeasible : SolveStatus::IterationLimit;
            sol.newton_steps = settings.max_newton_steps - budget;
            return sol;
        }
        x = project_equalities(prob, *found);
        if (!deep_interior(prob, x, 0.0)) x = *found;
    }

    BarrierMethod bm(prob, budget);
    double t = bm.initial_t(x);
    CenterResult last;
    RVec last_dual_eq;
    bool converged = false;
    bool diverged = false;
    auto never = [](const RVec&) { return false; };
    RVec centered_x = x;
    double centered_t = 0.0;
    for (int outer = 0; outer < 100; ++outer) {
        // Early centerings are truncated: at small t the barrier alone pushes
        // weakly priced variables far out, and a larger t stops that drift.
        last = bm.center(x, t, 1e-6, never, 40);
        if (last.diverged) {
            diverged = true;
            break;
        }
        if (!last.ok) break;
        if (last.centered) {
            centered_x = x;
            centered_t = t;
            last_dual_eq = last.dual_eq;
            const double obj = prob.c.dot(x) + program.objective_constant;
            if (prob.nu / t <= std::max(settings.abs_gap_tol, settings.rel_gap_tol * std::abs(obj))) {
                converged = true;
                break;
            }
        }
        t *= settings.barrier_growth;
    }
    sol.newton_steps = settings.max_newton_steps - budget;
    if (diverged) {
        sol.status = SolveStatus::Unbounded;
        sol.x = x;
        sol.objective = program.objective_value(x);
        return sol;
    }

    // The last iterate is strictly feasible even when the path was not followed to the end.
    sol.x = x;
    sol.objective = program.objective_value(x);
    sol.primal_residual = max_violation(program, x);
    sol.feasible = sol.primal_residual <= settings.feas_tol;

    // Dual point from the barrier gradient at the last centered iterate.
    sol.gap = kInf;
    sol.relative_gap = kInf;
    sol.dual_residual = kInf;
    if (centered_t > 0.0) {
        RVec aty = RVec::Zero(prob.n);
        double gap = 0.0;
        for (const auto& b : prob.blocks) {
            RVec g;
            RMat h;
            const RVec sl = block_slack(b, centered_x);
            barrier_derivatives(b.kind, sl, g, h);
            const RVec y = -g / centered_t;
            gap += sl.dot(y);
            const RVec contrib = b.a.transpose() * y;
            for (std::size_t j = 0; j < b.cols.size(); ++j) aty(b.cols[j]) += contrib(static_cast<Eigen::Index>(j));
        }
        RVec dual_res = prob.c - aty;
        if (prob.eq.rows() > 0 && last_dual_eq.size() == prob.eq.rows())
            dual_res += prob.eq.transpose() * (last_dual_eq / centered_t);
        sol.dual_residual = dual_res.lpNorm<Eigen::Infinity>() / (1.0 + prob.c.lpNorm<Eigen::Infinity>());
        // Objective and gap refer to the centered point; the final iterate is no worse.
        const double centered_obj = program.objective_value(centered_x);
        sol.gap = gap + std::max(0.0, sol.objective - centered_obj);
        sol.relative_gap = sol.gap / std::max(1.0, std::abs(sol.objective));
    }

    if (converged && sol.primal_residual <= settings.feas_tol)
        sol.status = SolveStatus::Optimal;
    else if (std::isfinite(sol.gap) && sol.relative_gap <= 1e-4 && sol.primal_residual <= 1e-5)
        sol.status = SolveStatus::NearOptimal;
    else
        sol.status = SolveStatus::IterationLimit;
    return sol;
}

}  // namespace risres::conic
