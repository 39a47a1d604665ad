#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "risres/channel.hpp"
#include "risres/config.hpp"
#include "risres/conic.hpp"
#include "risres/metrics.hpp"
#include "risres/types.hpp"

namespace risres {

enum class Stage { Beamforming, Phase };

inline char stage_tag(Stage s) { return s == Stage::Beamforming ? 'w' : 'v'; }

/// Expansion point of the alternating SCA. Rates and u are in bit/s; q, q_ris are
/// linear SINR slacks.
struct IterateState {
    CMat w;
    CVec v;
    RVec rate;
    RVec rate_ris;
    RVec q;
    RVec q_ris;
    RVec u;
    Stage stage = Stage::Beamforming;
};

enum class Link { Effective, RisOnly };

/// Raised when the RIS-rate gradient vanishes at the expansion point.
class DegenerateGradientError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Indices of the slack variables shared by both subproblems. Entries of `u` and
/// `redundancy_aux` are -1 for users whose term is switched off.
struct SlackLayout {
    int rate = -1;
    int rate_ris = -1;
    int q = -1;
    int q_ris = -1;
    std::vector<int> u;
    std::vector<double> u_scale;  // bit/s per program unit of u: u = u_scale x(u), x(u) = 1 at the expansion
    // q = q_scale x(q). Below 1 the scale follows the expansion value so that a nearly
    // silent link does not put a 1/q~ coefficient into its SINR row.
    std::vector<double> q_scale;
    std::vector<double> q_ris_scale;

    [[nodiscard]] double sinr_scale(bool ris, int k) const {
        return (ris ? q_ris_scale : q_scale).at(static_cast<std::size_t>(k));
    }
    std::vector<int> gap_aux;
    std::vector<int> redundancy_aux;
};

/// Beamforming stage: w_{j,k} (stacked antenna j of user k) at w_offset + 2 (k NL + j), re then im.
struct BeamformingLayout {
    int stacked_dim = 0;
    int num_users = 0;
    int w_offset = 0;
    SlackLayout slack;

    [[nodiscard]] int w_re(int j, int k) const { return w_offset + 2 * (k * stacked_dim + j); }
};

/// Phase stage: v_m at v_offset + 2m; the lifted forms Z_{k,i} = w_i^H G_k v / sigma at
/// z_offset + 2 (k K + i).
struct PhaseLayout {
    int num_elements = 0;
    int num_users = 0;
    int v_offset = 0;
    int z_offset = 0;
    SlackLayout slack;

    [[nodiscard]] int v_re(int m) const { return v_offset + 2 * m; }
    [[nodiscard]] int z_re(int k, int i) const { return z_offset + 2 * (k * num_users + i); }
};

/// Convex row `sum_j squares_j^2 + affine <= 0`, all pieces affine in the program
/// variables. An empty `squares` list is a plain linear inequality.
struct TaylorRow {
    std::vector<conic::AffineExpr> squares;
    conic::AffineExpr affine;

    [[nodiscard]] double evaluate(const RVec& x) const;
    [[nodiscard]] conic::ConeKind cone() const {
        return squares.empty() ? conic::ConeKind::Nonnegative : conic::ConeKind::SecondOrder;
    }
    /// Rotated-cone encoding ||(2 s, L - tau)|| <= L + tau with L = -affine; tau is a
    /// positive scale chosen near the magnitude of L to limit cancellation.
    [[nodiscard]] conic::ConeBlock to_block(std::string name, double tau = 1.0) const;
};

/// Dimensionless pieces that are common to assembly and evaluation.
struct ObjectiveWeights {
    RVec alpha_gradient;
    RVec alpha_redundancy;
    double nu_const = 1e3;
    double alpha_v = 0.0;
};

/// Everything the assemblers need besides the expansion point.
struct ProblemContext {
    const ChannelState* channels = nullptr;
    const SystemConfig* config = nullptr;
    ObjectiveWeights weights;
    double rate_unit_bps = 1e6;
};

// ---- beamforming stage ----------------------------------------------------------

/// SINR restriction around (w~, q~) for user k on `channel` (effective or RIS-only),
/// normalized by the noise power.
TaylorRow sinr_restriction_w(const IterateState& expansion, const CVec& channel, int k, Link link,
                             const BeamformingLayout& layout, double noise_power);

/// ln2 (sum_i |a_{k,i}|^2 + sigma^2) - T^w_k <= 0 normalized by sigma^2, with the
/// fraction 2B ||eta_k|| / u_k linearized around (w~, q~_ris, u~).
/// Throws DegenerateGradientError when ||eta_k|| vanishes.
TaylorRow gradient_norm_restriction_w(const IterateState& expansion, const CMat& cascaded, int k,
                                      const BeamformingLayout& layout, const ProblemContext& ctx);

// ---- phase stage ----------------------------------------------------------------

TaylorRow sinr_restriction_v(const IterateState& expansion, const ChannelState& channels, int k,
                             Link link, const PhaseLayout& layout, double noise_power);

TaylorRow gradient_norm_restriction_v(const IterateState& expansion, const CMat& cascaded, int k,
                                      const PhaseLayout& layout, const ProblemContext& ctx);

struct PenaltyTerms {
    conic::AffineExpr objective;
    std::vector<conic::ConeBlock> modulus_rows;
};

/// Linearized unit-modulus reward -alpha_v sum_m Re{2 v~_m^* v_m - |v~_m|^2} plus the
/// rows |v_m| <= 1. alpha_v = 0 leaves the objective empty.
PenaltyTerms modulus_penalty(const CVec& expansion_v, double alpha_v, const PhaseLayout& layout);

// ---- assembly -------------------------------------------------------------------

struct AssembledProblem {
    conic::ConicProgram program;
    Stage stage = Stage::Beamforming;
    BeamformingLayout beamforming;
    PhaseLayout phase;
    int dropped_gradient_rows = 0;
};

AssembledProblem assemble_beamforming_problem(const IterateState& state, const ProblemContext& ctx);
AssembledProblem assemble_phase_problem(const IterateState& state, const ProblemContext& ctx);

/// Program variables of the expansion point (lifted forms included).
RVec pack_expansion(const AssembledProblem& problem, const IterateState& state,
                    const ProblemContext& ctx);

/// Reads the optimized block back, carrying the other stage's variables over.
IterateState unpack_solution(const AssembledProblem& problem, const RVec& x,
                             const IterateState& expansion, const ProblemContext& ctx);

/// Exact right side of the gradient-norm constraint, 2B ||eta_k(q_ris)|| /
/// (ln2 (sum_i |a_{k,i}|^2 + sigma^2)), in bit/s. Returns 0 for a vanishing eta.
double gradient_norm_bound(const IterateState& state, const CMat& cascaded, int k,
                           double noise_power, double bandwidth_hz);

}  // namespace risres
