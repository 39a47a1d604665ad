#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "risres/config.hpp"
#include "risres/geometry.hpp"
#include "risres/types.hpp"

namespace risres {

using BlockageMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// All channel tensors of one coherence block.
///
/// Layout: `direct` is NL x K with column k the stacked h_k = [h_{1,k}; ...; h_{N,k}];
/// `ap_ris` is the stacked NL x M matrix H; `ris_user` is M x K with column k = g_k;
/// `cascaded[k]` = H diag(g_k).
struct ChannelState {
    int num_aps = 0;
    int antennas_per_ap = 0;
    CMat direct;
    CMat direct_unblocked;
    CMat ap_ris;
    CMat ris_user;
    std::vector<CMat> cascaded;
    BlockageMask blockage_mask;

    [[nodiscard]] int num_users() const { return static_cast<int>(direct.cols()); }
    [[nodiscard]] int num_elements() const { return static_cast<int>(ap_ris.cols()); }
    [[nodiscard]] int stacked_dim() const { return static_cast<int>(direct.rows()); }

    /// Direct-link block h_{n,k}.
    [[nodiscard]] CVec direct_link(int n, int k) const;
    [[nodiscard]] bool user_fully_blocked(int k) const;
};

/// Deterministic per-(seed, stream, a, b) generator so that draws of one link do not
/// depend on the order in which other links are generated.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t a = 0,
                          std::uint64_t b = 0);

namespace stream_id {
inline constexpr std::uint64_t direct = 1;
inline constexpr std::uint64_t ris_correlated = 2;
inline constexpr std::uint64_t phase_init = 3;
}  // namespace stream_id

/// Linear large-scale gain of the log-distance model, 10^{-(ref + 10 alpha log10 d)/10}.
double pathloss_gain(double distance_m, double ref_db, double exponent);

/// Rayleigh draw scaled by log-normally shadowed pathloss; the substream is
/// derived from (config.rng_seed, n, k).
CVec sample_direct_channel(const Geometry& geometry, const SystemConfig& config, int n, int k);

struct LosChannels {
    std::vector<CMat> ap_ris;  // H_n, L x M
    CMat ris_user;             // M x K
};

/// Deterministic line-of-sight AP-RIS and RIS-user channels.
LosChannels build_los_channels(const Geometry& geometry, const SystemConfig& config);

/// G_k = H diag(g_k).
CMat cascade(const CMat& stacked_ap_ris, const CVec& ris_user);

/// h_k + G_k v.
CVec effective_channel(const CVec& direct, const CMat& cascaded, const CVec& v);

/// Full channel realization for (config, geometry). Pure in (config.rng_seed, config).
ChannelState build_channel_state(const Geometry& geometry, const SystemConfig& config);

/// Zero every direct link of user k and update the mask.
void block_user(ChannelState& channels, int k);

nlohmann::json to_json(const Geometry& geometry);
nlohmann::json to_json(const ChannelState& channels);
ChannelState channel_state_from_json(const nlohmann::json& j);

}  // namespace risres
