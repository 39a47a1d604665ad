#include "risres/channel.hpp"

#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

namespace risres {

CVec ChannelState::direct_link(int n, int k) const {
    return direct.col(k).segment(static_cast<Eigen::Index>(n) * antennas_per_ap, antennas_per_ap);
}

bool ChannelState::user_fully_blocked(int k) const { return blockage_mask.col(k).all(); }

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(a),
                      static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                      static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

double pathloss_gain(double distance_m, double ref_db, double exponent) {
    if (!(distance_m > 0.0)) throw DomainError("pathloss distance must be positive");
    return std::pow(10.0, -(ref_db + 10.0 * exponent * std::log10(distance_m)) / 10.0);
}

namespace {

CVec standard_complex_normal(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    CVec z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        z(i) = cdouble(re, im);
    }
    return z;
}

cdouble los_entry(double distance, double amplitude, double wavelength) {
    return amplitude * std::polar(1.0, -2.0 * std::numbers::pi * distance / wavelength);
}

CMat correlation_sqrt(const Geometry& geometry, double wavelength) {
    const CMat r = ris_correlation_matrix(geometry, wavelength);
    Eigen::SelfAdjointEigenSolver<RMat> eig(r.real());
    const RVec lambda = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const RMat sq = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
    return sq.cast<cdouble>();
}

}  // namespace

CVec sample_direct_channel(const Geometry& geometry, const SystemConfig& config, int n, int k) {
    const double d = (geometry.ap_positions.at(static_cast<std::size_t>(n)) -
                      geometry.user_positions.at(static_cast<std::size_t>(k)))
                         .norm();
    if (!(d > 0.0)) throw DomainError("AP and user positions coincide");
    auto rng = substream(config.rng_seed, stream_id::direct, static_cast<std::uint64_t>(n),
                         static_cast<std::uint64_t>(k));
    std::normal_distribution<double> shadow(0.0, config.shadowing_std_db);
    const double shadow_db = shadow(rng);
    const double beta = std::pow(10.0, (-config.pathloss_ref_db -
                                        10.0 * config.pathloss_exponent_direct * std::log10(d) + shadow_db) /
                                           10.0);
    return std::sqrt(beta) * standard_complex_normal(rng, config.antennas_per_ap);
}

LosChannels build_los_channels(const Geometry& geometry, const SystemConfig& config) {
    const int m = config.num_ris_elements;
    const double lambda = config.wavelength_m;
    LosChannels out;
    for (int n = 0; n < config.num_aps; ++n) {
        const auto& antennas = geometry.ap_antenna_positions[static_cast<std::size_t>(n)];
        const double amp = std::sqrt(pathloss_gain((geometry.ap_positions[static_cast<std::size_t>(n)] -
                                                    geometry.ris_center)
                                                       .norm(),
                                                   config.pathloss_ref_db, config.pathloss_exponent_ris));
        CMat h(config.antennas_per_ap, m);
        for (int l = 0; l < config.antennas_per_ap; ++l)
            for (int e = 0; e < m; ++e)
                h(l, e) = los_entry((antennas[static_cast<std::size_t>(l)] -
                                     geometry.ris_element_positions[static_cast<std::size_t>(e)])
                                        .norm(),
                                    amp, lambda);
        out.ap_ris.push_back(std::move(h));
    }
    out.ris_user.resize(m, config.num_users);
    for (int k = 0; k < config.num_users; ++k) {
        const auto& user = geometry.user_positions[static_cast<std::size_t>(k)];
        const double amp = std::sqrt(
            pathloss_gain((user - geometry.ris_center).norm(), config.pathloss_ref_db, config.pathloss_exponent_ris));
        for (int e = 0; e < m; ++e)
            out.ris_user(e, k) =
                los_entry((user - geometry.ris_element_positions[static_cast<std::size_t>(e)]).norm(), amp, lambda);
    }
    return out;
}

CMat cascade(const CMat& stacked_ap_ris, const CVec& ris_user) {
    if (stacked_ap_ris.cols() != ris_user.size())
        throw DimensionError("cascade: H has " + std::to_string(stacked_ap_ris.cols()) + " columns, g has " +
                             std::to_string(ris_user.size()) + " entries");
    return stacked_ap_ris * ris_user.asDiagonal();
}

CVec effective_channel(const CVec& direct, const CMat& cascaded, const CVec& v) {
    if (cascaded.rows() != direct.size() || cascaded.cols() != v.size())
        throw DimensionError("effective_channel: inconsistent dimensions");
    return direct + cascaded * v;
}

ChannelState build_channel_state(const Geometry& geometry, const SystemConfig& config) {
    config.validate();
    const int n_ap = config.num_aps;
    const int l = config.antennas_per_ap;
    const int k_users = config.num_users;
    const int m = config.num_ris_elements;

    ChannelState ch;
    ch.num_aps = n_ap;
    ch.antennas_per_ap = l;
    ch.direct.resize(n_ap * l, k_users);
    for (int k = 0; k < k_users; ++k)
        for (int n = 0; n < n_ap; ++n)
            ch.direct.col(k).segment(n * l, l) = sample_direct_channel(geometry, config, n, k);
    ch.direct_unblocked = ch.direct;

    ch.ap_ris.resize(n_ap * l, m);
    if (config.ris_channel_mode == RisChannelMode::LineOfSight) {
        const LosChannels los = build_los_channels(geometry, config);
        for (int n = 0; n < n_ap; ++n) ch.ap_ris.middleRows(n * l, l) = los.ap_ris[static_cast<std::size_t>(n)];
        ch.ris_user = los.ris_user;
    } else {
        const CMat r_half = correlation_sqrt(geometry, config.wavelength_m);
        for (int n = 0; n < n_ap; ++n) {
            auto rng = substream(config.rng_seed, stream_id::ris_correlated, static_cast<std::uint64_t>(n));
            const double beta = pathloss_gain((geometry.ap_positions[static_cast<std::size_t>(n)] -
                                               geometry.ris_center)
                                                  .norm(),
                                              config.pathloss_ref_db, config.pathloss_exponent_ris);
            CMat z(l, m);
            for (int row = 0; row < l; ++row) z.row(row) = standard_complex_normal(rng, m).transpose();
            ch.ap_ris.middleRows(n * l, l) = std::sqrt(beta) * z * r_half.transpose();
        }
        ch.ris_user.resize(m, k_users);
        for (int k = 0; k < k_users; ++k) {
            auto rng = substream(config.rng_seed, stream_id::ris_correlated,
                                 static_cast<std::uint64_t>(n_ap + k));
            const double beta = pathloss_gain((geometry.user_positions[static_cast<std::size_t>(k)] -
                                               geometry.ris_center)
                                                  .norm(),
                                              config.pathloss_ref_db, config.pathloss_exponent_ris);
            ch.ris_user.col(k) = std::sqrt(beta) * r_half * standard_complex_normal(rng, m);
        }
    }

    for (int k = 0; k < k_users; ++k) ch.cascaded.push_back(cascade(ch.ap_ris, ch.ris_user.col(k)));
    ch.blockage_mask = BlockageMask::Constant(n_ap, k_users, false);
    return ch;
}

void block_user(ChannelState& channels, int k) {
    if (k < 0 || k >= channels.num_users()) throw DimensionError("block_user: user index out of range");
    channels.direct.col(k).setZero();
    channels.blockage_mask.col(k).setConstant(true);
}

namespace {

nlohmann::json complex_matrix_json(const CMat& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

CMat complex_matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
    CMat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& row = j.at(static_cast<std::size_t>(r));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw DimensionError("ragged complex matrix");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto& e = row.at(static_cast<std::size_t>(c));
            m(r, c) = cdouble(e.at(0).get<double>(), e.at(1).get<double>());
        }
    }
    return m;
}

nlohmann::json point_json(const Point3& p) { return {p.x(), p.y(), p.z()}; }

}  // namespace

nlohmann::json to_json(const Geometry& geometry) {
    nlohmann::json j;
    j["schema"] = "risres.geometry/1";
    auto points = [](const std::vector<Point3>& ps) {
        auto a = nlohmann::json::array();
        for (const auto& p : ps) a.push_back(point_json(p));
        return a;
    };
    j["ap_positions"] = points(geometry.ap_positions);
    j["user_positions"] = points(geometry.user_positions);
    j["ris_center"] = point_json(geometry.ris_center);
    j["ris_normal"] = point_json(geometry.ris_normal);
    j["ris_element_positions"] = points(geometry.ris_element_positions);
    j["element_spacing_m"] = geometry.element_spacing_m;
    j["grid_side"] = geometry.grid_side;
    return j;
}

nlohmann::json to_json(const ChannelState& channels) {
    nlohmann::json j;
    j["schema"] = "risres.channels/1";
    j["num_aps"] = channels.num_aps;
    j["antennas_per_ap"] = channels.antennas_per_ap;
    j["direct"] = complex_matrix_json(channels.direct);
    j["direct_unblocked"] = complex_matrix_json(channels.direct_unblocked);
    j["ap_ris"] = complex_matrix_json(channels.ap_ris);
    j["ris_user"] = complex_matrix_json(channels.ris_user);
    auto mask = nlohmann::json::array();
    for (Eigen::Index n = 0; n < channels.blockage_mask.rows(); ++n) {
        auto row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < channels.blockage_mask.cols(); ++k) row.push_back(bool(channels.blockage_mask(n, k)));
        mask.push_back(std::move(row));
    }
    j["blockage_mask"] = std::move(mask);
    return j;
}

ChannelState channel_state_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "risres.channels/1") throw ConfigError("unexpected channel schema");
    ChannelState ch;
    ch.num_aps = j.at("num_aps").get<int>();
    ch.antennas_per_ap = j.at("antennas_per_ap").get<int>();
    ch.direct = complex_matrix_from_json(j.at("direct"));
    ch.direct_unblocked = complex_matrix_from_json(j.at("direct_unblocked"));
    ch.ap_ris = complex_matrix_from_json(j.at("ap_ris"));
    ch.ris_user = complex_matrix_from_json(j.at("ris_user"));
    if (ch.direct.rows() != ch.num_aps * ch.antennas_per_ap || ch.ap_ris.rows() != ch.direct.rows() ||
        ch.ris_user.rows() != ch.ap_ris.cols() || ch.ris_user.cols() != ch.direct.cols())
        throw DimensionError("channel JSON dimensions are inconsistent");
    const auto& mask = j.at("blockage_mask");
    ch.blockage_mask = BlockageMask::Constant(ch.num_aps, ch.num_users(), false);
    for (int n = 0; n < ch.num_aps; ++n)
        for (int k = 0; k < ch.num_users(); ++k)
            ch.blockage_mask(n, k) = mask.at(static_cast<std::size_t>(n)).at(static_cast<std::size_t>(k)).get<bool>();
    for (int k = 0; k < ch.num_users(); ++k) ch.cascaded.push_back(cascade(ch.ap_ris, ch.ris_user.col(k)));
    return ch;
}

}  // namespace risres
