#include "risres/geometry.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace risres {

int perfect_square_side(int m) {
    if (m < 1) return -1;
    int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    return side * side == m ? side : -1;
}

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

Geometry build_geometry(const SystemConfig& config) {
    config.validate();
    Geometry g;
    const double a = config.area_half_width_m;
    // Opposite corners first, then the remaining two; cycles for N > 4.
    const std::array<Eigen::Vector2d, 4> corners = {Eigen::Vector2d(-a, -a), Eigen::Vector2d(a, a),
                                                    Eigen::Vector2d(-a, a), Eigen::Vector2d(a, -a)};
    const double half_lambda = config.wavelength_m / 2.0;
    for (int n = 0; n < config.num_aps; ++n) {
        const auto& c = corners[static_cast<std::size_t>(n % 4)];
        Point3 p(c.x(), c.y(), config.ap_height_m);
        g.ap_positions.push_back(p);
        std::vector<Point3> antennas;
        for (int l = 0; l < config.antennas_per_ap; ++l) {
            const double offset = (l - (config.antennas_per_ap - 1) / 2.0) * half_lambda;
            antennas.emplace_back(p + Point3(offset, 0.0, 0.0));
        }
        g.ap_antenna_positions.push_back(std::move(antennas));
    }

    g.ris_center = Point3(0.0, 0.0, config.ris_height_m);
    for (int k = 0; k < config.num_users; ++k) {
        const double angle = 2.0 * std::numbers::pi * k / config.num_users;
        g.user_positions.emplace_back(config.user_circle_radius_m * std::cos(angle),
                                      config.user_circle_radius_m * std::sin(angle),
                                      config.user_height_m);
    }

    g.grid_side = perfect_square_side(config.num_ris_elements);
    g.element_spacing_m = config.wavelength_m / 4.0;
    const double mid = (g.grid_side - 1) / 2.0;
    for (int row = 0; row < g.grid_side; ++row)
        for (int col = 0; col < g.grid_side; ++col)
            g.ris_element_positions.push_back(
                g.ris_center + Point3((row - mid) * g.element_spacing_m, (col - mid) * g.element_spacing_m, 0.0));
    g.ris_normal = Point3::UnitZ();
    return g;
}

CMat ris_correlation_matrix(const Geometry& geometry, double wavelength_m) {
    const auto m = static_cast<Eigen::Index>(geometry.ris_element_positions.size());
    CMat r(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        r(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double d = (geometry.ris_element_positions[static_cast<std::size_t>(i)] -
                              geometry.ris_element_positions[static_cast<std::size_t>(j)])
                                 .norm();
            const double value = sinc(2.0 * d / wavelength_m);
            r(i, j) = value;
            r(j, i) = value;
        }
    }
    return r;
}

}  // namespace risres
