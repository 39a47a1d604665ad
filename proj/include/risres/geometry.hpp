#pragma once

#include <vector>

#include "risres/config.hpp"
#include "risres/types.hpp"

namespace risres {

struct Geometry {
    std::vector<Point3> ap_positions;
    std::vector<Point3> user_positions;
    Point3 ris_center = Point3::Zero();
    /// Row-major sqrt(M) x sqrt(M) grid, element m = row * side + col.
    std::vector<Point3> ris_element_positions;
    Point3 ris_normal = Point3::UnitZ();
    /// Antenna positions per AP: a half-wavelength ULA along x centered on the AP.
    std::vector<std::vector<Point3>> ap_antenna_positions;
    double element_spacing_m = 0.0;
    int grid_side = 0;
};

/// Returns the side length if m is a perfect square, otherwise -1.
int perfect_square_side(int m);

/// APs at opposite corners of the square area (cycling through the four corners
/// for N > 2), users on a circle around the RIS, RIS grid centered at the origin.
Geometry build_geometry(const SystemConfig& config);

/// Spatial correlation of the planar array, [R]_{m,m'} = sinc(2 |u_m - u_m'| / lambda).
CMat ris_correlation_matrix(const Geometry& geometry, double wavelength_m);

/// Normalized sinc, sin(pi x) / (pi x).
double sinc(double x);

}  // namespace risres
