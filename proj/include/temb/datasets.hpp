#pragma once

#include "temb/geometry.hpp"

#include <cstdint>

namespace temb {

// Cluster centers ~ N(0, separation^2 I), members ~ center + N(0, I).
PointSet gaussian_mixture(std::size_t n, std::size_t d, std::size_t clusters, double separation,
                          std::uint64_t seed);

PointSet uniform_cube(std::size_t n, std::size_t d, std::uint64_t seed);

// Points near a random line with small transverse noise.
PointSet near_collinear(std::size_t n, std::size_t d, double noise, std::uint64_t seed);

}  // namespace temb
