#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "simrep/simulation_output.hpp"

namespace simrep {

enum class TestShape { kBlobs, kRings };

/// Known 2-D point cloud and its lift into nine dimensions.
struct TestData {
  /// n x 2 row-major.
  std::vector<double> points;
  /// Cluster or ring index per point.
  std::vector<int> labels;
  Dataset lifted;
};

/// (x+y, x-y, xy, x^2, y^2, x^2 y, x y^2, x^3, y^3)
std::array<double, 9> lift_point(double x, double y);

/// kBlobs: three Gaussian blobs. kRings: two concentric noisy rings.
/// Throws InputError for n < 10.
TestData gen_testdata(TestShape shape, std::size_t n, std::uint64_t seed);

}  // namespace simrep
