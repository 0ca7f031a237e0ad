#include "simrep/testdata.hpp"

#include <cmath>
#include <numbers>

#include "simrep/errors.hpp"
#include "simrep/rng.hpp"

namespace simrep {

std::array<double, 9> lift_point(double x, double y) {
  return {x + y, x - y, x * y, x * x, y * y, x * x * y, x * y * y, x * x * x, y * y * y};
}

TestData gen_testdata(TestShape shape, std::size_t n, std::uint64_t seed) {
  if (n < 10) throw InputError("gen_testdata: need at least 10 points");
  Rng rng(seed);
  TestData out;
  out.points.reserve(2 * n);
  out.labels.reserve(n);
  out.lifted.reserve(n);

  constexpr std::array<std::array<double, 2>, 3> kCenters{{{-1.5, -1.0}, {1.5, -1.0}, {0.0, 1.5}}};
  constexpr double kBlobSigma = 0.35;
  constexpr std::array<double, 2> kRadii{0.6, 1.6};
  constexpr double kRingSigma = 0.08;

  for (std::size_t i = 0; i < n; ++i) {
    double x = 0.0;
    double y = 0.0;
    int label = 0;
    if (shape == TestShape::kBlobs) {
      label = static_cast<int>(rng.uniform_index(kCenters.size()));
      x = kCenters[label][0] + kBlobSigma * rng.normal();
      y = kCenters[label][1] + kBlobSigma * rng.normal();
    } else {
      label = static_cast<int>(rng.uniform_index(kRadii.size()));
      const double angle = 2.0 * std::numbers::pi * rng.uniform();
      const double radius = kRadii[label] + kRingSigma * rng.normal();
      x = radius * std::cos(angle);
      y = radius * std::sin(angle);
    }
    out.points.push_back(x);
    out.points.push_back(y);
    out.labels.push_back(label);
    const auto lifted = lift_point(x, y);
    SimulationOutput sample;
    sample.shape_tag = ShapeTag::kVector;
    sample.dims = {lifted.size()};
    sample.data.assign(lifted.begin(), lifted.end());
    sample.params = {x, y};
    sample.seed = seed;
    out.lifted.push_back(std::move(sample));
  }
  return out;
}

}  // namespace simrep
