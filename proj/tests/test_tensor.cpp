#include "her2flex/cmgan.hpp"
#include "her2flex/encoder.hpp"
#include "her2flex/fusion.hpp"
#include "her2flex/image_ops.hpp"
#include "her2flex/metrics.hpp"
#include "her2flex/router.hpp"
#include "her2flex/tensor.hpp"

#include <doctest.h>

using namespace her2flex;

TEST_CASE("avg_pool2 matches the hand-computed 4x4 example") {
  FeatureMap<double> in(1, 4, 4);
  double v = 1;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) in.at(0, y, x) = v++;
  const auto out = avg_pool2(in);
  CHECK(out.height == 2);
  CHECK(out.width == 2);
  CHECK(out.at(0, 0, 0) == doctest::Approx(3.5));
  CHECK(out.at(0, 0, 1) == doctest::Approx(5.5));
  CHECK(out.at(0, 1, 0) == doctest::Approx(11.5));
  CHECK(out.at(0, 1, 1) == doctest::Approx(13.5));
}

TEST_CASE("flip is an involution") {
  Rng rng = make_rng(7);
  const auto img = FeatureMap<float>::random_uniform(3, 8, 6, rng);
  const auto twice = flip_horizontal(flip_horizontal(img));
  CHECK((twice.data - img.data).cwiseAbs().maxCoeff() == 0.0f);
  const auto vtwice = flip_vertical(flip_vertical(img));
  CHECK((vtwice.data - img.data).cwiseAbs().maxCoeff() == 0.0f);
}
