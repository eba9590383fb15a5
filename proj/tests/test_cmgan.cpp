#include "her2flex/cmgan.hpp"
#include "her2flex/synth.hpp"

#include "fd_check.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace her2flex;

TEST_CASE("build_pyramid obeys its contracts") {
  Rng rng = make_rng(8);
  const auto img = FeatureMap<double>::random_uniform(3, 8, 8, rng);

  const auto single = build_pyramid(img, 1);
  REQUIRE(single.levels.size() == 1);
  CHECK((single.levels[0].data - img.data).cwiseAbs().maxCoeff() == 0.0);

  const auto constant = build_pyramid(FeatureMap<double>::constant(3, 8, 8, 0.37), 3);
  for (const auto& level : constant.levels) {
    CHECK(level.data.minCoeff() == doctest::Approx(0.37));
    CHECK(level.data.maxCoeff() == doctest::Approx(0.37));
  }

  const auto pyr = build_pyramid(img, 3);
  CHECK(pyr.levels[1].height == 4);
  CHECK(pyr.levels[2].height == 2);
  // Mean preservation for dims divisible by the pooling factor.
  CHECK(pyr.levels[2].data.mean() == doctest::Approx(img.data.mean()).epsilon(1e-12));

  CHECK_THROWS_WITH_AS(build_pyramid(img, 5), doctest::Contains("TooManyLevels"), Error);
}

TEST_CASE("pyramid_l1_loss matches hand-computed examples") {
  const auto a = FeatureMap<double>::constant(3, 8, 8, 0.4);
  CHECK(pyramid_l1_loss(a, a, 3) == doctest::Approx(0.0));

  auto b = a;
  b.data.array() += 0.1;
  CHECK(pyramid_l1_loss(a, b, 3) == doctest::Approx(0.3).epsilon(1e-9));

  FeatureMap<double> c(3, 2, 2), d(3, 2, 2);
  d.at(1, 0, 1) = 0.5;
  CHECK(pyramid_l1_loss(c, d, 1) == doctest::Approx(0.5 / 12.0).epsilon(1e-9));

  FeatureMap<double> wrong(3, 4, 2);
  CHECK_THROWS_WITH_AS(pyramid_l1_loss(a, wrong, 1), doctest::Contains("ShapeMismatch"), Error);
}

TEST_CASE("pyramid_l1_loss is a symmetric premetric") {
  Rng rng = make_rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = FeatureMap<double>::random_uniform(3, 8, 8, rng);
    const auto b = FeatureMap<double>::random_uniform(3, 8, 8, rng);
    const double ab = pyramid_l1_loss(a, b, 3);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(pyramid_l1_loss(b, a, 3)));
    CHECK(pyramid_l1_loss(a, b, 3) == doctest::Approx(oracle::pyramid_l1_loops(a, b, 3)).epsilon(1e-12));
  }
  const auto a = FeatureMap<double>::random_uniform(3, 8, 8, rng);
  CHECK(pyramid_l1_loss(a, a, 2) == 0.0);
}

TEST_CASE("adversarial_loss matches hand-computed BCE values") {
  Matrix<double> half = Matrix<double>::Constant(2, 3, 0.5);
  CHECK(adversarial_loss(half, AdvRole::GeneratorStep) == doctest::Approx(std::log(2.0)));
  CHECK(adversarial_loss(half, AdvRole::DiscReal) == doctest::Approx(std::log(2.0)));
  CHECK(adversarial_loss(half, AdvRole::DiscFake) == doctest::Approx(std::log(2.0)));

  Matrix<double> confident = Matrix<double>::Constant(4, 4, 1.0 - 1e-7);
  CHECK(adversarial_loss(confident, AdvRole::DiscReal) <= 1e-6);

  Matrix<double> grid(1, 2);
  grid << 0.9, 0.6;
  CHECK(adversarial_loss(grid, AdvRole::GeneratorStep) ==
        doctest::Approx(-(std::log(0.9) + std::log(0.6)) / 2.0).epsilon(1e-9));
}

TEST_CASE("reconstruction_loss is the weighted sum of its terms") {
  CHECK(reconstruction_loss(1.0, 2.0, 1.0, 1.0) == doctest::Approx(3.0));
  CHECK(reconstruction_loss(0.7, 123.0, 1.0, 0.0) == doctest::Approx(0.7));
  CHECK(reconstruction_loss(0.693, 0.01, 1.0, 100.0) == doctest::Approx(1.693));
}

namespace {

GeneratorConfig tiny_gen() {
  GeneratorConfig cfg;
  cfg.base_channels = 4;
  return cfg;
}

}  // namespace

TEST_CASE("generator output obeys shape, range and determinism contracts") {
  nn::ParamStore<float> store;
  Rng rng = make_rng(3);
  init_generator(store, tiny_gen(), rng);

  Rng irng = make_rng(4);
  const auto src = ImageF::random_uniform(3, 16, 16, irng);
  const auto out1 = generator_forward(store, src, tiny_gen());
  const auto out2 = generator_forward(store, src, tiny_gen());
  CHECK(out1.height == 16);
  CHECK(out1.width == 16);
  CHECK(out1.channels() == 3);
  CHECK(out1.data.minCoeff() > 0.0f);
  CHECK(out1.data.maxCoeff() < 1.0f);
  CHECK((out1.data - out2.data).cwiseAbs().maxCoeff() == 0.0f);

  const auto odd = ImageF::random_uniform(3, 18, 16, irng);
  CHECK_THROWS_WITH_AS(generator_forward(store, odd, tiny_gen()),
                       doctest::Contains("ShapeMismatch"), Error);
}

TEST_CASE("generator range invariant holds under arbitrary parameter values") {
  nn::ParamStore<float> store;
  Rng rng = make_rng(5);
  init_generator(store, tiny_gen(), rng);
  for (auto& [name, e] : store.entries()) e.value.array() += 3.0f;  // push activations far out
  Rng irng = make_rng(6);
  const auto out = generator_forward(store, ImageF::random_uniform(3, 16, 16, irng), tiny_gen());
  CHECK(out.data.minCoeff() >= 0.0f);
  CHECK(out.data.maxCoeff() <= 1.0f);
}

TEST_CASE("every generator parameter receives nonzero reconstruction gradient") {
  nn::ParamStore<double> store;
  Rng rng = make_rng(9);
  init_generator(store, tiny_gen(), rng);
  Rng irng = make_rng(10);
  const auto src = FeatureMap<double>::random_uniform(3, 16, 16, irng);
  const auto tgt = FeatureMap<double>::random_uniform(3, 16, 16, irng);

  const auto build = [&](nn::Graph<double>& g) {
    const int fake = generator_nodes(g, store, g.input(src), tiny_gen());
    return pyramid_l1_nodes<double>(g, fake, g.input(tgt), 3);
  };
  store.zero_grads();
  {
    nn::Graph<double> g;
    g.backward(build(g));
  }
  for (const auto& [name, e] : store.entries()) {
    CAPTURE(name);
    CHECK(e.grad.cwiseAbs().minCoeff() > 0.0);
  }
  // Finite differences confirm the analytic gradients on this configuration.
  const auto report = her2flex::testing::check_gradients(store, build, 1e-6);
  CAPTURE(report.worst);
  CHECK(report.max_rel_err < 1e-3);
}

TEST_CASE("discriminator grid dims follow input dims") {
  nn::ParamStore<float> store;
  Rng rng = make_rng(12);
  init_discriminator(store, DiscriminatorConfig{4}, rng);
  nn::Graph<float> g(false);
  Rng irng = make_rng(13);
  const int src = g.input(ImageF::random_uniform(3, 16, 16, irng));
  const int cand = g.input(ImageF::random_uniform(3, 16, 16, irng));
  const int scores = discriminator_scores(g, store, src, cand, false);
  CHECK(g.height(scores) == 4);
  CHECK(g.width(scores) == 4);
  CHECK(g.value(scores).rows() == 1);
  CHECK(g.value(scores).minCoeff() > 0.0f);
  CHECK(g.value(scores).maxCoeff() < 1.0f);
}

namespace {

std::vector<std::pair<FeatureMap<float>, FeatureMap<float>>> tiny_batch(int n, std::uint64_t seed) {
  std::vector<std::pair<FeatureMap<float>, FeatureMap<float>>> batch;
  for (int i = 0; i < n; ++i) {
    const auto s = synth_sample(kAllGrades[i % 4], i, 32, seed);
    batch.emplace_back(*s.he, *s.ihc);
  }
  return batch;
}

}  // namespace

TEST_CASE("gan training isolates stores, stays deterministic, and overfits a tiny batch") {
  const auto batch = tiny_batch(4, 77);
  const GeneratorConfig gcfg = tiny_gen();
  const DiscriminatorConfig dcfg{4};

  auto run = [&](int steps, std::vector<float>* trajectory) {
    nn::ParamStore<float> gs, ds;
    Rng rng = make_rng(21);
    init_generator(gs, gcfg, rng);
    init_discriminator(ds, dcfg, rng);
    nn::AdamW<float> go, do_;
    go.lr0 = 2e-3f;
    do_.lr0 = 2e-3f;
    float first_l1 = -1, last_l1 = -1;
    for (int s = 0; s < steps; ++s) {
      const auto r = gan_train_step(gs, ds, batch, 1.0f, 100.0f, 3, gcfg, go, do_);
      if (s == 0) first_l1 = r.l1;
      last_l1 = r.l1;
      if (trajectory) trajectory->push_back(r.g_loss);
    }
    return std::make_pair(first_l1, last_l1);
  };

  // Determinism: identical loss trajectories across two runs.
  std::vector<float> t1, t2;
  run(5, &t1);
  run(5, &t2);
  CHECK(t1 == t2);

  // Overfit oracle: pyramid L1 falls below 10% of its initial value.
  const auto [first, last] = run(500, nullptr);
  CAPTURE(first);
  CAPTURE(last);
  CHECK(last < 0.1f * first);
}

TEST_CASE("discriminator updates leave generator parameters untouched and vice versa") {
  const auto batch = tiny_batch(2, 99);
  nn::ParamStore<float> gs, ds;
  Rng rng = make_rng(31);
  const GeneratorConfig gcfg = tiny_gen();
  init_generator(gs, gcfg, rng);
  init_discriminator(ds, DiscriminatorConfig{4}, rng);
  nn::AdamW<float> go, do_;
  go.lr0 = 1e-3f;
  do_.lr0 = 1e-3f;

  const auto g_before = gs;
  const auto d_before0 = ds;
  gan_disc_step(gs, ds, batch, gcfg, do_);
  bool d_changed = false;
  for (const auto& [name, e] : ds.entries())
    d_changed = d_changed || (e.value - d_before0.at(name).value).cwiseAbs().maxCoeff() > 0.0f;
  CHECK(d_changed);
  for (const auto& [name, e] : gs.entries())
    CHECK((e.value - g_before.at(name).value).cwiseAbs().maxCoeff() == 0.0f);

  const auto d_before = ds;
  gan_gen_step(gs, ds, batch, 1.0f, 100.0f, 3, gcfg, go);
  bool g_changed = false;
  for (const auto& [name, e] : gs.entries())
    g_changed = g_changed || (e.value - g_before.at(name).value).cwiseAbs().maxCoeff() > 0.0f;
  CHECK(g_changed);
  for (const auto& [name, e] : ds.entries())
    CHECK((e.value - d_before.at(name).value).cwiseAbs().maxCoeff() == 0.0f);
}
