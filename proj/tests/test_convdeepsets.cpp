#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "stnp/convdeepsets.hpp"
#include "stnp/latent_prior.hpp"

using namespace stnp;

namespace {

ContextSet random_context(Rng& rng, long n, double lo, double hi) {
  ContextSet ctx;
  for (long i = 0; i < n; ++i) {
    ctx.x.push_back(rng.uniform(lo, hi));
    ctx.y.push_back(rng.normal());
  }
  return ctx;
}

}  // namespace

TEST_CASE("make_grid") {
  SUBCASE("unit range at 64 points per unit") {
    Grid g = make_grid(0.0, 1.0, 64.0, 0.0);
    CHECK(g.m == 65);
    CHECK(g.spacing == doctest::Approx(1.0 / 64.0).epsilon(1e-15));
    CHECK(g.point(0) == 0.0);
    CHECK(g.point(64) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("margin extends the cover") {
    Grid g = make_grid(0.0, 4.0, 64.0, 0.1);
    CHECK(g.point(0) == doctest::Approx(-0.1));
    CHECK(g.point(g.m - 1) >= 4.1 - 1e-12);
  }
  SUBCASE("uniform spacing within 1e-12 and strictly increasing") {
    Grid g = make_grid(0.3, 2.7, 37.0, 0.05);
    auto pts = g.points();
    for (size_t i = 1; i < pts.size(); ++i) {
      CHECK(pts[i] > pts[i - 1]);
      CHECK(std::abs((pts[i] - pts[i - 1]) - g.spacing) <= 1e-12);
    }
  }
  SUBCASE("translation moves the grid pointwise") {
    const double c = 1.23;
    Grid a = make_grid(0.0, 2.0, 50.0, 0.1);
    Grid b = make_grid(0.0 + c, 2.0 + c, 50.0, 0.1);
    REQUIRE(a.m == b.m);
    for (long i = 0; i < a.m; ++i)
      CHECK(b.point(i) == doctest::Approx(a.point(i) + c).epsilon(1e-12));
  }
  SUBCASE("degenerate range with zero margin is rejected") {
    CHECK_THROWS_AS(make_grid(1.0, 1.0, 64.0, 0.0), ShapeError);
  }
}

TEST_CASE("density_channel") {
  Grid grid = make_grid(0.0, 1.0, 16.0, 0.0);
  auto rbf = rbf_kernel(0.1);
  SUBCASE("empty context gives zeros") {
    ContextSet empty;
    auto d = density_channel(empty, grid, rbf);
    CHECK(*std::max_element(d.begin(), d.end()) == 0.0);
  }
  SUBCASE("a point on a node contributes k(0) = 1 there") {
    ContextSet ctx{{grid.point(4)}, {2.0}};
    auto d = density_channel(ctx, grid, rbf);
    CHECK(d[4] == 1.0);
  }
  SUBCASE("additivity over disjoint contexts") {
    Rng rng(3);
    ContextSet a = random_context(rng, 4, 0.0, 1.0);
    ContextSet b = random_context(rng, 3, 0.0, 1.0);
    ContextSet both = a;
    both.x.insert(both.x.end(), b.x.begin(), b.x.end());
    both.y.insert(both.y.end(), b.y.begin(), b.y.end());
    auto da = density_channel(a, grid, rbf);
    auto db = density_channel(b, grid, rbf);
    auto dab = density_channel(both, grid, rbf);
    for (long i = 0; i < grid.m; ++i)
      CHECK(dab[i] == doctest::Approx(da[i] + db[i]).epsilon(1e-12));
  }
  SUBCASE("permutation invariance is bit-exact") {
    Rng rng(4);
    ContextSet ctx = random_context(rng, 6, 0.0, 1.0);
    ContextSet rev = ctx;
    std::reverse(rev.x.begin(), rev.x.end());
    std::reverse(rev.y.begin(), rev.y.end());
    CHECK(density_channel(ctx, grid, rbf) == density_channel(rev, grid, rbf));
    CHECK(deterministic_data_channel(ctx, grid, rbf) ==
          deterministic_data_channel(rev, grid, rbf));
  }
}

TEST_CASE("deterministic_data_channel") {
  Grid grid = make_grid(0.0, 1.0, 16.0, 0.0);
  auto rbf = rbf_kernel(0.05);
  SUBCASE("single on-node point reproduces its value at the node") {
    ContextSet ctx{{grid.point(7)}, {-1.4}};
    auto d = deterministic_data_channel(ctx, grid, rbf);
    CHECK(d[7] == doctest::Approx(-1.4).epsilon(1e-12));
  }
  SUBCASE("constant outputs give a constant channel where density is real") {
    Rng rng(5);
    ContextSet ctx = random_context(rng, 8, 0.0, 1.0);
    for (auto& y : ctx.y) y = 3.25;
    auto d = deterministic_data_channel(ctx, grid, rbf);
    auto den = density_channel(ctx, grid, rbf);
    for (long i = 0; i < grid.m; ++i)
      if (den[i] > 1e-6)
        CHECK(d[i] == doctest::Approx(3.25).epsilon(1e-9));
  }
  SUBCASE("equals the rescaled restricted GP mean (Diag = identity)") {
    Rng rng(6);
    for (int inst = 0; inst < 20; ++inst) {
      ContextSet ctx = random_context(rng, 5, 0.0, 1.0);
      auto d = deterministic_data_channel(ctx, grid, rbf);
      for (long i = 0; i < grid.m; ++i) {
        // direct matrix evaluation: (1 / density) K(t, X) I^{-1} Y
        double num = 0.0, den = 0.0;
        for (size_t n = 0; n < ctx.x.size(); ++n) {
          num += rbf(grid.point(i) - ctx.x[n]) * ctx.y[n];
          den += rbf(grid.point(i) - ctx.x[n]);
        }
        const double want = num / std::max(den, 1e-12);
        CHECK(std::abs(d[i] - want) <= 1e-10);
      }
    }
  }
}

TEST_CASE("grid-aligned translation equivariance of the channels") {
  auto rbf = rbf_kernel(0.08);
  Rng rng(8);
  ContextSet ctx = random_context(rng, 7, 0.0, 2.0);
  Grid grid = make_grid(0.0, 2.0, 32.0, 0.25);
  const long s = 9;
  const double shift = s * grid.spacing;
  ContextSet moved = ctx;
  for (auto& x : moved.x) x += shift;
  Grid grid2 = grid;
  grid2.start += shift;  // extended/translated grid

  auto d1 = density_channel(ctx, grid, rbf);
  auto d2 = density_channel(moved, grid2, rbf);
  auto v1 = deterministic_data_channel(ctx, grid, rbf);
  auto v2 = deterministic_data_channel(moved, grid2, rbf);
  double worst = 0.0;
  for (long i = 0; i < grid.m; ++i) {
    worst = std::max(worst, std::abs(d2[i] - d1[i]));
    worst = std::max(worst, std::abs(v2[i] - v1[i]));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("random_functional_representation") {
  KernelBank bank = make_kernel_bank(3, 3.0);
  Rng rng(21);
  ContextSet ctx = random_context(rng, 6, 0.0, 2.0);
  std::vector<double> probs{0.2, 0.3, 0.5};

  SUBCASE("N=5 yields five data channels and the expected-kernel density") {
    Rng r(77);
    auto rep = random_functional_representation(ctx, bank, probs, 5, 10, r);
    CHECK(rep.data_channels.size() == 5);
    auto want =
        density_channel(ctx, rep.grid, mixture_kernel(bank, probs));
    CHECK(rep.density == want);
  }
  SUBCASE("fixed seed reproduces bit-identically") {
    Rng r1(91), r2(91);
    auto a = random_functional_representation(ctx, bank, probs, 3, 8, r1);
    auto b = random_functional_representation(ctx, bank, probs, 3, 8, r2);
    CHECK(a.data_channels == b.data_channels);
  }
  SUBCASE("one-hot probs with empty context are pure prior draws") {
    ContextSet empty;
    std::vector<double> onehot{0.0, 1.0, 0.0};
    // variance across many draws at a fixed grid cell approaches k(0) = 1
    double sum = 0.0, sumsq = 0.0;
    const int n = 2000;
    Grid grid = make_grid(0.0, 1.0, 8.0, 0.0);
    RandomRepOptions opts;
    opts.gs_temperature = 1e-4;  // one-hot z with overwhelming probability
    for (int i = 0; i < n; ++i) {
      Rng r(hash_seed(500, 0, i));
      auto rep = random_functional_representation_on(grid, empty, bank, onehot,
                                                     1, 64, r, opts);
      const double v = rep.data_channels[0][3];
      sum += v;
      sumsq += v * v;
    }
    const double var = (sumsq - sum * sum / n) / (n - 1);
    CHECK(var == doctest::Approx(1.0).epsilon(0.15));
  }
  SUBCASE("approx mode matches exact mode structure") {
    Rng r(13);
    RandomRepOptions opts;
    opts.mode = RepresentationMode::Approx;
    opts.alpha = 0.4;
    auto rep = random_functional_representation(ctx, bank, probs, 2, 8, r, opts);
    CHECK(rep.data_channels.size() == 2);
    for (const auto& ch : rep.data_channels)
      for (double v : ch) CHECK(std::isfinite(v));
  }
}

TEST_CASE("smooth_to_targets") {
  Grid grid = make_grid(0.0, 1.0, 16.0, 0.0);
  SUBCASE("near-delta kernel interpolates grid values") {
    std::vector<std::vector<double>> vals{{}};
    vals[0].assign(static_cast<size_t>(grid.m), 0.0);
    vals[0][5] = 2.5;
    auto out = smooth_to_targets(vals, grid, {grid.point(5)}, rbf_kernel(0.004));
    CHECK(out[0][0] == doctest::Approx(2.5).epsilon(1e-6));
  }
  SUBCASE("zero grid values give zero output") {
    std::vector<std::vector<double>> vals{
        std::vector<double>(static_cast<size_t>(grid.m), 0.0)};
    auto out = smooth_to_targets(vals, grid, {0.3, 0.7}, rbf_kernel(0.1));
    CHECK(out[0] == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("matches a scalar double-loop oracle") {
    Rng rng(10);
    std::vector<std::vector<double>> vals(2);
    for (auto& ch : vals) {
      ch.resize(static_cast<size_t>(grid.m));
      for (auto& v : ch) v = rng.normal();
    }
    std::vector<double> targets{0.11, 0.52, 0.93};
    auto k = rbf_kernel(0.07);
    auto out = smooth_to_targets(vals, grid, targets, k);
    for (size_t c = 0; c < 2; ++c)
      for (size_t j = 0; j < targets.size(); ++j) {
        double acc = 0.0;
        for (long mi = 0; mi < grid.m; ++mi)
          acc += vals[c][static_cast<size_t>(mi)] * k(targets[j] - grid.point(mi));
        CHECK(std::abs(out[c][j] - acc) <= 1e-12);
      }
  }
}

TEST_CASE("bin_to_grid") {
  Grid grid = make_grid(0.0, 1.0, 4.0, 0.0);  // nodes at 0,.25,.5,.75,1
  ContextSet ctx{{0.26, 0.24, 0.99}, {1.0, 2.0, -1.0}};
  auto b = bin_to_grid(ctx, grid);
  CHECK(b.indicator == std::vector<double>{0, 2, 0, 0, 1});
  CHECK(b.values[1] == 3.0);
  CHECK(b.values[4] == -1.0);
}

TEST_CASE("Bayesian distributional TE of the data channels") {
  // Prop. 2 discretized check with fixed probs (a perfectly invariant p_nn).
  KernelBank bank = make_kernel_bank(2, 2.0);
  std::vector<double> probs{0.5, 0.5};
  Rng rng(65);
  ContextSet ctx = random_context(rng, 5, 0.0, 1.5);
  Grid grid = make_grid(0.0, 1.5, 24.0, 0.2);
  const long cells = 6;  // grid-aligned shift
  const double shift = cells * grid.spacing;
  ContextSet moved = ctx;
  for (auto& x : moved.x) x += shift;
  Grid grid2 = grid;
  grid2.start += shift;

  const int n = 2000;
  std::vector<double> m1(static_cast<size_t>(grid.m), 0.0),
      m2(static_cast<size_t>(grid.m), 0.0),
      v1(static_cast<size_t>(grid.m), 0.0),
      v2(static_cast<size_t>(grid.m), 0.0);
  for (int i = 0; i < n; ++i) {
    // common random numbers couple the two estimators (variance reduction;
    // the two channels stay marginally identical in distribution)
    Rng ra(hash_seed(7166, 0, i)), rb(hash_seed(7166, 0, i));
    auto rep1 = random_functional_representation_on(grid, ctx, bank, probs, 1,
                                                    64, ra);
    auto rep2 = random_functional_representation_on(grid2, moved, bank, probs,
                                                    1, 64, rb);
    for (long j = 0; j < grid.m; ++j) {
      m1[j] += rep1.data_channels[0][j];
      m2[j] += rep2.data_channels[0][j];
      v1[j] += rep1.data_channels[0][j] * rep1.data_channels[0][j];
      v2[j] += rep2.data_channels[0][j] * rep2.data_channels[0][j];
    }
  }
  double worst = 0.0;
  for (long j = 0; j < grid.m; ++j) {
    const double mu1 = m1[j] / n, mu2 = m2[j] / n;
    const double va = v1[j] / n - mu1 * mu1, vb = v2[j] / n - mu2 * mu2;
    worst = std::max(worst, std::abs(mu1 - mu2));
    worst = std::max(worst, std::abs(va - vb));
  }
  CHECK(worst <= 0.1);
}
