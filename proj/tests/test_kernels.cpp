#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "stnp/kernels.hpp"
#include "stnp/rng.hpp"

using namespace stnp;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent oracle: quadrature of the Bochner integral
// Re int exp(i 2 pi s tau) N(s; mu, sigma2) ds over a wide truncation.
double bochner_quadrature(double mu, double sigma2, double tau) {
  const double sigma = std::sqrt(sigma2);
  const double lo = mu - 8.0 * sigma, hi = mu + 8.0 * sigma;
  const double step = 1e-6 * (hi - lo) * 1e3;  // 1e-3 of the window
  double acc = 0.0;
  const double norm = 1.0 / std::sqrt(2.0 * kPi * sigma2);
  for (double s = lo; s <= hi; s += step) {
    const double p = norm * std::exp(-0.5 * (s - mu) * (s - mu) / sigma2);
    acc += std::cos(2.0 * kPi * s * tau) * p * step;
  }
  return acc;
}

std::vector<double> simplex(Rng& rng, long q) {
  std::vector<double> z(static_cast<size_t>(q));
  double total = 0.0;
  for (auto& v : z) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (auto& v : z) v /= total;
  return z;
}

}  // namespace

TEST_CASE("sm_kernel_eval closed form") {
  SpectralDensity d{{0.0}, {0.25}};
  CHECK(sm_kernel_eval(d, 0.0) == 1.0);
  CHECK(sm_kernel_eval(d, 1.0) ==
        doctest::Approx(std::exp(-2.0 * kPi * kPi * 0.25)).epsilon(1e-10));
  // spec value
  CHECK(sm_kernel_eval(d, 1.0) == doctest::Approx(0.007192).epsilon(1e-3));

  SUBCASE("matches Bochner quadrature") {
    SpectralDensity d2{{1.3}, {0.4}};
    for (double tau : {0.0, 0.3, 1.0, 2.2}) {
      CHECK(sm_kernel_eval(d2, tau) ==
            doctest::Approx(bochner_quadrature(1.3, 0.4, tau)).epsilon(1e-5));
    }
  }
  SUBCASE("symmetry and envelope") {
    Rng rng(5);
    SpectralDensity d3{{2.0}, {0.35}};
    for (int i = 0; i < 50; ++i) {
      const double tau = rng.uniform(-4.0, 4.0);
      CHECK(sm_kernel_eval(d3, tau) == doctest::Approx(sm_kernel_eval(d3, -tau)));
      CHECK(std::abs(sm_kernel_eval(d3, tau)) <= 1.0);
    }
  }
}

TEST_CASE("mixture_kernel_eval") {
  KernelBank bank = make_kernel_bank(3, 3.0);
  SUBCASE("one-hot selects a basis kernel") {
    for (double tau : {0.1, 0.7}) {
      CHECK(mixture_kernel_eval(bank, {1, 0, 0}, tau) ==
            doctest::Approx(sm_kernel_eval(bank.densities[0], tau)));
      CHECK(mixture_kernel_eval(bank, {0, 0, 1}, tau) ==
            doctest::Approx(sm_kernel_eval(bank.densities[2], tau)));
    }
  }
  SUBCASE("identical densities collapse under any simplex weights") {
    KernelBank same;
    same.densities = {bank.densities[1], bank.densities[1], bank.densities[1]};
    Rng rng(2);
    auto z = simplex(rng, 3);
    CHECK(mixture_kernel_eval(same, z, 0.4) ==
          doctest::Approx(sm_kernel_eval(bank.densities[1], 0.4)));
  }
  SUBCASE("half-half averages two closed forms") {
    KernelBank two = make_kernel_bank(2, 2.0);
    const double want = 0.5 * sm_kernel_eval(two.densities[0], 1.0) +
                        0.5 * sm_kernel_eval(two.densities[1], 1.0);
    CHECK(mixture_kernel_eval(two, {0.5, 0.5}, 1.0) == doctest::Approx(want));
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(mixture_kernel_eval(bank, {1.0}, 0.0), ShapeError);
  }
}

TEST_CASE("gram_matrix") {
  auto rbf = rbf_kernel(1.0);
  SUBCASE("single point") {
    Eigen::MatrixXd g = gram_matrix(rbf, {0.7}, {0.7});
    CHECK(g.rows() == 1);
    CHECK(g(0, 0) == 1.0);
  }
  SUBCASE("symmetric for X == X'") {
    std::vector<double> x{0.1, 0.5, 1.2, 3.0};
    Eigen::MatrixXd g = gram_matrix(rbf, x, x);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("matches direct elementwise evaluation") {
    Rng rng(9);
    std::vector<double> x(3);
    for (auto& v : x) v = rng.uniform(0.0, 4.0);
    Eigen::MatrixXd g = gram_matrix(rbf, x, x);
    for (long i = 0; i < 3; ++i)
      for (long j = 0; j < 3; ++j) {
        const double d = x[i] - x[j];
        CHECK(g(i, j) == doctest::Approx(std::exp(-0.5 * d * d)).epsilon(1e-12));
      }
  }
  SUBCASE("escalating jitter succeeds on near-singular grams") {
    // two nearly identical inputs make the plain gram numerically singular
    std::vector<double> x{1.0, 1.0 + 1e-13, 2.0};
    auto llt = gram_cholesky(rbf, x, 1e-2);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("mixture gram positive definite with sigma_eps, 1000 trials") {
  Rng rng(31);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const long q = 1 + static_cast<long>(rng.below(5));
    KernelBank bank = make_kernel_bank(q, rng.uniform(0.5, 6.0));
    auto z = simplex(rng, q);
    const long n = 2 + static_cast<long>(rng.below(7));
    std::vector<double> x(static_cast<size_t>(n));
    for (auto& v : x) v = rng.uniform(0.0, 4.0);
    Eigen::MatrixXd g = gram_matrix(mixture_kernel(bank, z), x, x);
    g.diagonal().array() += bank.sigma_eps * bank.sigma_eps;
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) ++failures;
  }
  CHECK(failures <= 1);
}

TEST_CASE("data_kernel_eval appendix formulas") {
  SUBCASE("all families give 1 at x == x'") {
    CHECK(data_kernel_eval({DataKernelFamily::Rbf, 1.5}, 0.3, 0.3) == 1.0);
    CHECK(data_kernel_eval({DataKernelFamily::Matern52, 0.2}, 0.3, 0.3) == 1.0);
    CHECK(data_kernel_eval({DataKernelFamily::WeaklyPeriodic, 2.5}, 0.3, 0.3) ==
          1.0);
  }
  SUBCASE("Matern-5/2 at unit scaled distance") {
    const double want =
        (1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0));
    CHECK(data_kernel_eval({DataKernelFamily::Matern52, 1.0}, 1.0, 0.0) ==
          doctest::Approx(want).epsilon(1e-12));
    CHECK(want == doctest::Approx(0.5240).epsilon(1e-3));
  }
  SUBCASE("weakly periodic matches scalar oracle") {
    const double f = 2.0, x = 0.5, xp = 0.0;
    const double g1 = std::cos(2 * kPi * f * x) - std::cos(2 * kPi * f * xp);
    const double g2 = std::sin(2 * kPi * f * x) - std::sin(2 * kPi * f * xp);
    const double want =
        std::exp(-0.5 * g1 * g1 - 0.5 * g2 * g2 - (x - xp) * (x - xp) / 32.0);
    CHECK(data_kernel_eval({DataKernelFamily::WeaklyPeriodic, f}, x, xp) ==
          doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("wrong family") {
    CHECK_THROWS_AS(data_kernel_eval({DataKernelFamily::Mosm, 1.0}, 0.0, 1.0),
                    DomainError);
  }
}

TEST_CASE("mosm_cross_eval") {
  // paper parameters
  std::vector<MosmChannelParams> ch{
      {0.1, 0.1, 1.0, 0.0}, {3.0, 0.1, 1.0, 0.0}, {5.0, 0.1, 1.0, 0.0}};

  SUBCASE("diagonal with no delay/phase is 1 at x == x'") {
    std::vector<MosmChannelParams> plain{{2.0, 0.3, 0.0, 0.0}};
    CHECK(mosm_cross_eval(plain, 0, 0, 0.7, 0.7) == 1.0);
  }
  SUBCASE("matches independent scalar re-implementation") {
    Rng rng(13);
    for (int t = 0; t < 30; ++t) {
      const long i = static_cast<long>(rng.below(3));
      const long j = static_cast<long>(rng.below(3));
      const double x = rng.uniform(0.0, 3.0), xp = rng.uniform(0.0, 3.0);
      const auto &a = ch[i], &b = ch[j];
      const double mu_ij =
          (a.sigma * b.mu + b.sigma * a.mu) / (a.sigma + b.sigma);
      const double sig_ij = 2.0 * a.sigma * b.sigma / (a.sigma + b.sigma);
      const double arg = x - xp + (a.theta - b.theta);
      const double want = std::exp(-0.5 * arg * sig_ij * arg) *
                          std::cos(2 * kPi * arg * mu_ij + (a.phi - b.phi));
      CHECK(mosm_cross_eval(ch, i, j, x, xp) ==
            doctest::Approx(want).epsilon(1e-12));
    }
  }
  SUBCASE("cross symmetry k_ij(x,x') == k_ji(x',x)") {
    Rng rng(17);
    std::vector<MosmChannelParams> varied{
        {0.4, 0.2, 0.5, 0.1}, {1.7, 0.35, -0.3, 0.7}, {2.9, 0.15, 1.1, -0.4}};
    for (int t = 0; t < 30; ++t) {
      const long i = static_cast<long>(rng.below(3));
      const long j = static_cast<long>(rng.below(3));
      const double x = rng.uniform(-2.0, 2.0), xp = rng.uniform(-2.0, 2.0);
      CHECK(mosm_cross_eval(varied, i, j, x, xp) ==
            doctest::Approx(mosm_cross_eval(varied, j, i, xp, x))
                .epsilon(1e-12));
    }
  }
  SUBCASE("diagonal specializes to an SM-style kernel") {
    std::vector<MosmChannelParams> plain{{1.5, 0.25, 0.0, 0.0}};
    for (double tau : {0.0, 0.4, 1.3}) {
      const double want = std::exp(-0.5 * tau * 0.25 * tau) *
                          std::cos(2 * kPi * tau * 1.5);
      CHECK(mosm_cross_eval(plain, 0, 0, tau, 0.0) == doctest::Approx(want));
    }
  }
}

TEST_CASE("make_kernel_bank") {
  SUBCASE("Q=5, hz_max=5 per the appendix rule") {
    KernelBank bank = make_kernel_bank(5, 5.0);
    REQUIRE(bank.q_count() == 5);
    const std::vector<double> mu_want{0.0, 1.25, 2.5, 3.75, 5.0};
    for (long q = 0; q < 5; ++q) {
      CHECK(bank.densities[q].mu[0] == doctest::Approx(mu_want[q]));
      CHECK(std::sqrt(bank.densities[q].sigma2[0]) == doctest::Approx(0.625));
    }
    CHECK(bank.sigma_eps == 1e-2);
  }
  SUBCASE("Q=1 is a single zero-centred density") {
    KernelBank bank = make_kernel_bank(1, 4.0);
    REQUIRE(bank.q_count() == 1);
    CHECK(bank.densities[0].mu[0] == 0.0);
  }
  SUBCASE("ordering invariant holds for all Q") {
    for (long q = 1; q <= 8; ++q) {
      KernelBank bank = make_kernel_bank(q, 3.5);
      CHECK(bank.densities[0].mu[0] == 0.0);
      for (long i = 1; i < q; ++i)
        CHECK(bank.densities[i].mu[0] >= bank.densities[i - 1].mu[0]);
      for (long i = 0; i < q; ++i)
        CHECK(bank.densities[i].sigma2[0] > 0.0);
    }
  }
  SUBCASE("Q=0 rejected") {
    CHECK_THROWS_AS(make_kernel_bank(0, 1.0), ShapeError);
  }
}
