#include "stnp/kernels.hpp"

#include <cmath>
#include <numbers>

namespace stnp {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPiSq = 2.0 * kPi * kPi;
}  // namespace

double sm_kernel_eval(const SpectralDensity& density,
                      const std::vector<double>& tau) {
  if (tau.size() != density.mu.size())
    throw ShapeError("sm_kernel_eval: tau dimension " +
                     std::to_string(tau.size()) + " does not match density " +
                     std::to_string(density.mu.size()));
  double quad = 0.0, phase = 0.0;
  for (size_t d = 0; d < tau.size(); ++d) {
    quad += tau[d] * density.sigma2[d] * tau[d];
    phase += density.mu[d] * tau[d];
  }
  return std::exp(-kTwoPiSq * quad) * std::cos(2.0 * kPi * phase);
}

double sm_kernel_eval(const SpectralDensity& density, double tau) {
  return std::exp(-kTwoPiSq * tau * density.sigma2[0] * tau) *
         std::cos(2.0 * kPi * density.mu[0] * tau);
}

double mixture_kernel_eval(const KernelBank& bank,
                           const std::vector<double>& weights, double tau) {
  if (static_cast<long>(weights.size()) != bank.q_count())
    throw ShapeError("mixture_kernel_eval: " + std::to_string(weights.size()) +
                     " weights for a bank of " + std::to_string(bank.q_count()) +
                     " kernels");
  double acc = 0.0;
  for (size_t q = 0; q < weights.size(); ++q)
    acc += weights[q] * sm_kernel_eval(bank.densities[q], tau);
  return acc;
}

KernelFn mixture_kernel(const KernelBank& bank, std::vector<double> weights) {
  if (static_cast<long>(weights.size()) != bank.q_count())
    throw ShapeError("mixture_kernel: weight/bank size mismatch");
  return [bank, weights = std::move(weights)](double tau) {
    double acc = 0.0;
    for (size_t q = 0; q < weights.size(); ++q)
      acc += weights[q] * sm_kernel_eval(bank.densities[q], tau);
    return acc;
  };
}

KernelFn rbf_kernel(double lengthscale) {
  if (lengthscale <= 0.0) throw DomainError("rbf_kernel: lengthscale <= 0");
  const double inv2l2 = 0.5 / (lengthscale * lengthscale);
  return [inv2l2](double tau) { return std::exp(-tau * tau * inv2l2); };
}

Eigen::MatrixXd gram_matrix(const KernelFn& kernel,
                            const std::vector<double>& x,
                            const std::vector<double>& x_prime,
                            double jitter) {
  const long n = static_cast<long>(x.size());
  const long m = static_cast<long>(x_prime.size());
  Eigen::MatrixXd g(n, m);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j)
      g(i, j) = kernel(x[static_cast<size_t>(i)] - x_prime[static_cast<size_t>(j)]);
  if (jitter > 0.0 && n == m)
    g.diagonal().array() += jitter;
  return g;
}

Eigen::LLT<Eigen::MatrixXd> gram_cholesky(const KernelFn& kernel,
                                          const std::vector<double>& x,
                                          double sigma_eps) {
  Eigen::MatrixXd g = gram_matrix(kernel, x, x);
  g.diagonal().array() += sigma_eps * sigma_eps;
  for (double jitter = 0.0; jitter <= 1.1e-6;
       jitter = (jitter == 0.0 ? 1e-10 : jitter * 10.0)) {
    Eigen::MatrixXd a = g;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NumericalError(
      "gram_cholesky: factorization failed after jitter escalation to 1e-6");
}

double data_kernel_eval(const DataKernelSpec& spec, double x, double x_prime) {
  const double tau = x - x_prime;
  switch (spec.family) {
    case DataKernelFamily::Rbf: {
      const double z = tau / spec.lengthscale;
      return std::exp(-0.5 * z * z);
    }
    case DataKernelFamily::Matern52: {
      const double d = std::abs(tau / spec.lengthscale);
      const double s5d = std::sqrt(5.0) * d;
      return (1.0 + s5d + (5.0 / 3.0) * d * d) * std::exp(-s5d);
    }
    case DataKernelFamily::WeaklyPeriodic: {
      const double f = spec.lengthscale;  // frequency parameter
      const double g1 = std::cos(2.0 * kPi * f * x) - std::cos(2.0 * kPi * f * x_prime);
      const double g2 = std::sin(2.0 * kPi * f * x) - std::sin(2.0 * kPi * f * x_prime);
      return std::exp(-0.5 * g1 * g1 - 0.5 * g2 * g2 - tau * tau / 32.0);
    }
    case DataKernelFamily::Mosm:
      throw DomainError(
          "data_kernel_eval: MOSM is cross-channel, use mosm_cross_eval");
  }
  throw DomainError("data_kernel_eval: unknown family");
}

double mosm_cross_eval(const std::vector<MosmChannelParams>& channels, long i,
                       long j, double x, double x_prime) {
  if (i < 0 || j < 0 || i >= static_cast<long>(channels.size()) ||
      j >= static_cast<long>(channels.size()))
    throw ShapeError("mosm_cross_eval: channel index out of range");
  const auto& a = channels[static_cast<size_t>(i)];
  const auto& b = channels[static_cast<size_t>(j)];
  if (a.sigma <= 0.0 || b.sigma <= 0.0)
    throw DomainError("mosm_cross_eval: Sigma must be positive");
  const double sum = a.sigma + b.sigma;
  const double mu_ij = (a.sigma * b.mu + b.sigma * a.mu) / sum;
  const double sigma_ij = 2.0 * a.sigma * b.sigma / sum;
  const double theta_ij = a.theta - b.theta;
  const double phi_ij = a.phi - b.phi;
  const double t = x - x_prime + theta_ij;
  return std::exp(-0.5 * t * sigma_ij * t) *
         std::cos(2.0 * kPi * t * mu_ij + phi_ij);
}

KernelBank make_kernel_bank(long q, double hz_max) {
  if (q < 1) throw ShapeError("make_kernel_bank: Q must be >= 1");
  if (hz_max <= 0.0) throw DomainError("make_kernel_bank: hz_max must be > 0");
  KernelBank bank;
  const double spacing = q > 1 ? hz_max / static_cast<double>(q - 1) : hz_max;
  const double sigma = 0.5 * spacing;
  for (long i = 0; i < q; ++i) {
    SpectralDensity d;
    d.mu = {q > 1 ? spacing * static_cast<double>(i) : 0.0};
    d.sigma2 = {sigma * sigma};
    bank.densities.push_back(std::move(d));
  }
  bank.sigma_eps = 1e-2;
  return bank;
}

}  // namespace stnp
