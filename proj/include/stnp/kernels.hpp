#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "stnp/common.hpp"

namespace stnp {

// Gaussian spectral density N(s; mu, Diag(sigma2)) on the frequency domain.
// Its Fourier transform (real part) is the stationary basis kernel
//   k(tau) = exp(-2 pi^2 tau' Sigma tau) cos(2 pi mu' tau),  k(0) = 1.
struct SpectralDensity {
  std::vector<double> mu;      // cycles per input unit
  std::vector<double> sigma2;  // per-dimension variance (diagonal Sigma)
};

// Ordered bank of Q basis kernels, mu_1 = 0 and mu nondecreasing.
struct KernelBank {
  std::vector<SpectralDensity> densities;
  double sigma_eps = 1e-2;  // observation noise standard deviation

  long q_count() const { return static_cast<long>(densities.size()); }
};

enum class DataKernelFamily { Rbf, Matern52, WeaklyPeriodic, Mosm };

// Generator-side kernels (Appendix-style formulas); `lengthscale` doubles as
// the frequency parameter f for the weakly periodic family.
struct DataKernelSpec {
  DataKernelFamily family = DataKernelFamily::Rbf;
  double lengthscale = 1.0;
};

// Per-channel MOSM parameters (1-d inputs).
struct MosmChannelParams {
  double mu = 0.0;
  double sigma = 0.1;   // "covariance parameter" Sigma_i, used directly
  double theta = 0.0;   // delay
  double phi = 0.0;     // phase
};

using KernelFn = std::function<double(double)>;  // k(tau) for 1-d inputs

double sm_kernel_eval(const SpectralDensity& density,
                      const std::vector<double>& tau);
double sm_kernel_eval(const SpectralDensity& density, double tau);

double mixture_kernel_eval(const KernelBank& bank,
                           const std::vector<double>& weights, double tau);

KernelFn mixture_kernel(const KernelBank& bank, std::vector<double> weights);
KernelFn rbf_kernel(double lengthscale);

// G[i][j] = k(x_i - x'_j); `jitter` is added on the diagonal when the two
// input sets have equal length (the symmetric case).
Eigen::MatrixXd gram_matrix(const KernelFn& kernel,
                            const std::vector<double>& x,
                            const std::vector<double>& x_prime,
                            double jitter = 0.0);

// Cholesky of G + (sigma_eps^2 + jitter) I with jitter escalating
// 1e-10 -> 1e-6 (x10); throws NumericalError if all levels fail.
Eigen::LLT<Eigen::MatrixXd> gram_cholesky(const KernelFn& kernel,
                                          const std::vector<double>& x,
                                          double sigma_eps);

double data_kernel_eval(const DataKernelSpec& spec, double x, double x_prime);

double mosm_cross_eval(const std::vector<MosmChannelParams>& channels, long i,
                       long j, double x, double x_prime);

// mu_q linearly spaced on [0, hz_max], sigma_q = 0.5 (mu_2 - mu_1)
// (0.5 hz_max when Q == 1), sigma_eps = 1e-2.
KernelBank make_kernel_bank(long q, double hz_max);

}  // namespace stnp
