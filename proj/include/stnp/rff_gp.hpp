#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "stnp/kernels.hpp"
#include "stnp/rng.hpp"

namespace stnp {

// One set of observed input/output pairs on a single channel.
struct ContextSet {
  std::vector<double> x;
  std::vector<double> y;

  long size() const { return static_cast<long>(x.size()); }
};

// Sampled random Fourier features realizing one stationary prior function
// per basis kernel: phi_q(x) = sqrt(2/l) sum_i w_qi cos(2 pi s_qi x + b_qi).
// freq_eps holds the standard-normal draws behind s = mu + sigma * eps so a
// graph can rebuild the frequencies from live kernel parameters.
struct RffPrior {
  std::vector<std::vector<double>> weights;   // w ~ N(0, 1)
  std::vector<std::vector<double>> freq_eps;  // eps ~ N(0, 1)
  std::vector<std::vector<double>> freqs;     // s = mu_q + sigma_q * eps
  std::vector<std::vector<double>> phases;    // b ~ U[0, 2 pi)
  long l_spec = 0;

  long q_count() const { return static_cast<long>(weights.size()); }
};

RffPrior sample_rff_prior(const KernelBank& bank, long l_spec, Rng& rng);

// phi_q at a single input.
double eval_rff_basis(const RffPrior& prior, long q, double x);

// Prior term of the random data representation: sum_q sqrt(z_q) phi_q(x).
double eval_rff_prior(const RffPrior& prior, const std::vector<double>& z,
                      double x);
std::vector<double> eval_rff_prior(const RffPrior& prior,
                                   const std::vector<double>& z,
                                   const std::vector<double>& xs);

// Smoothing weights for a fixed context and expected kernel; factors the
// gram once so repeated samples reuse it.
class PathwiseSampler {
 public:
  PathwiseSampler(ContextSet context, const KernelBank& bank,
                  std::vector<double> probs);

  // One path-wise posterior function sample evaluated at `query`:
  // prior term + sum_n v_n kbar(. - x_n), v = (K + sigma_eps^2 I)^{-1}(y - Psi).
  std::vector<double> sample(const RffPrior& prior, const std::vector<double>& z,
                             const std::vector<double>& query) const;

  const ContextSet& context() const { return context_; }

 private:
  ContextSet context_;
  KernelFn kernel_;
  std::optional<Eigen::LLT<Eigen::MatrixXd>> llt_;  // empty when N^c == 0
};

// One-shot convenience wrapper over PathwiseSampler.
std::vector<double> pathwise_posterior_sample(const ContextSet& context,
                                              const KernelBank& bank,
                                              const std::vector<double>& probs,
                                              const RffPrior& prior,
                                              const std::vector<double>& z,
                                              const std::vector<double>& query);

struct GpPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Exact GP regression posterior via Cholesky; the oracle for path-wise
// sampling and the engine behind the tempered-posterior marginals.
GpPosterior exact_gp_posterior(const ContextSet& context, const KernelFn& kernel,
                               double sigma_eps,
                               const std::vector<double>& query);

struct EmpiricalStats {
  std::vector<double> mean;
  std::vector<double> variance;  // unbiased, floored at 1e-8
};

EmpiricalStats empirical_posterior_stats(
    const std::vector<std::vector<double>>& samples);

// Scalable surrogate for the path-wise representation on a grid:
//   alpha * prior + filter (*) (data_delta - alpha * prior)
// with zero-padded convolution. `values` is the data-delta channel (y summed
// into nearest cells), `indicator` its occupancy counts (carried for callers
// that feed both; the formula itself only needs the values).
std::vector<double> approx_random_representation(
    const std::vector<double>& indicator, const std::vector<double>& values,
    const std::vector<double>& prior, double alpha,
    const std::vector<double>& filter);

// Filter taps k(j * spacing) for j in [-half_width, half_width].
std::vector<double> truncated_kernel_filter(const KernelFn& kernel,
                                            double spacing, long half_width);

// Default truncation: 3 envelope lengthscales of the narrowest bank density,
// lambda = 1 / (2 pi sigma_min).
long default_filter_half_width(const KernelBank& bank, double spacing);

}  // namespace stnp
