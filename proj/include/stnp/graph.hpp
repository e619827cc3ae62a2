#pragma once

#include <vector>

#include "stnp/rff_gp.hpp"
#include "stnp/tensor.hpp"

namespace stnp {

// Tensor-graph builders over live kernel parameters. These mirror the plain
// evaluators in kernels.hpp / rff_gp.hpp so the training loss can reach
// mu_q and Sigma_q through the representation.

// Constant matrix of pairwise differences a_i - b_j.
Tensor tau_matrix(const std::vector<double>& a, const std::vector<double>& b);

// exp(-2 pi^2 sigma2 tau^2) cos(2 pi mu tau), elementwise over a constant
// tau tensor; mu/sigma2 are scalar tensors.
Tensor sm_kernel_gram(const Tensor& mu_q, const Tensor& sigma2_q,
                      const Tensor& tau);

// sum_q probs[q] * k_q over a constant tau tensor; mu/sigma2/probs are [Q].
Tensor mixture_gram(const Tensor& mu, const Tensor& sigma2, const Tensor& probs,
                    const Tensor& tau);

// phi_q at constant inputs xs, rebuilt from live (mu_q, sigma2_q) and the
// frozen draws of an RffPrior: s_i = mu + sqrt(sigma2) eps_i.
Tensor rff_basis_values(const Tensor& mu_q, const Tensor& sigma2_q,
                        const RffPrior& prior, long q,
                        const std::vector<double>& xs);

// Prior term sum_q sqrt(z_q) phi_q(xs) with z a [Q] tensor.
Tensor rff_prior_values(const Tensor& mu, const Tensor& sigma2, const Tensor& z,
                        const RffPrior& prior, const std::vector<double>& xs);

// exp(x - log_sum_exp(x)) for a vector of logits.
Tensor softmax_vec(const Tensor& logits);

// Gumbel-softmax with frozen noise: softmax((log(p + 1e-12) + g) / T).
Tensor gumbel_softmax_graph(const Tensor& probs,
                            const std::vector<double>& gumbel_noise,
                            double temperature);

// sum_i log N(y_i; mu_i, sigma_i^2); y constant, mu/sigma [N] tensors.
Tensor gaussian_log_density_sum(const std::vector<double>& y, const Tensor& mu,
                                const Tensor& sigma);

// [N] tensor from N scalar tensors.
Tensor stack_scalars(const std::vector<Tensor>& scalars);

}  // namespace stnp
