#include "stnp/graph.hpp"

#include <cmath>
#include <numbers>

namespace stnp {

namespace {
constexpr double kPi = std::numbers::pi;
}

Tensor tau_matrix(const std::vector<double>& a, const std::vector<double>& b) {
  const long n = static_cast<long>(a.size());
  const long m = static_cast<long>(b.size());
  std::vector<double> v(static_cast<size_t>(n * m));
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j)
      v[static_cast<size_t>(i * m + j)] =
          a[static_cast<size_t>(i)] - b[static_cast<size_t>(j)];
  return Tensor::from({n, m}, std::move(v));
}

Tensor sm_kernel_gram(const Tensor& mu_q, const Tensor& sigma2_q,
                      const Tensor& tau) {
  Tensor tau2 = square(tau);
  Tensor envelope = exp((-2.0 * kPi * kPi) * (sigma2_q * tau2));
  Tensor phase = cos((2.0 * kPi) * (mu_q * tau));
  return envelope * phase;
}

Tensor mixture_gram(const Tensor& mu, const Tensor& sigma2, const Tensor& probs,
                    const Tensor& tau) {
  if (mu.ndim() != 1 || sigma2.ndim() != 1 || probs.ndim() != 1)
    throw ShapeError("mixture_gram: mu/sigma2/probs must be rank-1");
  const long q_count = mu.dim(0);
  if (sigma2.dim(0) != q_count || probs.dim(0) != q_count)
    throw ShapeError("mixture_gram: parameter lengths disagree");
  Tensor acc;
  for (long q = 0; q < q_count; ++q) {
    Tensor term = select(probs, q) *
                  sm_kernel_gram(select(mu, q), select(sigma2, q), tau);
    acc = (q == 0) ? term : acc + term;
  }
  return acc;
}

Tensor rff_basis_values(const Tensor& mu_q, const Tensor& sigma2_q,
                        const RffPrior& prior, long q,
                        const std::vector<double>& xs) {
  const long l = prior.l_spec;
  const long m = static_cast<long>(xs.size());
  Tensor eps = Tensor::from({l}, prior.freq_eps[static_cast<size_t>(q)]);
  Tensor b = Tensor::from({l}, prior.phases[static_cast<size_t>(q)]);
  Tensor w = Tensor::from({l, 1}, prior.weights[static_cast<size_t>(q)]);
  Tensor s = mu_q + sqrt(sigma2_q) * eps;  // [l]
  Tensor x_col = Tensor::from({m, 1}, xs);
  Tensor phase = (2.0 * kPi) * matmul(x_col, reshape(s, {1, l})) + b;  // [m, l]
  Tensor feats = cos(phase);
  Tensor out = matmul(feats, w);  // [m, 1]
  return std::sqrt(2.0 / static_cast<double>(l)) * reshape(out, {m});
}

Tensor rff_prior_values(const Tensor& mu, const Tensor& sigma2, const Tensor& z,
                        const RffPrior& prior, const std::vector<double>& xs) {
  const long q_count = prior.q_count();
  Tensor acc;
  for (long q = 0; q < q_count; ++q) {
    Tensor term = sqrt(select(z, q)) *
                  rff_basis_values(select(mu, q), select(sigma2, q), prior, q, xs);
    acc = (q == 0) ? term : acc + term;
  }
  return acc;
}

Tensor softmax_vec(const Tensor& logits) {
  if (logits.ndim() != 1) throw ShapeError("softmax_vec: expected rank-1");
  return exp(logits - log_sum_exp(logits));
}

Tensor gumbel_softmax_graph(const Tensor& probs,
                            const std::vector<double>& gumbel_noise,
                            double temperature) {
  if (temperature <= 0.0)
    throw DomainError("gumbel_softmax: temperature must be positive");
  if (probs.ndim() != 1 ||
      probs.dim(0) != static_cast<long>(gumbel_noise.size()))
    throw ShapeError("gumbel_softmax: probs/noise length mismatch");
  Tensor g = Tensor::from({probs.dim(0)}, gumbel_noise);
  Tensor logits = (log(probs + 1e-12) + g) / temperature;
  return softmax_vec(logits);
}

Tensor gaussian_log_density_sum(const std::vector<double>& y, const Tensor& mu,
                                const Tensor& sigma) {
  const long n = static_cast<long>(y.size());
  if (mu.ndim() != 1 || mu.dim(0) != n || sigma.ndim() != 1 ||
      sigma.dim(0) != n)
    throw ShapeError("gaussian_log_density_sum: length mismatch");
  Tensor yt = Tensor::from({n}, y);
  Tensor zscore = (yt - mu) / sigma;
  Tensor terms =
      -0.5 * square(zscore) - log(sigma) - 0.5 * std::log(2.0 * kPi);
  return sum(terms);
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
  std::vector<Tensor> rows;
  rows.reserve(scalars.size());
  for (const auto& s : scalars) rows.push_back(reshape(s, {1}));
  return concat(rows, 0);
}

}  // namespace stnp
