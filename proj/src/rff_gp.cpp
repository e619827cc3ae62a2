#include "stnp/rff_gp.hpp"

#include <cmath>
#include <numbers>

namespace stnp {

namespace {
constexpr double kPi = std::numbers::pi;
}

RffPrior sample_rff_prior(const KernelBank& bank, long l_spec, Rng& rng) {
  if (l_spec < 1) throw ShapeError("sample_rff_prior: l_spec must be >= 1");
  RffPrior prior;
  prior.l_spec = l_spec;
  const long q_count = bank.q_count();
  prior.weights.resize(q_count);
  prior.freq_eps.resize(q_count);
  prior.freqs.resize(q_count);
  prior.phases.resize(q_count);
  for (long q = 0; q < q_count; ++q) {
    const auto& d = bank.densities[static_cast<size_t>(q)];
    const double sigma = std::sqrt(d.sigma2[0]);
    auto& w = prior.weights[static_cast<size_t>(q)];
    auto& e = prior.freq_eps[static_cast<size_t>(q)];
    auto& s = prior.freqs[static_cast<size_t>(q)];
    auto& b = prior.phases[static_cast<size_t>(q)];
    w.resize(static_cast<size_t>(l_spec));
    e.resize(static_cast<size_t>(l_spec));
    s.resize(static_cast<size_t>(l_spec));
    b.resize(static_cast<size_t>(l_spec));
    for (long i = 0; i < l_spec; ++i) {
      w[static_cast<size_t>(i)] = rng.normal();
      e[static_cast<size_t>(i)] = rng.normal();
      s[static_cast<size_t>(i)] = d.mu[0] + sigma * e[static_cast<size_t>(i)];
      b[static_cast<size_t>(i)] = rng.uniform(0.0, 2.0 * kPi);
    }
  }
  return prior;
}

double eval_rff_basis(const RffPrior& prior, long q, double x) {
  const auto& w = prior.weights[static_cast<size_t>(q)];
  const auto& s = prior.freqs[static_cast<size_t>(q)];
  const auto& b = prior.phases[static_cast<size_t>(q)];
  double acc = 0.0;
  for (size_t i = 0; i < w.size(); ++i)
    acc += w[i] * std::cos(2.0 * kPi * s[i] * x + b[i]);
  return std::sqrt(2.0 / static_cast<double>(prior.l_spec)) * acc;
}

double eval_rff_prior(const RffPrior& prior, const std::vector<double>& z,
                      double x) {
  if (static_cast<long>(z.size()) != prior.q_count())
    throw ShapeError("eval_rff_prior: weight count " +
                     std::to_string(z.size()) + " does not match bases " +
                     std::to_string(prior.q_count()));
  double acc = 0.0;
  for (size_t q = 0; q < z.size(); ++q) {
    if (z[q] < 0.0)
      throw DomainError("eval_rff_prior: negative mixture weight");
    if (z[q] == 0.0) continue;
    acc += std::sqrt(z[q]) * eval_rff_basis(prior, static_cast<long>(q), x);
  }
  return acc;
}

std::vector<double> eval_rff_prior(const RffPrior& prior,
                                   const std::vector<double>& z,
                                   const std::vector<double>& xs) {
  std::vector<double> out(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) out[i] = eval_rff_prior(prior, z, xs[i]);
  return out;
}

PathwiseSampler::PathwiseSampler(ContextSet context, const KernelBank& bank,
                                 std::vector<double> probs)
    : context_(std::move(context)),
      kernel_(mixture_kernel(bank, std::move(probs))) {
  if (context_.x.size() != context_.y.size())
    throw ShapeError("PathwiseSampler: context x/y length mismatch");
  if (context_.size() > 0)
    llt_ = gram_cholesky(kernel_, context_.x, bank.sigma_eps);
}

std::vector<double> PathwiseSampler::sample(
    const RffPrior& prior, const std::vector<double>& z,
    const std::vector<double>& query) const {
  std::vector<double> out = eval_rff_prior(prior, z, query);
  const long n = context_.size();
  if (n == 0) return out;  // empty update sum: pure prior

  Eigen::VectorXd residual(n);
  for (long i = 0; i < n; ++i)
    residual(i) = context_.y[static_cast<size_t>(i)] -
                  eval_rff_prior(prior, z, context_.x[static_cast<size_t>(i)]);
  Eigen::VectorXd v = llt_->solve(residual);
  for (size_t j = 0; j < query.size(); ++j) {
    double acc = 0.0;
    for (long i = 0; i < n; ++i)
      acc += v(i) * kernel_(query[j] - context_.x[static_cast<size_t>(i)]);
    out[j] += acc;
  }
  return out;
}

std::vector<double> pathwise_posterior_sample(const ContextSet& context,
                                              const KernelBank& bank,
                                              const std::vector<double>& probs,
                                              const RffPrior& prior,
                                              const std::vector<double>& z,
                                              const std::vector<double>& query) {
  return PathwiseSampler(context, bank, probs).sample(prior, z, query);
}

GpPosterior exact_gp_posterior(const ContextSet& context, const KernelFn& kernel,
                               double sigma_eps,
                               const std::vector<double>& query) {
  const long n = context.size();
  if (n < 1) throw ShapeError("exact_gp_posterior: empty context");
  auto llt = gram_cholesky(kernel, context.x, sigma_eps);
  Eigen::VectorXd y(n);
  for (long i = 0; i < n; ++i) y(i) = context.y[static_cast<size_t>(i)];
  Eigen::MatrixXd k_star = gram_matrix(kernel, query, context.x);
  Eigen::MatrixXd k_qq = gram_matrix(kernel, query, query);

  GpPosterior post;
  post.mean = k_star * llt.solve(y);
  post.cov = k_qq - k_star * llt.solve(k_star.transpose());
  return post;
}

EmpiricalStats empirical_posterior_stats(
    const std::vector<std::vector<double>>& samples) {
  const long n = static_cast<long>(samples.size());
  if (n < 2)
    throw ShapeError("empirical_posterior_stats: need at least 2 samples");
  const size_t width = samples[0].size();
  for (const auto& s : samples)
    if (s.size() != width)
      throw ShapeError("empirical_posterior_stats: ragged sample widths");

  EmpiricalStats stats;
  stats.mean.assign(width, 0.0);
  stats.variance.assign(width, 0.0);
  for (const auto& s : samples)
    for (size_t j = 0; j < width; ++j) stats.mean[j] += s[j];
  for (auto& m : stats.mean) m /= static_cast<double>(n);
  for (const auto& s : samples)
    for (size_t j = 0; j < width; ++j) {
      const double d = s[j] - stats.mean[j];
      stats.variance[j] += d * d;
    }
  for (auto& v : stats.variance) {
    v /= static_cast<double>(n - 1);
    if (v < 1e-8) v = 1e-8;
  }
  return stats;
}

std::vector<double> approx_random_representation(
    const std::vector<double>& indicator, const std::vector<double>& values,
    const std::vector<double>& prior, double alpha,
    const std::vector<double>& filter) {
  (void)indicator;
  if (alpha <= 0.0 || alpha >= 1.0)
    throw DomainError("approx_random_representation: alpha must be in (0,1)");
  if (filter.size() % 2 == 0)
    throw ShapeError("approx_random_representation: filter length must be odd");
  const long m = static_cast<long>(prior.size());
  if (static_cast<long>(values.size()) != m)
    throw ShapeError("approx_random_representation: grid size mismatch");
  if (static_cast<long>(filter.size()) > m)
    throw ShapeError("approx_random_representation: filter longer than grid");

  std::vector<double> residual(static_cast<size_t>(m));
  for (long i = 0; i < m; ++i)
    residual[static_cast<size_t>(i)] =
        values[static_cast<size_t>(i)] - alpha * prior[static_cast<size_t>(i)];

  const long half = (static_cast<long>(filter.size()) - 1) / 2;
  std::vector<double> out(static_cast<size_t>(m));
  for (long i = 0; i < m; ++i) {
    double acc = 0.0;
    const long j0 = std::max<long>(-half, -i);
    const long j1 = std::min<long>(half, m - 1 - i);
    for (long j = j0; j <= j1; ++j)
      acc += filter[static_cast<size_t>(half + j)] *
             residual[static_cast<size_t>(i + j)];
    out[static_cast<size_t>(i)] =
        alpha * prior[static_cast<size_t>(i)] + acc;
  }
  return out;
}

std::vector<double> truncated_kernel_filter(const KernelFn& kernel,
                                            double spacing, long half_width) {
  if (half_width < 0) throw ShapeError("truncated_kernel_filter: negative width");
  std::vector<double> taps(static_cast<size_t>(2 * half_width + 1));
  for (long j = -half_width; j <= half_width; ++j)
    taps[static_cast<size_t>(j + half_width)] =
        kernel(static_cast<double>(j) * spacing);
  return taps;
}

long default_filter_half_width(const KernelBank& bank, double spacing) {
  double sigma_min = std::sqrt(bank.densities[0].sigma2[0]);
  for (const auto& d : bank.densities)
    sigma_min = std::min(sigma_min, std::sqrt(d.sigma2[0]));
  const double lambda = 1.0 / (2.0 * kPi * sigma_min);
  return static_cast<long>(std::ceil(3.0 * lambda / spacing));
}

}  // namespace stnp
