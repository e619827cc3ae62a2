#include "stnp/latent_prior.hpp"

#include <algorithm>
#include <cmath>

#include "stnp/convdeepsets.hpp"

namespace stnp {

CategoricalParams uniform_categorical(long q) {
  if (q < 1) throw ShapeError("uniform_categorical: Q must be >= 1");
  return CategoricalParams{
      std::vector<double>(static_cast<size_t>(q), 1.0 / static_cast<double>(q))};
}

void init_pnn_params(const PnnConfig& config, ParamStore& params, Rng& rng) {
  const long q = config.q;
  const long h = config.hidden;
  if (config.version == PnnVersion::V1Gridless) {
    params.create_random("pnn.mlp1.w1", {q + 1, h}, rng,
                         1.0 / std::sqrt(static_cast<double>(q + 1)));
    params.create("pnn.mlp1.b1", {h}, std::vector<double>(h, 0.0));
    params.create_random("pnn.mlp1.w2", {h, h}, rng,
                         1.0 / std::sqrt(static_cast<double>(h)));
    params.create("pnn.mlp1.b2", {h}, std::vector<double>(h, 0.0));
    for (long k = 0; k < config.channels; ++k) {
      const std::string head = "pnn.head" + std::to_string(k);
      params.create_random(head + ".w", {h, q}, rng,
                           1.0 / std::sqrt(static_cast<double>(h)));
      params.create(head + ".b", {q}, std::vector<double>(q, 0.0));
    }
  } else {
    params.create_random("pnn.conv1.w", {16, 1, 5}, rng, 1.0 / std::sqrt(5.0));
    params.create("pnn.conv1.b", {16}, std::vector<double>(16, 0.0));
    params.create_random("pnn.conv2.w", {16, 16, 5}, rng,
                         1.0 / std::sqrt(80.0));
    params.create("pnn.conv2.b", {16}, std::vector<double>(16, 0.0));
    for (long k = 0; k < config.channels; ++k) {
      const std::string head = "pnn.head" + std::to_string(k);
      params.create_random(head + ".w", {16, q}, rng, 0.25);
      params.create(head + ".b", {q}, std::vector<double>(q, 0.0));
    }
  }
}

namespace {

Tensor pool_rows(const Tensor& rows, PnnPooling pooling) {
  return pooling == PnnPooling::Sum ? sum(rows, 0) : mean(rows, 0);
}

Tensor v1_forward(const PnnConfig& config, const ParamStore& params,
                  const ContextSet& context, const Tensor& mu,
                  const Tensor& sigma2, long channel) {
  const long n = context.size();
  Tensor y = Tensor::from({n, 1}, context.y);
  Tensor tau = tau_matrix(context.x, context.x);
  std::vector<Tensor> cols;
  cols.reserve(static_cast<size_t>(config.q) + 1);
  for (long q = 0; q < config.q; ++q) {
    Tensor gram = sm_kernel_gram(select(mu, q), select(sigma2, q), tau);
    cols.push_back(matmul(gram, y));  // h_q at each context input
  }
  cols.push_back(y);
  Tensor feats = concat(cols, 1);  // [N, Q+1]
  Tensor hidden = relu(affine(feats, params.at("pnn.mlp1.w1"),
                              params.at("pnn.mlp1.b1")));
  hidden = relu(affine(hidden, params.at("pnn.mlp1.w2"),
                       params.at("pnn.mlp1.b2")));
  Tensor pooled = pool_rows(hidden, config.pooling);
  const std::string head = "pnn.head" + std::to_string(channel);
  Tensor logits = affine(pooled, params.at(head + ".w"), params.at(head + ".b"));
  return softmax_vec(logits);
}

Tensor v2_forward(const PnnConfig& config, const ParamStore& params,
                  const ContextSet& context, long channel, const Grid& grid) {
  auto channel_values = deterministic_data_channel(
      context, grid, rbf_kernel(config.v2_rbf_lengthscale));
  Tensor input = Tensor::from({1, grid.m}, std::move(channel_values));
  Tensor h = relu(conv1d(input, params.at("pnn.conv1.w"),
                         params.at("pnn.conv1.b"), 2));
  h = relu(conv1d(h, params.at("pnn.conv2.w"), params.at("pnn.conv2.b"), 2));
  Tensor pooled = pool_rows(transpose(h), PnnPooling::Mean);  // over grid cells
  const std::string head = "pnn.head" + std::to_string(channel);
  Tensor logits = affine(pooled, params.at(head + ".w"), params.at(head + ".b"));
  return softmax_vec(logits);
}

}  // namespace

Tensor pnn_forward_graph(const PnnConfig& config, const ParamStore& params,
                         const ContextSet& context, const Tensor& mu,
                         const Tensor& sigma2, long channel, const Grid* grid) {
  if (channel < 0 || channel >= config.channels)
    throw ShapeError("pnn_forward: channel index out of range");
  if (context.size() == 0) {
    // documented fallback: the amortized posterior over an empty context
    return Tensor::from({config.q},
                        uniform_categorical(config.q).probs);
  }
  ContextSet ctx = canonical_order(context);
  if (config.version == PnnVersion::V1Gridless)
    return v1_forward(config, params, ctx, mu, sigma2, channel);
  if (!grid)
    throw ShapeError("pnn_forward: version 2 requires a grid");
  return v2_forward(config, params, ctx, channel, *grid);
}

CategoricalParams pnn_forward(const PnnConfig& config, const ParamStore& params,
                              const ContextSet& context, const KernelBank& bank,
                              long channel, const Grid* grid) {
  if (bank.q_count() != config.q)
    throw ShapeError("pnn_forward: bank size does not match config Q");
  std::vector<double> mu_v, s2_v;
  for (const auto& d : bank.densities) {
    mu_v.push_back(d.mu[0]);
    s2_v.push_back(d.sigma2[0]);
  }
  Tensor mu = Tensor::from({bank.q_count()}, std::move(mu_v));
  Tensor sigma2 = Tensor::from({bank.q_count()}, std::move(s2_v));
  Tensor probs = pnn_forward_graph(config, params, context, mu, sigma2,
                                   channel, grid);
  return CategoricalParams{probs.values()};
}

std::vector<double> gumbel_softmax_sample(const CategoricalParams& p,
                                          double temperature, Rng& rng,
                                          bool hard) {
  if (temperature <= 0.0)
    throw DomainError("gumbel_softmax_sample: temperature must be positive");
  const size_t q = p.probs.size();
  std::vector<double> logits(q);
  for (size_t i = 0; i < q; ++i)
    logits[i] = (std::log(p.probs[i] + 1e-12) + rng.gumbel()) / temperature;
  const size_t arg = static_cast<size_t>(
      std::max_element(logits.begin(), logits.end()) - logits.begin());
  std::vector<double> z(q, 0.0);
  if (hard) {
    z[arg] = 1.0;
    return z;
  }
  const double m = logits[arg];
  double total = 0.0;
  for (size_t i = 0; i < q; ++i) {
    z[i] = std::exp(logits[i] - m);
    total += z[i];
  }
  for (auto& v : z) v /= total;
  return z;
}

double kl_categorical(const CategoricalParams& q, const CategoricalParams& p) {
  if (q.probs.size() != p.probs.size())
    throw ShapeError("kl_categorical: support size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < q.probs.size(); ++i) {
    const double qi = q.probs[i];
    if (qi <= 0.0) continue;  // 0 log 0 = 0
    acc += qi * (std::log(qi) - std::log(std::max(p.probs[i], 1e-12)));
  }
  return acc;
}

Tensor kl_categorical_graph(const Tensor& q, const std::vector<double>& p) {
  if (q.ndim() != 1 || q.dim(0) != static_cast<long>(p.size()))
    throw ShapeError("kl_categorical_graph: support size mismatch");
  std::vector<double> log_p(p.size());
  for (size_t i = 0; i < p.size(); ++i)
    log_p[i] = std::log(std::max(p[i], 1e-12));
  Tensor log_p_t = Tensor::from({q.dim(0)}, std::move(log_p));
  return sum(q * (log(q + 1e-12) - log_p_t));
}

}  // namespace stnp
