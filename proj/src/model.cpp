#include "stnp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "stnp/graph.hpp"

namespace stnp {

namespace {
constexpr double kPi = std::numbers::pi;

struct ConvSpec {
  long in, out;
};

std::vector<ConvSpec> decoder_layout(DecoderKind kind, long features) {
  if (kind == DecoderKind::Shallow)
    return {{features, 16}, {16, 16}, {16, 16}, {16, 16}, {16, features}};
  return {{features, 16}, {16, 32},   {32, 64},   {64, 128},
          {128, 256},     {256, 512}, {512, 256}, {512, 128},
          {256, 64},      {128, 32},  {64, 16},   {32, features}};
}

// layer index -> earlier activation concatenated ahead of the previous one
long deep_skip_source(long layer) {
  switch (layer) {
    case 7: return 4;   // L8 <- [L5, L7]
    case 8: return 3;   // L9 <- [L4, L8]
    case 9: return 2;   // L10 <- [L3, L9]
    case 10: return 1;  // L11 <- [L2, L10]
    case 11: return 0;  // L12 <- [L1, L11]
    default: return -1;
  }
}

Tensor constant_vector(const std::vector<double>& v) {
  return Tensor::from({static_cast<long>(v.size())}, v);
}

KernelBank gpconvcnp_bank(const ModelConfig& config) {
  // single density whose Bochner transform is exactly the RBF with the
  // configured lengthscale: sigma2 = 1 / (4 pi^2 l^2)
  KernelBank bank;
  const double l = config.gpconvcnp_lengthscale;
  bank.densities.push_back(
      SpectralDensity{{0.0}, {1.0 / (4.0 * kPi * kPi * l * l)}});
  bank.sigma_eps = config.sigma_eps;
  return bank;
}

}  // namespace

std::string variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::Bayes: return "bayes";
    case ModelVariant::ConvCnp: return "convcnp";
    case ModelVariant::GpConvCnp: return "gpconvcnp";
  }
  return "bayes";
}

ModelVariant variant_from_name(const std::string& name) {
  if (name == "bayes") return ModelVariant::Bayes;
  if (name == "convcnp") return ModelVariant::ConvCnp;
  if (name == "gpconvcnp") return ModelVariant::GpConvCnp;
  throw ConfigError("unknown variant '" + name + "'");
}

void ModelConfig::resolve() {
  if (q < 1) throw ConfigError("ModelConfig: Q must be >= 1");
  if (channels < 1) throw ConfigError("ModelConfig: channels must be >= 1");
  if (n_samples < 1) throw ConfigError("ModelConfig: N must be >= 1");
  if (variant == ModelVariant::ConvCnp) {
    n_samples = 1;
  } else if (variant == ModelVariant::GpConvCnp) {
    q = 1;
    train_kernel = false;
  }
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.resolve();
}

void Model::init_params(Rng& rng) {
  const ModelConfig& c = config_;
  params_ = ParamStore{};

  if (c.variant == ModelVariant::Bayes) {
    KernelBank bank0 = make_kernel_bank(c.q, c.hz_max);
    std::vector<double> mu, log_s2;
    for (const auto& d : bank0.densities) {
      mu.push_back(d.mu[0]);
      log_s2.push_back(std::log(d.sigma2[0]));
    }
    params_.create("kernel.mu", {c.q}, std::move(mu))
        .set_requires_grad(c.train_kernel);
    params_.create("kernel.log_sigma2", {c.q}, std::move(log_s2))
        .set_requires_grad(c.train_kernel);

    PnnConfig pnn;
    pnn.version = c.pnn_version;
    pnn.q = c.q;
    pnn.channels = c.channels;
    pnn.pooling = c.pnn_version == PnnVersion::V2Grid ? PnnPooling::Mean
                                                      : PnnPooling::Sum;
    init_pnn_params(pnn, params_, rng);
  }

  const long rep_channels = 2 * c.channels;
  params_.create_random("dec.embed.w", {c.decoder_features, rep_channels, 1},
                        rng, std::sqrt(2.0 / static_cast<double>(rep_channels)));
  params_.create("dec.embed.b", {c.decoder_features},
                 std::vector<double>(c.decoder_features, 0.0));
  auto layout = decoder_layout(c.decoder, c.decoder_features);
  for (size_t i = 0; i < layout.size(); ++i) {
    const std::string name = "dec.l" + std::to_string(i);
    const double scale = std::sqrt(2.0 / static_cast<double>(layout[i].in * 5));
    params_.create_random(name + ".w", {layout[i].out, layout[i].in, 5}, rng,
                          scale);
    params_.create(name + ".b", {layout[i].out},
                   std::vector<double>(layout[i].out, 0.0));
  }

  params_.create_random("head.w1", {c.decoder_features, c.head_hidden}, rng,
                        std::sqrt(2.0 / static_cast<double>(c.decoder_features)));
  params_.create("head.b1", {c.head_hidden},
                 std::vector<double>(c.head_hidden, 0.0));
  for (long k = 0; k < c.channels; ++k) {
    const std::string mu_name = "head.mu" + std::to_string(k);
    const std::string sg_name = "head.sigma" + std::to_string(k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(c.head_hidden));
    params_.create_random(mu_name + ".w", {c.head_hidden, 1}, rng, scale);
    params_.create(mu_name + ".b", {1}, {0.0});
    params_.create_random(sg_name + ".w", {c.head_hidden, 1}, rng, scale);
    params_.create(sg_name + ".b", {1}, {0.0});
  }
}

KernelBank Model::bank() const {
  if (config_.variant == ModelVariant::GpConvCnp) return gpconvcnp_bank(config_);
  if (config_.variant == ModelVariant::ConvCnp)
    return make_kernel_bank(config_.q, config_.hz_max);
  KernelBank bank;
  const auto& mu = params_.at("kernel.mu").values();
  const auto& log_s2 = params_.at("kernel.log_sigma2").values();
  for (long q = 0; q < config_.q; ++q)
    bank.densities.push_back(SpectralDensity{
        {q == 0 ? 0.0 : mu[static_cast<size_t>(q)]},
        {std::exp(log_s2[static_cast<size_t>(q)])}});
  bank.sigma_eps = config_.sigma_eps;
  return bank;
}

Tensor spd_solve_with_jitter(const Tensor& gram, const Tensor& rhs,
                             double sigma_eps2) {
  const long n = gram.dim(0);
  for (double jitter = 0.0; jitter <= 1.1e-6;
       jitter = (jitter == 0.0 ? 1e-10 : jitter * 10.0)) {
    try {
      Tensor a = gram + Tensor::eye(n) * Tensor::scalar(sigma_eps2 + jitter);
      return cholesky_solve(a, rhs);
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError(
      "spd_solve_with_jitter: factorization failed after escalation to 1e-6");
}

Prediction Model::predict(const Task& task, Rng& rng,
                          long n_samples_override) const {
  const ModelConfig& c = config_;
  if (task.channels() != c.channels)
    throw ShapeError("predict: task has " + std::to_string(task.channels()) +
                     " channels, model expects " + std::to_string(c.channels));
  const long n_samples =
      n_samples_override > 0 ? n_samples_override
                             : (c.variant == ModelVariant::ConvCnp
                                    ? 1
                                    : c.n_samples);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (long k = 0; k < c.channels; ++k) {
    for (double x : task.context[static_cast<size_t>(k)].x) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    for (double x : task.target[static_cast<size_t>(k)].x) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (!std::isfinite(lo))
    throw ShapeError("predict: task has no inputs on any channel");
  Grid grid = make_grid(lo, hi, c.points_per_unit, c.margin);
  const auto grid_pts = grid.points();

  Prediction out;
  out.grid = grid;
  const std::uint64_t base = rng.next_u64();

  std::vector<Tensor> density(static_cast<size_t>(c.channels));
  std::vector<std::vector<Tensor>> data(
      static_cast<size_t>(n_samples),
      std::vector<Tensor>(static_cast<size_t>(c.channels)));

  if (c.variant == ModelVariant::ConvCnp) {
    auto smoother = rbf_kernel(c.convcnp_lengthscale);
    for (long k = 0; k < c.channels; ++k) {
      const auto& ctx = task.context[static_cast<size_t>(k)];
      density[static_cast<size_t>(k)] =
          constant_vector(density_channel(ctx, grid, smoother));
      Tensor nw = constant_vector(deterministic_data_channel(ctx, grid, smoother));
      for (long n = 0; n < n_samples; ++n)
        data[static_cast<size_t>(n)][static_cast<size_t>(k)] = nw;
    }
  } else {
    KernelBank bank_now = bank();
    Tensor mu, sigma2;
    if (c.variant == ModelVariant::Bayes) {
      std::vector<double> mask_v(static_cast<size_t>(c.q), 1.0);
      mask_v[0] = 0.0;  // mu_1 pinned at zero
      mu = params_.at("kernel.mu") * Tensor::from({c.q}, mask_v);
      sigma2 = exp(params_.at("kernel.log_sigma2"));
    } else {
      std::vector<double> mu_v, s2_v;
      for (const auto& d : bank_now.densities) {
        mu_v.push_back(d.mu[0]);
        s2_v.push_back(d.sigma2[0]);
      }
      mu = constant_vector(mu_v);
      sigma2 = constant_vector(s2_v);
    }

    PnnConfig pnn;
    pnn.version = c.pnn_version;
    pnn.q = c.q;
    pnn.channels = c.channels;
    pnn.pooling = c.pnn_version == PnnVersion::V2Grid ? PnnPooling::Mean
                                                      : PnnPooling::Sum;

    const double sigma_eps2 = c.sigma_eps * c.sigma_eps;
    for (long k = 0; k < c.channels; ++k) {
      ContextSet ctx = canonical_order(task.context[static_cast<size_t>(k)]);
      const long nc = ctx.size();
      Tensor probs_k;
      if (c.uses_latent())
        probs_k = pnn_forward_graph(pnn, params_, ctx, mu, sigma2, k, &grid);
      else
        probs_k = constant_vector(std::vector<double>(1, 1.0));
      out.probs.push_back(probs_k);

      Tensor k_grid_ctx, gram_ctx;
      if (nc > 0) {
        k_grid_ctx =
            mixture_gram(mu, sigma2, probs_k, tau_matrix(grid_pts, ctx.x));
        density[static_cast<size_t>(k)] = sum(k_grid_ctx, 1);
        if (c.mode == RepresentationMode::Exact)
          gram_ctx =
              mixture_gram(mu, sigma2, probs_k, tau_matrix(ctx.x, ctx.x));
      } else {
        density[static_cast<size_t>(k)] = Tensor::zeros({grid.m});
      }

      Tensor filter;
      GridBinned binned;
      long half = 0;
      if (c.mode == RepresentationMode::Approx) {
        half = c.filter_half_width > 0
                   ? c.filter_half_width
                   : default_filter_half_width(bank_now, grid.spacing);
        half = std::min<long>(half, (grid.m - 1) / 2);
        std::vector<double> taps(static_cast<size_t>(2 * half + 1));
        for (long j = -half; j <= half; ++j)
          taps[static_cast<size_t>(j + half)] =
              static_cast<double>(j) * grid.spacing;
        Tensor tap_row = Tensor::from({1, 2 * half + 1}, taps);
        filter = reshape(mixture_gram(mu, sigma2, probs_k, tap_row),
                         {1, 1, 2 * half + 1});
        binned = bin_to_grid(ctx, grid);
      }

      for (long n = 0; n < n_samples; ++n) {
        const std::uint64_t idx =
            static_cast<std::uint64_t>(n * c.channels + k);
        Rng prior_rng = derive_rng(base, 0xB2, idx);
        RffPrior prior = sample_rff_prior(bank_now, c.l_spec, prior_rng);

        Tensor z;
        if (c.uses_latent()) {
          Rng z_rng = derive_rng(base, 0xA1, idx);
          std::vector<double> noise(static_cast<size_t>(c.q));
          for (auto& g : noise) g = z_rng.gumbel();
          if (c.hard_samples) {
            // constant one-hot; no gradient through a hard sample
            std::vector<double> logits(static_cast<size_t>(c.q));
            for (size_t i = 0; i < logits.size(); ++i)
              logits[i] = std::log(probs_k.values()[i] + 1e-12) + noise[i];
            const size_t arg = static_cast<size_t>(
                std::max_element(logits.begin(), logits.end()) -
                logits.begin());
            std::vector<double> onehot(static_cast<size_t>(c.q), 0.0);
            onehot[arg] = 1.0;
            z = constant_vector(onehot);
          } else {
            z = gumbel_softmax_graph(probs_k, noise, c.gs_temperature);
          }
        } else {
          z = constant_vector(std::vector<double>(1, 1.0));
        }

        Tensor prior_grid = rff_prior_values(mu, sigma2, z, prior, grid_pts);
        Tensor& slot = data[static_cast<size_t>(n)][static_cast<size_t>(k)];
        if (c.mode == RepresentationMode::Exact) {
          if (nc == 0) {
            slot = prior_grid;
          } else {
            Tensor psi = rff_prior_values(mu, sigma2, z, prior, ctx.x);
            Tensor resid = constant_vector(ctx.y) - psi;
            Tensor v =
                spd_solve_with_jitter(gram_ctx, reshape(resid, {nc, 1}),
                                      sigma_eps2);
            slot = prior_grid + reshape(matmul(k_grid_ctx, v), {grid.m});
          }
        } else {
          Tensor delta = Tensor::from({1, grid.m}, binned.values);
          Tensor resid = delta - c.alpha * reshape(prior_grid, {1, grid.m});
          Tensor smooth = conv1d(resid, filter, {}, half);
          slot = c.alpha * prior_grid + reshape(smooth, {grid.m});
        }
      }
    }
  }

  // decode each sample independently, smooth onto targets, apply the head
  auto out_kernel = rbf_kernel(c.smoothing_lengthscale());
  std::vector<Tensor> smoothing(static_cast<size_t>(c.channels));
  for (long k = 0; k < c.channels; ++k) {
    const auto& xt = task.target[static_cast<size_t>(k)].x;
    const long nt = static_cast<long>(xt.size());
    std::vector<double> s(static_cast<size_t>(nt * grid.m));
    for (long j = 0; j < nt; ++j)
      for (long m = 0; m < grid.m; ++m)
        s[static_cast<size_t>(j * grid.m + m)] =
            out_kernel(xt[static_cast<size_t>(j)] - grid.point(m));
    smoothing[static_cast<size_t>(k)] = Tensor::from({nt, grid.m}, std::move(s));
  }

  out.mu.resize(static_cast<size_t>(n_samples));
  out.sigma.resize(static_cast<size_t>(n_samples));
  for (long n = 0; n < n_samples; ++n) {
    std::vector<Tensor> parts;
    parts.reserve(static_cast<size_t>(2 * c.channels));
    for (long k = 0; k < c.channels; ++k) {
      parts.push_back(reshape(density[static_cast<size_t>(k)], {1, grid.m}));
      parts.push_back(reshape(
          data[static_cast<size_t>(n)][static_cast<size_t>(k)], {1, grid.m}));
    }
    Tensor rep = concat(parts, 0);
    Tensor feat = decode(c, params_, rep);
    Tensor feat_t = transpose(feat);  // [M, F]
    for (long k = 0; k < c.channels; ++k) {
      Tensor smoothed = matmul(smoothing[static_cast<size_t>(k)], feat_t);
      auto [mu_k, sigma_k] = predictive_head(c, params_, smoothed, k);
      out.mu[static_cast<size_t>(n)].push_back(mu_k);
      out.sigma[static_cast<size_t>(n)].push_back(sigma_k);
    }
  }
  return out;
}

Tensor decode(const ModelConfig& config, const ParamStore& params,
              const Tensor& representation) {
  if (representation.ndim() != 2)
    throw ShapeError("decode: representation must be [channels, M]");
  const Tensor& embed_w = params.at("dec.embed.w");
  if (representation.dim(0) != embed_w.dim(1))
    throw ShapeError("decode: representation has " +
                     std::to_string(representation.dim(0)) +
                     " channels, decoder expects " +
                     std::to_string(embed_w.dim(1)));
  Tensor h = conv1d(representation, embed_w, params.at("dec.embed.b"), 0);
  auto layout = decoder_layout(config.decoder, config.decoder_features);
  const bool deep = config.decoder == DecoderKind::Deep;
  std::vector<Tensor> acts;
  acts.reserve(layout.size());
  for (long i = 0; i < static_cast<long>(layout.size()); ++i) {
    Tensor input = (i == 0) ? h : acts[static_cast<size_t>(i - 1)];
    if (deep) {
      const long skip = deep_skip_source(i);
      if (skip >= 0)
        input = concat({acts[static_cast<size_t>(skip)], input}, 0);
    }
    const std::string name = "dec.l" + std::to_string(i);
    Tensor conv = conv1d(input, params.at(name + ".w"), params.at(name + ".b"),
                         2);
    if (i + 1 < static_cast<long>(layout.size())) conv = relu(conv);
    acts.push_back(conv);
  }
  return acts.back();
}

std::pair<Tensor, Tensor> predictive_head(const ModelConfig& config,
                                          const ParamStore& params,
                                          const Tensor& features,
                                          long channel) {
  (void)config;
  const long nt = features.dim(0);
  Tensor h = relu(affine(features, params.at("head.w1"), params.at("head.b1")));
  const std::string mu_name = "head.mu" + std::to_string(channel);
  const std::string sg_name = "head.sigma" + std::to_string(channel);
  Tensor mu = reshape(
      affine(h, params.at(mu_name + ".w"), params.at(mu_name + ".b")), {nt});
  Tensor raw = reshape(
      affine(h, params.at(sg_name + ".w"), params.at(sg_name + ".b")), {nt});
  Tensor sigma = 0.01 + softplus(raw);
  return {mu, sigma};
}

Tensor Model::log_likelihood(const Prediction& prediction,
                             const Task& task) const {
  const long n_samples = prediction.n_samples();
  std::vector<Tensor> per_sample;
  per_sample.reserve(static_cast<size_t>(n_samples));
  for (long n = 0; n < n_samples; ++n) {
    Tensor acc;
    bool any = false;
    for (long k = 0; k < config_.channels; ++k) {
      const auto& tgt = task.target[static_cast<size_t>(k)];
      if (tgt.size() == 0) continue;
      Tensor term = gaussian_log_density_sum(
          tgt.y, prediction.mu[static_cast<size_t>(n)][static_cast<size_t>(k)],
          prediction.sigma[static_cast<size_t>(n)][static_cast<size_t>(k)]);
      acc = any ? acc + term : term;
      any = true;
    }
    if (!any)
      throw ShapeError("log_likelihood: task has no target points");
    per_sample.push_back(acc);
  }
  if (n_samples == 1) return per_sample[0];
  return log_sum_exp(stack_scalars(per_sample)) -
         std::log(static_cast<double>(n_samples));
}

}  // namespace stnp
