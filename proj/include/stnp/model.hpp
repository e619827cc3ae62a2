#pragma once

#include <string>
#include <vector>

#include "stnp/convdeepsets.hpp"
#include "stnp/latent_prior.hpp"
#include "stnp/param_store.hpp"
#include "stnp/task.hpp"

namespace stnp {

enum class ModelVariant { Bayes, ConvCnp, GpConvCnp };
enum class DecoderKind { Shallow, Deep };

std::string variant_name(ModelVariant v);
ModelVariant variant_from_name(const std::string& name);

struct ModelConfig {
  ModelVariant variant = ModelVariant::Bayes;
  long q = 4;
  double hz_max = 4.0;
  long l_spec = 10;
  long n_samples = 5;
  DecoderKind decoder = DecoderKind::Shallow;
  double points_per_unit = 64.0;
  double margin = 0.1;
  double gs_temperature = 0.5;
  PnnVersion pnn_version = PnnVersion::V1Gridless;
  long channels = 1;
  RepresentationMode mode = RepresentationMode::Exact;
  double alpha = 0.5;
  long filter_half_width = -1;  // -1 = bank default
  bool hard_samples = false;
  bool train_kernel = true;
  double sigma_eps = 1e-2;
  double convcnp_lengthscale = 0.01;   // E(D) smoother (ConvCNP variant)
  double gpconvcnp_lengthscale = 1.0;  // fixed GP kernel (GPConvCNP variant)
  double output_lengthscale = 0.0;     // Eq.-6 smoother; 0 = 2 / points_per_unit
  long head_hidden = 32;
  long decoder_features = 8;

  // Applies variant forcing: ConvCNP has one deterministic sample and no
  // latent; GPConvCNP has Q = 1 with a fixed density and no latent.
  void resolve();
  bool uses_latent() const { return variant == ModelVariant::Bayes; }
  double smoothing_lengthscale() const {
    return output_lengthscale > 0.0 ? output_lengthscale
                                    : 2.0 / points_per_unit;
  }
};

// Per-task prediction: N sample parameter sets, each a per-channel
// (mu, sigma) pair at that channel's target inputs, as live tensors.
struct Prediction {
  Grid grid;
  std::vector<std::vector<Tensor>> mu;     // [sample][channel] -> [Nt_k]
  std::vector<std::vector<Tensor>> sigma;  // same layout
  std::vector<Tensor> probs;               // [channel] (empty without latent)

  long n_samples() const { return static_cast<long>(mu.size()); }
};

class Model {
 public:
  explicit Model(ModelConfig config);

  void init_params(Rng& rng);

  ModelConfig& config() { return config_; }
  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Kernel bank reflecting the current (possibly trained) parameters.
  KernelBank bank() const;

  // Forward pass; records on the active tape. `n_samples_override` > 0
  // replaces the configured sample count (evaluation-time control).
  Prediction predict(const Task& task, Rng& rng,
                     long n_samples_override = -1) const;

  // log p(Y^t | X^t, D^c): log-mean-exp over samples of the per-sample
  // joint Gaussian log-density.
  Tensor log_likelihood(const Prediction& prediction, const Task& task) const;

 private:
  ModelConfig config_;
  ParamStore params_;
};

// Decoder CNN: kernel-size-1 embed into `decoder_features` channels, then the
// shallow 5-layer / deep 12-layer U-Net stack, raw features on the last layer.
Tensor decode(const ModelConfig& config, const ParamStore& params,
              const Tensor& representation);

// (mu, sigma) heads on smoothed features [Nt, F]; sigma = 0.01 + softplus.
std::pair<Tensor, Tensor> predictive_head(const ModelConfig& config,
                                          const ParamStore& params,
                                          const Tensor& features, long channel);

// Cholesky solve of (K + (sigma_eps^2 + jitter) I) x = b with jitter
// escalation 0, 1e-10 .. 1e-6; throws NumericalError when all fail.
Tensor spd_solve_with_jitter(const Tensor& gram, const Tensor& rhs,
                             double sigma_eps2);

}  // namespace stnp
