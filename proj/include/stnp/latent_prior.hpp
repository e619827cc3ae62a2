#pragma once

#include <optional>
#include <vector>

#include "stnp/graph.hpp"
#include "stnp/param_store.hpp"
#include "stnp/rff_gp.hpp"

namespace stnp {

struct Grid;  // convdeepsets.hpp

struct CategoricalParams {
  std::vector<double> probs;

  long size() const { return static_cast<long>(probs.size()); }
};

CategoricalParams uniform_categorical(long q);

enum class PnnVersion { V1Gridless, V2Grid };
enum class PnnPooling { Sum, Mean };

struct PnnConfig {
  PnnVersion version = PnnVersion::V1Gridless;
  long q = 4;              // output width per channel
  long channels = 1;       // independent categorical head per channel
  long hidden = 32;        // MLP width (v1) / conv channels are fixed 16 (v2)
  PnnPooling pooling = PnnPooling::Sum;
  double v2_rbf_lengthscale = 0.1;
};

// Creates the pnn.* parameter tensors (shared trunk, per-channel heads).
void init_pnn_params(const PnnConfig& config, ParamStore& params, Rng& rng);

// Amortized categorical parameters for one channel. Differentiable w.r.t.
// the pnn.* parameters and the live kernel tensors (v1 features use the
// basis kernels). Empty context returns a constant uniform distribution.
Tensor pnn_forward_graph(const PnnConfig& config, const ParamStore& params,
                         const ContextSet& context, const Tensor& mu,
                         const Tensor& sigma2, long channel,
                         const Grid* grid = nullptr);

// Plain evaluation against a fixed bank (no tape).
CategoricalParams pnn_forward(const PnnConfig& config, const ParamStore& params,
                              const ContextSet& context, const KernelBank& bank,
                              long channel = 0, const Grid* grid = nullptr);

// z = softmax((log(p + 1e-12) + g) / temperature), g ~ Gumbel(0,1);
// hard = one-hot at the argmax.
std::vector<double> gumbel_softmax_sample(const CategoricalParams& p,
                                          double temperature, Rng& rng,
                                          bool hard = false);

// KL(q || p) with p floored at 1e-12 and the 0 log 0 = 0 convention.
double kl_categorical(const CategoricalParams& q, const CategoricalParams& p);

// Differentiable in q (p is a constant target).
Tensor kl_categorical_graph(const Tensor& q, const std::vector<double>& p);

}  // namespace stnp
