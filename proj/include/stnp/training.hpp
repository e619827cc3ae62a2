#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stnp/model.hpp"

namespace stnp {

struct TrainConfig {
  double beta = 0.1;          // KL regularizer weight
  double tau0 = 1.0;          // tempering
  double lr = 5e-4;
  double weight_decay = 1e-4;
  long epochs = 3;
  long batch_size = 16;
  long n_mc = -1;             // tempered-posterior draws; -1 = model N
  long threads = 1;
  std::uint64_t seed = 0;
};

// One sample's predictive parameters, per channel.
struct SamplePrediction {
  std::vector<std::vector<double>> mu;
  std::vector<std::vector<double>> sigma;
};

// log-mean-exp over samples of the summed Gaussian log-densities.
double multisample_loglik(const std::vector<SamplePrediction>& samples,
                          const std::vector<std::vector<double>>& y_target);

// Tempered posterior over the bank: per kernel q, n_mc one-hot path-wise
// samples at the targets -> empirical Gaussian marginal -> softmax(ll / tau0).
CategoricalParams tempered_posterior_params(const ContextSet& context,
                                            const ContextSet& target,
                                            const KernelBank& bank, long n_mc,
                                            double tau0, Rng& rng);

struct LossBreakdown {
  double loss = 0.0;  // -(ll - beta kl), averaged over the batch
  double ll = 0.0;
  double kl = 0.0;
  bool skipped = false;  // non-finite loss: no parameter update applied
};

// One Adam step on the mean batch objective. The tempered posterior is a
// constant target (no gradient through it).
LossBreakdown meta_train_step(Model& model, AdamState& adam,
                              const std::vector<Task>& batch,
                              const TrainConfig& config, Rng& rng);

struct EpochStats {
  long epoch = 0;
  double loss = 0.0;
  double ll = 0.0;
  double kl = 0.0;
  long skipped_steps = 0;
};

// Shuffled mini-batch epochs over a fixed task pool.
std::vector<EpochStats> run_training(
    Model& model, AdamState& adam, const std::vector<Task>& tasks,
    const TrainConfig& config,
    const std::function<void(const EpochStats&)>& on_epoch = {});

struct EvalBucket {
  std::string family;
  long nc = 0;
  long count = 0;
  double mean_ll = 0.0;      // per-point normalized
  double stderr_ll = 0.0;    // 0 by convention for a single task
  double mean_ll_raw = 0.0;  // unnormalized per-task log-likelihood
};

struct EvalReport {
  std::string variant;
  std::vector<EvalBucket> buckets;
};

// Per-task multisample log-likelihood normalized per target point, grouped
// by (family, N^c of channel 0).
EvalReport evaluate_tasks(const Model& model, const std::vector<Task>& tasks,
                          long n_eval_samples, Rng& rng, long threads = 1);

// Deterministic index-parallel map; results are reduced in index order by
// callers regardless of the thread count.
void parallel_for(long count, long threads,
                  const std::function<void(long)>& body);

}  // namespace stnp
