#include "stnp/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace stnp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double gaussian_ll(double y, double mu, double var) {
  const double d = y - mu;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}
}  // namespace

void parallel_for(long count, long threads, const std::function<void(long)>& body) {
  if (threads <= 1 || count <= 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  const long workers = std::min<long>(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (long w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (long i = w; i < count; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

double multisample_loglik(const std::vector<SamplePrediction>& samples,
                          const std::vector<std::vector<double>>& y_target) {
  if (samples.empty())
    throw ShapeError("multisample_loglik: no samples");
  std::vector<double> per_sample;
  per_sample.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.mu.size() != y_target.size())
      throw ShapeError("multisample_loglik: channel count mismatch");
    double acc = 0.0;
    for (size_t k = 0; k < y_target.size(); ++k) {
      if (s.mu[k].size() != y_target[k].size() ||
          s.sigma[k].size() != y_target[k].size())
        throw ShapeError("multisample_loglik: target length mismatch");
      for (size_t i = 0; i < y_target[k].size(); ++i)
        acc += gaussian_ll(y_target[k][i], s.mu[k][i],
                           s.sigma[k][i] * s.sigma[k][i]);
    }
    per_sample.push_back(acc);
  }
  const double m = *std::max_element(per_sample.begin(), per_sample.end());
  double total = 0.0;
  for (double v : per_sample) total += std::exp(v - m);
  return m + std::log(total / static_cast<double>(per_sample.size()));
}

CategoricalParams tempered_posterior_params(const ContextSet& context,
                                            const ContextSet& target,
                                            const KernelBank& bank, long n_mc,
                                            double tau0, Rng& rng) {
  if (tau0 <= 0.0)
    throw DomainError("tempered_posterior_params: tau0 must be positive");
  if (n_mc < 2)
    throw ShapeError("tempered_posterior_params: need at least 2 samples");
  const long q_count = bank.q_count();
  const std::uint64_t base = rng.next_u64();
  std::vector<double> log_lik(static_cast<size_t>(q_count), 0.0);
  for (long q = 0; q < q_count; ++q) {
    std::vector<double> onehot(static_cast<size_t>(q_count), 0.0);
    onehot[static_cast<size_t>(q)] = 1.0;
    PathwiseSampler sampler(context, bank, onehot);
    std::vector<std::vector<double>> draws;
    draws.reserve(static_cast<size_t>(n_mc));
    for (long i = 0; i < n_mc; ++i) {
      Rng r = derive_rng(base, static_cast<std::uint64_t>(q),
                         static_cast<std::uint64_t>(i));
      RffPrior prior = sample_rff_prior(bank, 10, r);
      draws.push_back(sampler.sample(prior, onehot, target.x));
    }
    auto stats = empirical_posterior_stats(draws);
    double acc = 0.0;
    for (size_t i = 0; i < target.y.size(); ++i)
      acc += gaussian_ll(target.y[i], stats.mean[i], stats.variance[i]);
    log_lik[static_cast<size_t>(q)] = acc;
  }
  // softmax(ll / tau0), shift-invariant
  const double m = *std::max_element(log_lik.begin(), log_lik.end());
  CategoricalParams p;
  p.probs.resize(static_cast<size_t>(q_count));
  double total = 0.0;
  for (size_t q = 0; q < p.probs.size(); ++q) {
    p.probs[q] = std::exp((log_lik[q] - m) / tau0);
    total += p.probs[q];
  }
  for (auto& v : p.probs) v /= total;
  return p;
}

namespace {

struct TaskResult {
  std::map<std::string, std::vector<double>> grads;
  double ll = 0.0;
  double kl = 0.0;
  double loss = 0.0;
  bool finite = true;
};

}  // namespace

LossBreakdown meta_train_step(Model& model, AdamState& adam,
                              const std::vector<Task>& batch,
                              const TrainConfig& config, Rng& rng) {
  if (batch.empty()) throw ShapeError("meta_train_step: empty batch");
  const std::uint64_t base = rng.next_u64();
  const long b = static_cast<long>(batch.size());
  const long n_mc = config.n_mc > 0 ? config.n_mc : model.config().n_samples;
  const bool use_kl = config.beta > 0.0 && model.config().uses_latent();
  const KernelBank bank = model.bank();

  std::vector<TaskResult> results(static_cast<size_t>(b));
  parallel_for(b, config.threads, [&](long i) {
    const Task& task = batch[static_cast<size_t>(i)];
    TaskResult& res = results[static_cast<size_t>(i)];
    Tape tape;
    Tape::Scope scope(tape);
    Rng task_rng = derive_rng(base, 0x7a5c, static_cast<std::uint64_t>(i));
    Tensor loss;
    try {
      Prediction pred = model.predict(task, task_rng);
      Tensor lll = model.log_likelihood(pred, task);
      loss = neg(lll);
      res.ll = lll.value();
      if (use_kl) {
        Tensor kl_total;
        for (long k = 0; k < task.channels(); ++k) {
          Rng prior_rng = derive_rng(
              base, 0x93b,
              static_cast<std::uint64_t>(i * task.channels() + k));
          CategoricalParams target_prior = tempered_posterior_params(
              task.context[static_cast<size_t>(k)],
              task.target[static_cast<size_t>(k)], bank, n_mc, config.tau0,
              prior_rng);
          Tensor kl_k = kl_categorical_graph(
              pred.probs[static_cast<size_t>(k)], target_prior.probs);
          kl_total = (k == 0) ? kl_k : kl_total + kl_k;
        }
        res.kl = kl_total.value();
        loss = loss + config.beta * kl_total;
      }
      res.loss = loss.value();
    } catch (const NumericalError&) {
      res.finite = false;
      return;
    }
    if (!std::isfinite(res.loss)) {
      res.finite = false;
      return;
    }
    tape.backward(loss);
    for (const auto& [name, tensor] : model.params().tensors) {
      if (!tensor.requires_grad()) continue;
      res.grads[name] = tape.grad(tensor);
    }
  });

  LossBreakdown out;
  for (const auto& res : results) {
    if (!res.finite) {
      out.skipped = true;
      break;
    }
    out.loss += res.loss / static_cast<double>(b);
    out.ll += res.ll / static_cast<double>(b);
    out.kl += res.kl / static_cast<double>(b);
  }
  if (out.skipped) return out;

  std::map<std::string, std::vector<double>> mean_grads;
  for (const auto& res : results) {  // fixed order: deterministic reduction
    for (const auto& [name, g] : res.grads) {
      auto& acc = mean_grads[name];
      if (acc.empty()) acc.assign(g.size(), 0.0);
      for (size_t j = 0; j < g.size(); ++j)
        acc[j] += g[j] / static_cast<double>(b);
    }
  }
  adam.config.lr = config.lr;
  adam.config.weight_decay = config.weight_decay;
  adam_step(model.params().tensors, mean_grads, adam);
  return out;
}

std::vector<EpochStats> run_training(
    Model& model, AdamState& adam, const std::vector<Task>& tasks,
    const TrainConfig& config,
    const std::function<void(const EpochStats&)>& on_epoch) {
  if (tasks.empty()) throw ShapeError("run_training: no tasks");
  std::vector<EpochStats> stats;
  Rng rng(hash_seed(config.seed, 0x7e41));
  std::vector<size_t> order(tasks.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (long epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the epoch-derived stream
    Rng shuffle_rng = derive_rng(config.seed, 0x5u, static_cast<std::uint64_t>(epoch));
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(shuffle_rng.below(i));
      std::swap(order[i - 1], order[j]);
    }
    EpochStats es;
    es.epoch = epoch;
    long steps = 0;
    for (size_t pos = 0; pos < order.size(); pos += config.batch_size) {
      std::vector<Task> batch;
      for (size_t j = pos;
           j < std::min(order.size(), pos + static_cast<size_t>(config.batch_size));
           ++j)
        batch.push_back(tasks[order[j]]);
      LossBreakdown lb = meta_train_step(model, adam, batch, config, rng);
      if (lb.skipped) {
        ++es.skipped_steps;
        continue;
      }
      es.loss += lb.loss;
      es.ll += lb.ll;
      es.kl += lb.kl;
      ++steps;
    }
    if (steps > 0) {
      es.loss /= static_cast<double>(steps);
      es.ll /= static_cast<double>(steps);
      es.kl /= static_cast<double>(steps);
    }
    stats.push_back(es);
    if (on_epoch) on_epoch(es);
  }
  return stats;
}

EvalReport evaluate_tasks(const Model& model, const std::vector<Task>& tasks,
                          long n_eval_samples, Rng& rng, long threads) {
  if (tasks.empty()) throw ShapeError("evaluate_tasks: no tasks");
  const std::uint64_t base = rng.next_u64();
  const long n = static_cast<long>(tasks.size());
  std::vector<double> norm_ll(static_cast<size_t>(n), 0.0);
  std::vector<double> raw_ll(static_cast<size_t>(n), 0.0);
  parallel_for(n, threads, [&](long i) {
    const Task& task = tasks[static_cast<size_t>(i)];
    Rng task_rng = derive_rng(base, 0xe7a1, static_cast<std::uint64_t>(i));
    Prediction pred = model.predict(task, task_rng, n_eval_samples);
    const double ll = model.log_likelihood(pred, task).value();
    raw_ll[static_cast<size_t>(i)] = ll;
    norm_ll[static_cast<size_t>(i)] =
        ll / static_cast<double>(task.target_size());
  });

  // group by (family, N^c of channel 0)
  std::map<std::pair<std::string, long>, std::vector<long>> groups;
  for (long i = 0; i < n; ++i) {
    const Task& t = tasks[static_cast<size_t>(i)];
    groups[{t.family, t.context[0].size()}].push_back(i);
  }
  EvalReport report;
  report.variant = variant_name(model.config().variant);
  for (const auto& [key, idx] : groups) {
    EvalBucket bucket;
    bucket.family = key.first;
    bucket.nc = key.second;
    bucket.count = static_cast<long>(idx.size());
    for (long i : idx) {
      bucket.mean_ll += norm_ll[static_cast<size_t>(i)];
      bucket.mean_ll_raw += raw_ll[static_cast<size_t>(i)];
    }
    bucket.mean_ll /= static_cast<double>(bucket.count);
    bucket.mean_ll_raw /= static_cast<double>(bucket.count);
    if (bucket.count > 1) {
      double ss = 0.0;
      for (long i : idx) {
        const double d = norm_ll[static_cast<size_t>(i)] - bucket.mean_ll;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(bucket.count - 1));
      bucket.stderr_ll = sd / std::sqrt(static_cast<double>(bucket.count));
    }
    report.buckets.push_back(bucket);
  }
  return report;
}

}  // namespace stnp
