#include "stnp/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stnp {

namespace {

constexpr double kPi = std::numbers::pi;

long uniform_int(Rng& rng, long lo, long hi) {
  if (hi < lo) throw ShapeError("uniform_int: empty range");
  return lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

struct SplitSizes {
  long nc, nt;
};

SplitSizes draw_sizes(const TaskSizeRule& rule, Rng& rng) {
  const long nc = uniform_int(rng, rule.nc_lo, rule.nc_hi);
  const long nt = uniform_int(rng, nc, std::max(nc, rule.nt_hi));
  return {nc, nt};
}

std::vector<double> draw_inputs(const TaskSizeRule& rule, long n, Rng& rng) {
  std::vector<double> x(static_cast<size_t>(n));
  for (auto& v : x) v = rng.uniform(rule.range_lo, rule.range_hi);
  return x;
}

}  // namespace

std::vector<double> sample_gp_function(const KernelFn& kernel,
                                       const std::vector<double>& x,
                                       Rng& rng) {
  const long n = static_cast<long>(x.size());
  Eigen::MatrixXd g = gram_matrix(kernel, x, x, 1e-8);
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success)
    throw NumericalError("sample_gp_function: Cholesky failed");
  Eigen::VectorXd eps(n);
  for (long i = 0; i < n; ++i) eps(i) = rng.normal();
  Eigen::VectorXd y = llt.matrixL() * eps;
  return std::vector<double>(y.data(), y.data() + n);
}

Task sample_gp_task(DataKernelFamily family, const TaskSizeRule& rule,
                    Rng& rng) {
  const std::uint64_t base = rng.next_u64();
  Rng hyper_rng = derive_rng(base, 1);
  Rng size_rng = derive_rng(base, 2);

  DataKernelSpec spec;
  spec.family = family;
  std::string name;
  switch (family) {
    case DataKernelFamily::Rbf:
      spec.lengthscale = hyper_rng.uniform(1.1, 2.1);
      name = "rbf";
      break;
    case DataKernelFamily::Matern52:
      spec.lengthscale = hyper_rng.uniform(0.19, 0.21);
      name = "matern52";
      break;
    case DataKernelFamily::WeaklyPeriodic:
      spec.lengthscale = hyper_rng.uniform(2.0, 3.0);  // frequency f
      name = "weakly_periodic";
      break;
    default:
      throw DomainError("sample_gp_task: unsupported family");
  }
  auto kernel = [spec](double tau) {
    return data_kernel_eval(spec, tau, 0.0);
  };

  const auto sizes = draw_sizes(rule, size_rng);
  const long n = sizes.nc + sizes.nt;
  for (int attempt = 0; attempt < 5; ++attempt) {
    Rng input_rng = derive_rng(base, 3, static_cast<std::uint64_t>(attempt));
    Rng gp_rng = derive_rng(base, 4, static_cast<std::uint64_t>(attempt));
    auto x = draw_inputs(rule, n, input_rng);
    std::vector<double> y;
    try {
      y = sample_gp_function(kernel, x, gp_rng);
    } catch (const NumericalError&) {
      continue;
    }
    Task task;
    task.family = name;
    task.seed = base;
    task.params["lengthscale"] = spec.lengthscale;
    ContextSet ctx, tgt;
    for (long i = 0; i < sizes.nc; ++i) {
      ctx.x.push_back(x[static_cast<size_t>(i)]);
      ctx.y.push_back(y[static_cast<size_t>(i)]);
    }
    for (long i = sizes.nc; i < n; ++i) {
      tgt.x.push_back(x[static_cast<size_t>(i)]);
      tgt.y.push_back(y[static_cast<size_t>(i)]);
    }
    task.context.push_back(std::move(ctx));
    task.target.push_back(std::move(tgt));
    return task;
  }
  throw NumericalError("sample_gp_task: Cholesky failed after 5 resamples");
}

double sawtooth_value(double t, double amplitude, double frequency,
                      long truncation, double shift) {
  double acc = 0.0;
  for (long k = 1; k <= truncation; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    acc += sign *
           std::sin(2.0 * kPi * static_cast<double>(k) * frequency *
                    (t + shift)) /
           static_cast<double>(k);
  }
  return amplitude / 2.0 - amplitude / kPi * acc;
}

Task sample_sawtooth_task(const TaskSizeRule& rule, Rng& rng) {
  const std::uint64_t base = rng.next_u64();
  Rng hyper_rng = derive_rng(base, 1);
  Rng size_rng = derive_rng(base, 2);
  Rng input_rng = derive_rng(base, 3);

  const double amplitude = hyper_rng.uniform(0.8, 1.2);
  const double frequency = hyper_rng.uniform(1.0, 2.0);
  const long truncation = uniform_int(hyper_rng, 10, 20);
  const double shift = hyper_rng.uniform(-1.0, 1.0);

  const auto sizes = draw_sizes(rule, size_rng);
  const long n = sizes.nc + sizes.nt;
  auto x = draw_inputs(rule, n, input_rng);

  Task task;
  task.family = "sawtooth";
  task.seed = base;
  task.params = {{"amplitude", amplitude},
                 {"frequency", frequency},
                 {"truncation", static_cast<double>(truncation)},
                 {"shift", shift}};
  ContextSet ctx, tgt;
  for (long i = 0; i < n; ++i) {
    const double y =
        sawtooth_value(x[static_cast<size_t>(i)], amplitude, frequency,
                       truncation, shift);
    if (i < sizes.nc) {
      ctx.x.push_back(x[static_cast<size_t>(i)]);
      ctx.y.push_back(y);
    } else {
      tgt.x.push_back(x[static_cast<size_t>(i)]);
      tgt.y.push_back(y);
    }
  }
  task.context.push_back(std::move(ctx));
  task.target.push_back(std::move(tgt));
  return task;
}

Task sample_sinusoidal_task(SinusoidalVariant variant, const TaskSizeRule& rule,
                            Rng& rng, double noise_sd) {
  const std::uint64_t base = rng.next_u64();
  Rng hyper_rng = derive_rng(base, 1);

  const double a = hyper_rng.uniform(-0.25, 0.25);
  const std::array<double, 3> w{2.1, 4.1, 6.1};
  const std::array<double, 3> amp{1.0 + a, 2.0 + a, 3.0 + a};
  const std::array<double, 3> phase{hyper_rng.uniform(-1.0, 1.0),
                                    hyper_rng.uniform(-1.5, 0.5),
                                    hyper_rng.uniform(-2.0, 0.0)};
  double theta = 0.0;
  if (variant == SinusoidalVariant::All) theta = hyper_rng.uniform(0.0, 5.0);
  const std::array<double, 3> theta_i{theta, 2.0 * theta, 3.0 * theta};

  Task task;
  task.family = variant == SinusoidalVariant::Phase ? "sinusoidal_phase"
                                                    : "sinusoidal_all";
  task.seed = base;
  task.params = {{"a", a},
                 {"phase1", phase[0]},
                 {"phase2", phase[1]},
                 {"phase3", phase[2]},
                 {"theta", theta}};
  for (long k = 0; k < 3; ++k) {
    Rng size_rng = derive_rng(base, 2, static_cast<std::uint64_t>(k));
    Rng input_rng = derive_rng(base, 3, static_cast<std::uint64_t>(k));
    Rng noise_rng = derive_rng(base, 4, static_cast<std::uint64_t>(k));
    const auto sizes = draw_sizes(rule, size_rng);
    const long n = sizes.nc + sizes.nt;
    auto x = draw_inputs(rule, n, input_rng);
    ContextSet ctx, tgt;
    for (long i = 0; i < n; ++i) {
      const double t = x[static_cast<size_t>(i)];
      double y = amp[static_cast<size_t>(k)] *
                 std::sin(2.0 * kPi *
                          (w[static_cast<size_t>(k)] +
                           theta_i[static_cast<size_t>(k)]) *
                          (t - phase[static_cast<size_t>(k)]));
      if (noise_sd > 0.0) y += noise_rng.normal(0.0, noise_sd);
      if (i < sizes.nc) {
        ctx.x.push_back(t);
        ctx.y.push_back(y);
      } else {
        tgt.x.push_back(t);
        tgt.y.push_back(y);
      }
    }
    task.context.push_back(std::move(ctx));
    task.target.push_back(std::move(tgt));
  }
  return task;
}

Task sample_mosm_task(MosmVariant variant, const TaskSizeRule& rule, Rng& rng,
                      double mu_jitter_sd) {
  const std::uint64_t base = rng.next_u64();
  std::vector<MosmChannelParams> channels{
      {0.1, 0.1, 1.0, 0.0}, {3.0, 0.1, 1.0, 0.0}, {5.0, 0.1, 1.0, 0.0}};
  if (variant == MosmVariant::Varying) {
    Rng perturb_rng = derive_rng(base, 9);
    for (auto& c : channels) c.mu += perturb_rng.normal(0.0, mu_jitter_sd);
  }

  // channel layout and inputs
  std::vector<SplitSizes> sizes;
  std::vector<std::vector<double>> xs;
  long total = 0;
  for (long k = 0; k < 3; ++k) {
    Rng size_rng = derive_rng(base, 2, static_cast<std::uint64_t>(k));
    Rng input_rng = derive_rng(base, 3, static_cast<std::uint64_t>(k));
    sizes.push_back(draw_sizes(rule, size_rng));
    const long n = sizes.back().nc + sizes.back().nt;
    xs.push_back(draw_inputs(rule, n, input_rng));
    total += n;
  }

  for (int attempt = 0; attempt < 5; ++attempt) {
    // stacked cross-covariance over all channels
    Eigen::MatrixXd g(total, total);
    long row = 0;
    for (long ki = 0; ki < 3; ++ki) {
      for (size_t i = 0; i < xs[static_cast<size_t>(ki)].size(); ++i, ++row) {
        long col = 0;
        for (long kj = 0; kj < 3; ++kj) {
          for (size_t j = 0; j < xs[static_cast<size_t>(kj)].size();
               ++j, ++col) {
            g(row, col) = mosm_cross_eval(channels, ki, kj,
                                          xs[static_cast<size_t>(ki)][i],
                                          xs[static_cast<size_t>(kj)][j]);
          }
        }
      }
    }
    g.diagonal().array() += 1e-8 * std::pow(10.0, attempt);
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) continue;
    Rng gp_rng = derive_rng(base, 4, static_cast<std::uint64_t>(attempt));
    Eigen::VectorXd eps(total);
    for (long i = 0; i < total; ++i) eps(i) = gp_rng.normal();
    Eigen::VectorXd y = llt.matrixL() * eps;

    Task task;
    task.family = variant == MosmVariant::Fixed ? "mosm" : "mosm_varying";
    task.seed = base;
    for (long k = 0; k < 3; ++k) {
      task.params["mu" + std::to_string(k + 1)] =
          channels[static_cast<size_t>(k)].mu;
    }
    long offset = 0;
    for (long k = 0; k < 3; ++k) {
      const auto& x = xs[static_cast<size_t>(k)];
      ContextSet ctx, tgt;
      for (long i = 0; i < static_cast<long>(x.size()); ++i) {
        const double yi = y(offset + i);
        if (i < sizes[static_cast<size_t>(k)].nc) {
          ctx.x.push_back(x[static_cast<size_t>(i)]);
          ctx.y.push_back(yi);
        } else {
          tgt.x.push_back(x[static_cast<size_t>(i)]);
          tgt.y.push_back(yi);
        }
      }
      offset += static_cast<long>(x.size());
      task.context.push_back(std::move(ctx));
      task.target.push_back(std::move(tgt));
    }
    return task;
  }
  throw NumericalError("sample_mosm_task: Cholesky failed after retries");
}

std::vector<std::array<double, 2>> integrate_lotka_volterra(
    double alpha, double beta, double delta, double gamma, double x0,
    double y0, double horizon, double dt) {
  if (dt <= 0.0) throw DomainError("integrate_lotka_volterra: dt must be > 0");
  if (x0 <= 0.0 || y0 <= 0.0)
    throw DomainError("integrate_lotka_volterra: populations must be positive");
  const long steps = static_cast<long>(std::llround(horizon / dt));
  std::vector<std::array<double, 2>> traj;
  traj.reserve(static_cast<size_t>(steps + 1));
  auto deriv = [&](double x, double y) {
    return std::array<double, 2>{alpha * x - beta * x * y,
                                 delta * x * y - gamma * y};
  };
  double x = x0, y = y0;
  traj.push_back({x, y});
  for (long s = 0; s < steps; ++s) {
    const auto k1 = deriv(x, y);
    const auto k2 = deriv(x + 0.5 * dt * k1[0], y + 0.5 * dt * k1[1]);
    const auto k3 = deriv(x + 0.5 * dt * k2[0], y + 0.5 * dt * k2[1]);
    const auto k4 = deriv(x + dt * k3[0], y + dt * k3[1]);
    x += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    y += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    if (x < 1e-9 || y < 1e-9)
      throw NumericalError("integrate_lotka_volterra: population underflow");
    traj.push_back({x, y});
  }
  return traj;
}

Task simulate_lotka_volterra(const LotkaVolterraConfig& config, Rng& rng) {
  const std::uint64_t base = rng.next_u64();
  for (int attempt = 0; attempt < 20; ++attempt) {
    Rng param_rng = derive_rng(base, 1, static_cast<std::uint64_t>(attempt));
    const double j = config.param_jitter;
    const double alpha = config.alpha * param_rng.uniform(1.0 - j, 1.0 + j);
    const double beta = config.beta * param_rng.uniform(1.0 - j, 1.0 + j);
    const double delta = config.delta * param_rng.uniform(1.0 - j, 1.0 + j);
    const double gamma = config.gamma * param_rng.uniform(1.0 - j, 1.0 + j);

    std::vector<std::array<double, 2>> traj;
    try {
      traj = integrate_lotka_volterra(alpha, beta, delta, gamma, config.x0,
                                      config.y0, config.horizon, config.dt);
    } catch (const NumericalError&) {
      continue;  // resample parameters
    }

    Rng size_rng = derive_rng(base, 2, static_cast<std::uint64_t>(attempt));
    const long n = uniform_int(size_rng, config.n_lo, config.n_hi);
    const long nc =
        std::min(uniform_int(size_rng, config.nc_lo, config.nc_hi), n);
    // uniform observation grid over the horizon
    std::vector<long> step_of(static_cast<size_t>(n));
    const long last = static_cast<long>(traj.size()) - 1;
    for (long i = 0; i < n; ++i)
      step_of[static_cast<size_t>(i)] = static_cast<long>(std::llround(
          static_cast<double>(i) * static_cast<double>(last) /
          static_cast<double>(n - 1)));

    // context = random subset of target indices, shared across both channels
    std::vector<long> index(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) index[static_cast<size_t>(i)] = i;
    Rng pick_rng = derive_rng(base, 3, static_cast<std::uint64_t>(attempt));
    for (size_t i = index.size(); i > 1; --i)
      std::swap(index[i - 1], index[static_cast<size_t>(pick_rng.below(i))]);
    std::vector<bool> in_context(static_cast<size_t>(n), false);
    for (long i = 0; i < nc; ++i)
      in_context[static_cast<size_t>(index[static_cast<size_t>(i)])] = true;

    Task task;
    task.family = "lotka_volterra";
    task.seed = base;
    task.params = {{"alpha", alpha}, {"beta", beta},   {"delta", delta},
                   {"gamma", gamma}, {"x0", config.x0}, {"y0", config.y0}};
    task.context.resize(2);
    task.target.resize(2);
    for (long i = 0; i < n; ++i) {
      const double t = static_cast<double>(step_of[static_cast<size_t>(i)]) *
                       config.dt;
      const auto& state = traj[static_cast<size_t>(step_of[static_cast<size_t>(i)])];
      for (long k = 0; k < 2; ++k) {
        task.target[static_cast<size_t>(k)].x.push_back(t);
        task.target[static_cast<size_t>(k)].y.push_back(state[static_cast<size_t>(k)]);
        if (in_context[static_cast<size_t>(i)]) {
          task.context[static_cast<size_t>(k)].x.push_back(t);
          task.context[static_cast<size_t>(k)].y.push_back(state[static_cast<size_t>(k)]);
        }
      }
    }
    return task;
  }
  throw NumericalError(
      "simulate_lotka_volterra: no viable trajectory after 20 resamples");
}

Task sample_task_by_family(const std::string& family, const TaskSizeRule& rule,
                           Rng& rng) {
  if (family == "rbf") return sample_gp_task(DataKernelFamily::Rbf, rule, rng);
  if (family == "matern52")
    return sample_gp_task(DataKernelFamily::Matern52, rule, rng);
  if (family == "weakly_periodic")
    return sample_gp_task(DataKernelFamily::WeaklyPeriodic, rule, rng);
  if (family == "sawtooth") return sample_sawtooth_task(rule, rng);
  if (family == "sinusoidal_phase")
    return sample_sinusoidal_task(SinusoidalVariant::Phase, rule, rng);
  if (family == "sinusoidal_all")
    return sample_sinusoidal_task(SinusoidalVariant::All, rule, rng);
  if (family == "mosm") return sample_mosm_task(MosmVariant::Fixed, rule, rng);
  if (family == "mosm_varying")
    return sample_mosm_task(MosmVariant::Varying, rule, rng);
  if (family == "lotka_volterra") {
    LotkaVolterraConfig config;
    return simulate_lotka_volterra(config, rng);
  }
  throw ConfigError("unknown task family '" + family + "'");
}

std::vector<Task> sample_task_pool(const std::vector<std::string>& families,
                                   long count, const TaskSizeRule& rule,
                                   std::uint64_t base_seed) {
  if (families.empty()) throw ConfigError("sample_task_pool: no families");
  std::vector<Task> tasks;
  tasks.reserve(static_cast<size_t>(count));
  // equal number of tasks per process, interleaved
  for (long i = 0; i < count; ++i) {
    const auto& family = families[static_cast<size_t>(i) % families.size()];
    Rng rng(hash_seed(base_seed, 0x7a5, static_cast<std::uint64_t>(i)));
    tasks.push_back(sample_task_by_family(family, rule, rng));
  }
  return tasks;
}

std::vector<std::string> known_task_families() {
  return {"rbf", "matern52", "weakly_periodic", "sawtooth",
          "sinusoidal_phase", "sinusoidal_all", "mosm", "mosm_varying",
          "lotka_volterra"};
}

}  // namespace stnp
