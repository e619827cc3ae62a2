#pragma once

#include <array>
#include <string>
#include <vector>

#include "stnp/kernels.hpp"
#include "stnp/rng.hpp"
#include "stnp/task.hpp"

namespace stnp {

// Input range and set sizes shared by the synthetic generators.
struct TaskSizeRule {
  double range_lo = 0.0;
  double range_hi = 4.0;
  long nc_lo = 5;
  long nc_hi = 25;
  long nt_hi = 50;  // N^t ~ U[N^c, nt_hi]
};

// One joint GP function sample at fixed inputs (1e-8 jitter Cholesky).
std::vector<double> sample_gp_function(const KernelFn& kernel,
                                       const std::vector<double>& x,
                                       Rng& rng);

Task sample_gp_task(DataKernelFamily family, const TaskSizeRule& rule,
                    Rng& rng);

Task sample_sawtooth_task(const TaskSizeRule& rule, Rng& rng);

// Truncated sawtooth series value (exposed for oracle tests).
double sawtooth_value(double t, double amplitude, double frequency,
                      long truncation, double shift);

enum class SinusoidalVariant { Phase, All };

// 3-channel sinusoidal tasks on [0, 3] by default.
Task sample_sinusoidal_task(SinusoidalVariant variant, const TaskSizeRule& rule,
                            Rng& rng, double noise_sd = 0.1);

enum class MosmVariant { Fixed, Varying };

Task sample_mosm_task(MosmVariant variant, const TaskSizeRule& rule, Rng& rng,
                      double mu_jitter_sd = 0.5);

struct LotkaVolterraConfig {
  double alpha = 2.0 / 3.0;
  double beta = 4.0 / 3.0;
  double delta = 1.0;
  double gamma = 1.0;
  double x0 = 1.0;
  double y0 = 1.0;
  double horizon = 30.0;
  double dt = 0.01;
  double param_jitter = 0.1;  // multiplicative U[1-j, 1+j] per task
  long n_lo = 85;             // total observations N ~ U[n_lo, n_hi]
  long n_hi = 100;
  long nc_lo = 10;            // context drawn from the target indices
  long nc_hi = 30;
};

// RK4 trajectory of the predator-prey system, one state per step.
std::vector<std::array<double, 2>> integrate_lotka_volterra(
    double alpha, double beta, double delta, double gamma, double x0,
    double y0, double horizon, double dt);

// 2-channel task on a uniform observation grid; context indices are a
// random subset of the target indices (shared by both channels).
Task simulate_lotka_volterra(const LotkaVolterraConfig& config, Rng& rng);

// Family-balanced task pool ("rbf", "matern52", "weakly_periodic",
// "sawtooth", "sinusoidal_phase", "sinusoidal_all", "mosm", "mosm_varying",
// "lotka_volterra"); task i uses the derived seed hash(base_seed, i).
Task sample_task_by_family(const std::string& family, const TaskSizeRule& rule,
                           Rng& rng);
std::vector<Task> sample_task_pool(const std::vector<std::string>& families,
                                   long count, const TaskSizeRule& rule,
                                   std::uint64_t base_seed);

std::vector<std::string> known_task_families();

}  // namespace stnp
