#include "stnp/convdeepsets.hpp"

#include <algorithm>
#include <cmath>

#include "stnp/latent_prior.hpp"

namespace stnp {

std::vector<double> Grid::points() const {
  std::vector<double> out(static_cast<size_t>(m));
  for (long i = 0; i < m; ++i) out[static_cast<size_t>(i)] = point(i);
  return out;
}

long Grid::nearest(double x) const {
  if (m == 1) return 0;
  long i = static_cast<long>(std::llround((x - start) / spacing));
  return std::clamp<long>(i, 0, m - 1);
}

Grid make_grid(double x_min, double x_max, double points_per_unit,
               double margin) {
  if (x_max < x_min)
    throw ShapeError("make_grid: x_max < x_min");
  if (points_per_unit < 1.0)
    throw DomainError("make_grid: points_per_unit must be >= 1");
  if (margin < 0.0) throw DomainError("make_grid: negative margin");
  const double width = x_max - x_min + 2.0 * margin;
  const long m = static_cast<long>(std::ceil(width * points_per_unit)) + 1;
  if (m < 2)
    throw ShapeError(
        "make_grid: degenerate range produces a single-point grid; widen the "
        "range or margin");
  Grid grid;
  grid.start = x_min - margin;
  grid.spacing = width / static_cast<double>(m - 1);
  grid.m = m;
  return grid;
}

ContextSet canonical_order(ContextSet context) {
  const size_t n = context.x.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (context.x[a] != context.x[b]) return context.x[a] < context.x[b];
    return context.y[a] < context.y[b];
  });
  ContextSet out;
  out.x.reserve(n);
  out.y.reserve(n);
  for (size_t i : order) {
    out.x.push_back(context.x[i]);
    out.y.push_back(context.y[i]);
  }
  return out;
}

std::vector<double> density_channel(const ContextSet& context, const Grid& grid,
                                    const KernelFn& kernel) {
  ContextSet ctx = canonical_order(context);
  std::vector<double> out(static_cast<size_t>(grid.m), 0.0);
  for (long i = 0; i < grid.m; ++i) {
    const double t = grid.point(i);
    double acc = 0.0;
    for (double x : ctx.x) acc += kernel(t - x);
    out[static_cast<size_t>(i)] = acc;
  }
  return out;
}

std::vector<double> deterministic_data_channel(const ContextSet& context,
                                               const Grid& grid,
                                               const KernelFn& kernel) {
  ContextSet ctx = canonical_order(context);
  std::vector<double> out(static_cast<size_t>(grid.m), 0.0);
  for (long i = 0; i < grid.m; ++i) {
    const double t = grid.point(i);
    double num = 0.0, den = 0.0;
    for (size_t n = 0; n < ctx.x.size(); ++n) {
      const double k = kernel(t - ctx.x[n]);
      num += ctx.y[n] * k;
      den += k;
    }
    out[static_cast<size_t>(i)] = num / std::max(den, 1e-12);
  }
  return out;
}

FunctionalRepresentation random_functional_representation(
    const ContextSet& context, const KernelBank& bank,
    const std::vector<double>& probs, long n_samples, long l_spec, Rng& rng,
    const RandomRepOptions& options) {
  if (n_samples < 1)
    throw ShapeError("random_functional_representation: N must be >= 1");
  const double lo =
      context.size() ? *std::min_element(context.x.begin(), context.x.end())
                     : 0.0;
  const double hi =
      context.size() ? *std::max_element(context.x.begin(), context.x.end())
                     : 1.0;
  Grid grid = make_grid(lo, hi, 64.0, 0.1);
  return random_functional_representation_on(grid, context, bank, probs,
                                             n_samples, l_spec, rng, options);
}

FunctionalRepresentation random_functional_representation_on(
    const Grid& grid, const ContextSet& context, const KernelBank& bank,
    const std::vector<double>& probs, long n_samples, long l_spec, Rng& rng,
    const RandomRepOptions& options) {
  FunctionalRepresentation rep;
  rep.grid = grid;
  rep.density = density_channel(context, grid, mixture_kernel(bank, probs));

  const std::uint64_t base = rng.next_u64();
  CategoricalParams params{probs};
  const auto grid_points = grid.points();

  PathwiseSampler sampler(context, bank, probs);
  std::vector<double> filter;
  GridBinned binned;
  if (options.mode == RepresentationMode::Approx) {
    const long half = options.filter_half_width > 0
                          ? options.filter_half_width
                          : default_filter_half_width(bank, grid.spacing);
    filter = truncated_kernel_filter(mixture_kernel(bank, probs), grid.spacing,
                                     half);
    binned = bin_to_grid(context, grid);
  }

  for (long n = 0; n < n_samples; ++n) {
    Rng z_rng = derive_rng(base, 0xc47, static_cast<std::uint64_t>(n));
    Rng prior_rng = derive_rng(base, 0x12f, static_cast<std::uint64_t>(n));
    std::vector<double> z = gumbel_softmax_sample(
        params, options.gs_temperature, z_rng, options.hard_samples);
    RffPrior prior = sample_rff_prior(bank, l_spec, prior_rng);
    if (options.mode == RepresentationMode::Exact) {
      rep.data_channels.push_back(sampler.sample(prior, z, grid_points));
    } else {
      std::vector<double> prior_grid = eval_rff_prior(prior, z, grid_points);
      rep.data_channels.push_back(approx_random_representation(
          binned.indicator, binned.values, prior_grid, options.alpha, filter));
    }
  }
  return rep;
}

std::vector<std::vector<double>> smooth_to_targets(
    const std::vector<std::vector<double>>& grid_values, const Grid& grid,
    const std::vector<double>& targets, const KernelFn& kernel) {
  std::vector<std::vector<double>> out(grid_values.size());
  for (size_t c = 0; c < grid_values.size(); ++c) {
    if (static_cast<long>(grid_values[c].size()) != grid.m)
      throw ShapeError("smooth_to_targets: channel " + std::to_string(c) +
                       " has " + std::to_string(grid_values[c].size()) +
                       " cells, grid has " + std::to_string(grid.m));
    out[c].resize(targets.size());
    for (size_t j = 0; j < targets.size(); ++j) {
      double acc = 0.0;
      for (long mi = 0; mi < grid.m; ++mi)
        acc += grid_values[c][static_cast<size_t>(mi)] *
               kernel(targets[j] - grid.point(mi));
      out[c][j] = acc;
    }
  }
  return out;
}

GridBinned bin_to_grid(const ContextSet& context, const Grid& grid) {
  GridBinned binned;
  binned.indicator.assign(static_cast<size_t>(grid.m), 0.0);
  binned.values.assign(static_cast<size_t>(grid.m), 0.0);
  ContextSet ctx = canonical_order(context);
  for (size_t n = 0; n < ctx.x.size(); ++n) {
    const long i = grid.nearest(ctx.x[n]);
    binned.indicator[static_cast<size_t>(i)] += 1.0;
    binned.values[static_cast<size_t>(i)] += ctx.y[n];
  }
  return binned;
}

}  // namespace stnp
