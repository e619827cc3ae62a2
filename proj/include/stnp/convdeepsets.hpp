#pragma once

#include <vector>

#include "stnp/kernels.hpp"
#include "stnp/rff_gp.hpp"
#include "stnp/rng.hpp"

namespace stnp {

// Uniform discretization grid covering [x_min - margin, x_max + margin].
struct Grid {
  double start = 0.0;
  double spacing = 0.0;
  long m = 0;

  double point(long i) const { return start + spacing * static_cast<double>(i); }
  std::vector<double> points() const;
  // nearest cell, clamped to the grid
  long nearest(double x) const;
};

Grid make_grid(double x_min, double x_max, double points_per_unit,
               double margin);

// Density channel plus N sampled data channels on a grid (N = 1 for the
// deterministic ConvDeepsets, N > 1 for the Bayesian variant).
struct FunctionalRepresentation {
  Grid grid;
  std::vector<double> density;
  std::vector<std::vector<double>> data_channels;
};

// Context points are canonically ordered internally so any permutation of
// the input yields bit-identical channels.
std::vector<double> density_channel(const ContextSet& context, const Grid& grid,
                                    const KernelFn& kernel);

// Nadaraya-Watson data channel, denominator floored at 1e-12.
std::vector<double> deterministic_data_channel(const ContextSet& context,
                                               const Grid& grid,
                                               const KernelFn& kernel);

enum class RepresentationMode { Exact, Approx };

struct RandomRepOptions {
  RepresentationMode mode = RepresentationMode::Exact;
  double alpha = 0.5;              // approx mode blend
  double gs_temperature = 0.5;     // Gumbel-softmax temperature
  long filter_half_width = -1;     // approx filter; -1 = bank default
  bool hard_samples = false;       // one-hot z instead of soft samples
};

// Random functional representation: expected-kernel density channel plus N
// independent path-wise posterior draws (z via Gumbel-softmax per draw).
FunctionalRepresentation random_functional_representation(
    const ContextSet& context, const KernelBank& bank,
    const std::vector<double>& probs, long n_samples, long l_spec, Rng& rng,
    const RandomRepOptions& options = {});

// Same, on a caller-supplied grid (the model pipeline owns grid placement).
FunctionalRepresentation random_functional_representation_on(
    const Grid& grid, const ContextSet& context, const KernelBank& bank,
    const std::vector<double>& probs, long n_samples, long l_spec, Rng& rng,
    const RandomRepOptions& options = {});

// Eq.-6 style smoothing of grid channels onto target inputs:
// out[c][j] = sum_m values[c][m] k(x_t[j] - t_m).
std::vector<std::vector<double>> smooth_to_targets(
    const std::vector<std::vector<double>>& grid_values, const Grid& grid,
    const std::vector<double>& targets, const KernelFn& kernel);

// Data-delta channel: y summed into nearest cells, plus occupancy counts.
struct GridBinned {
  std::vector<double> indicator;
  std::vector<double> values;
};

GridBinned bin_to_grid(const ContextSet& context, const Grid& grid);

// Canonical (x, y) ordering shared by the permutation-invariant channels.
ContextSet canonical_order(ContextSet context);

}  // namespace stnp
