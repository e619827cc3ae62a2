#pragma once

#include <map>
#include <string>

#include "stnp/rng.hpp"
#include "stnp/tensor.hpp"

namespace stnp {

// Named trainable tensors. Ordered map so iteration (serialization, gradient
// reductions, finite-difference sweeps) is deterministic.
struct ParamStore {
  std::map<std::string, Tensor> tensors;

  Tensor& at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw ConfigError("ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw ConfigError("ParamStore: unknown parameter '" + name + "'");
    return it->second;
  }
  bool has(const std::string& name) const { return tensors.count(name) > 0; }

  Tensor& create(const std::string& name, Shape shape,
                 std::vector<double> values) {
    auto [it, inserted] =
        tensors.emplace(name, Tensor::param(std::move(shape), std::move(values)));
    if (!inserted)
      throw ConfigError("ParamStore: duplicate parameter '" + name + "'");
    return it->second;
  }

  Tensor& create_random(const std::string& name, Shape shape, Rng& rng,
                        double scale) {
    std::vector<double> v(static_cast<size_t>(numel(shape)));
    for (auto& x : v) x = scale * rng.normal();
    return create(name, std::move(shape), std::move(v));
  }

  long total_size() const {
    long n = 0;
    for (const auto& [name, t] : tensors) n += t.size();
    return n;
  }
};

}  // namespace stnp
