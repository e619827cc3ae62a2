#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stnp/rff_gp.hpp"

namespace stnp {

// One meta-learning task: per-channel context and target sets plus the
// generator metadata needed to reproduce it.
struct Task {
  std::vector<ContextSet> context;
  std::vector<ContextSet> target;
  std::string family;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;  // sampled hyperparameters

  long channels() const { return static_cast<long>(context.size()); }
  long context_size() const {
    long n = 0;
    for (const auto& c : context) n += c.size();
    return n;
  }
  long target_size() const {
    long n = 0;
    for (const auto& t : target) n += t.size();
    return n;
  }
};

}  // namespace stnp
