#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cmsq/errors.hpp"
#include "cmsq/random.hpp"

namespace cmsq {

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Per class: shuffle member indices with a stream derived from (seed, class),
// put floor(n * train_fraction) in train (capped at n - 1) and the rest in
// validation. Both outputs are returned in ascending index order.
inline SplitIndices stratified_split(std::span<const std::size_t> labels, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw UsageError("train_fraction must be in (0, 1)");
  }
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);

  SplitIndices out;
  for (auto& [label, idx] : members) {
    if (idx.size() < 2) {
      throw DataError("class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                      " example(s); stratified split needs at least 2");
    }
    Rng rng = Rng::derive(spec.seed, label);
    shuffle(std::span<std::size_t>(idx), rng);
    // The 1e-9 guard keeps e.g. 100 * 0.29 from flooring to 28.
    const auto n = idx.size();
    const auto n_train = std::min(
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_fraction + 1e-9)), n - 1);
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.validation.insert(out.validation.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

}  // namespace cmsq
