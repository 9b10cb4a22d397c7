// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>

#include "polyirt/data_model.hpp"

namespace polyirt {

// Ground truth plus the data generated from it; the matrix is fully observed.
struct SyntheticInstance {
  SpriteParams truth;
  ResponseMatrix data;
  Hyperparams hyper;
  std::uint64_t seed = 0;
};

// Draws SPRITE parameters from their priors (anchors pinned to mean 0,
// variance 1) and a complete n x q response matrix from the induced category
// distributions.  Same (arguments, seed) give an identical instance.
SyntheticInstance generate(int n, int q, int m, const Hyperparams& hyper,
                           std::uint64_t seed);

}  // namespace polyirt
