// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <vector>

#include "polyirt/data_model.hpp"
#include "polyirt/kernels.hpp"

namespace polyirt {

// A single question's category-choice distribution at one predictor value.
// Entries are nonnegative and sum to 1 (log-sum-exp normalization).
struct CategoryDistribution {
  std::vector<double> probs;

  int m() const { return static_cast<int>(probs.size()); }
};

// SPRITE: probs[y] = N(z | mu_y, nu_y) / sum_k N(z | mu_k, nu_k).
CategoryDistribution sprite_category_probs(double z,
                                           const std::vector<double>& means,
                                           const std::vector<double>& vars);

// Ordered-bin probit with an optional label permutation.  interior_bins are
// the M-1 finite edges (increasing); label y receives the probability mass of
// ordered slot permutation[y].  The identity permutation is plain ORD.
CategoryDistribution ord_category_probs(double z,
                                        const std::vector<double>& interior_bins,
                                        const std::vector<int>& permutation);

// Nominal response model: probs[y] proportional to exp(beta_y (theta - alpha_y)).
CategoryDistribution nrm_category_probs(double theta,
                                        const std::vector<double>& betas,
                                        const std::vector<double>& alphas);

// Generalized partial credit: probs[y] proportional to
// exp(sum_{v<=y} beta (theta - alpha_v)).
CategoryDistribution gpcm_category_probs(double theta, double beta,
                                         const std::vector<double>& alphas);

// Kernel tables for one question.  The ORD table folds the question
// difficulty into the bin edges so the kernel consumes raw traits.
kernels::GaussTable sprite_table(const SpriteParams& p, int j);
kernels::ProbitTable ord_table(const OrdParams& p, int j);
kernels::AffineTable nrm_table(const NrmParams& p, int j);
kernels::AffineTable gpcm_table(const GpcmParams& p, int j);

// An assignment for an unobserved cell; category is 0-based.
struct ImputedCell {
  int row;
  int col;
  std::int32_t category;
};

// Sum of log category probabilities over the observed cells, plus the given
// imputed cells when provided.
double dataset_log_likelihood(const ModelParams& params,
                              const ResponseMatrix& data,
                              const std::vector<ImputedCell>* imputed = nullptr);

}  // namespace polyirt
