// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "polyirt/data_model.hpp"
#include "polyirt/likelihoods.hpp"
#include "polyirt/rng.hpp"

namespace polyirt {

// One diagnostics row per MCMC iteration (burn-in included).  The acceptance
// columns are that iteration's accepted fraction of the respective block; in
// joint mode both columns carry the joint accept indicator.
struct TraceRow {
  int iteration;
  double log_likelihood;
  double accept_rate_traits;
  double accept_rate_questions;
};

// Whole-run acceptance fractions per proposal block; entries are negative
// when the block does not exist for the fitted model/mode.
struct AcceptanceRates {
  double traits = -1.0;
  double questions = -1.0;
  double permutations = -1.0;
  double joint = -1.0;
};

struct ImputedMode {
  int row;
  int col;
  std::int32_t category;  // 0-based posterior-mode category
};

// Post-burn-in posterior means for continuous parameters, posterior modes
// for imputed responses, and (for LORD) the most-visited permutation per
// question, which is also installed in mean_params.
struct PosteriorSummary {
  ModelTag model = ModelTag::Sprite;
  std::vector<double> trait_means;
  ModelParams mean_params;
  std::vector<ImputedMode> imputed_modes;
  AcceptanceRates acceptance;
  std::optional<std::vector<std::vector<int>>> permutation_mode;
  int burn_in = 0;
  int samples = 0;
  std::uint64_t seed = 0;
};

struct FitResult {
  PosteriorSummary summary;
  std::vector<TraceRow> trace;
  // Number of iterations whose stored state violated a structural invariant
  // (pinned anchors, bin ordering).  Always 0; tracked so tests can assert it.
  int invariant_violations = 0;
};

// Metropolis-Hastings acceptance rule.  Consumes exactly one uniform draw and
// accepts with probability min(1, exp(delta_loglike + delta_logprior +
// log_hastings)).
bool mh_accept(double log_like_new, double log_like_old, double log_prior_new,
               double log_prior_old, double log_hastings, RngStream& rng);

// Mean-preserving inverse-gamma random-walk proposal for a variance: draws
// from IG(shape, current*(shape-1)), whose mean is the current value.
double propose_variance(double current, double shape, RngStream& rng);

// Log density of the above proposal, for the Hastings correction.
double variance_proposal_log_density(double proposed, double center,
                                     double shape);

// One question's SPRITE block proposal: Gaussian walks on the non-anchor
// means, mean-preserving inverse-gamma draws for the non-anchor variances.
// log_hastings is log q(old|new) - log q(new|old) (zero for the mean walks);
// log_prior_delta is the proposal's prior log-density change.
struct SpriteQuestionProposal {
  std::vector<double> means;
  std::vector<double> vars;
  double log_hastings = 0.0;
  double log_prior_delta = 0.0;
};
SpriteQuestionProposal propose_sprite_question(const SpriteParams& params,
                                               int j, const Hyperparams& hyper,
                                               double proposal_mean_sd,
                                               double proposal_var_shape,
                                               RngStream& rng);

// Redraws every assignment from its exact categorical distribution under the
// given parameters.  Assignments must reference unobserved cells.
void gibbs_impute(const ModelParams& params, const ResponseMatrix& data,
                  std::vector<ImputedCell>& assignments, RngStream& rng);

// One MH move on question j's label permutation: proposes a uniformly random
// transposition (symmetric, so no Hastings term) and accepts by likelihood
// ratio over the question's column.  column holds the complete (observed plus
// imputed) 0-based responses for question j.  Requires M_j <= 8.
bool sample_permutation(OrdParams& params, int j, const std::int32_t* column,
                        int n_respondents, RngStream& rng);

// Runs the Metropolis-within-Gibbs chain for the given model on the data.
// Identical (seed, config, data) produce bit-identical results.
FitResult run_chain(ModelTag tag, const ResponseMatrix& data,
                    const Hyperparams& hyper, const FitConfig& config);

}  // namespace polyirt
