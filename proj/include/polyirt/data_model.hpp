// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "polyirt/errors.hpp"

namespace polyirt {

// Category indices are 0-based in memory; file formats and error messages
// use the 1-based convention of the data files.
constexpr std::int32_t kMissingCell = -1;

// Missing marker in raw (pre-validation) tables, which carry 1-based values.
constexpr int kNoResponse = 0;

// N x Q polytomous response data with an observation mask.  Immutable after
// validated construction; safe to share across threads for reading.
struct ResponseMatrix {
  int n_respondents = 0;
  int n_questions = 0;
  std::vector<int> categories;           // M_j, length Q
  std::vector<std::int32_t> cells;       // column-major; 0..M_j-1 or kMissingCell
  std::vector<std::uint8_t> observed;    // column-major mask
  std::vector<std::string> respondent_ids;
  std::vector<std::string> question_ids;
  std::vector<int> anchor;               // 0-based anchor category per question

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * n_respondents + i;
  }
  std::int32_t cell(int i, int j) const { return cells[index(i, j)]; }
  bool is_observed(int i, int j) const { return observed[index(i, j)] != 0; }
  const std::int32_t* column(int j) const {
    return cells.data() + static_cast<std::size_t>(j) * n_respondents;
  }
  std::size_t observed_count() const;
  std::vector<std::pair<int, int>> missing_cells() const;  // (i, j) pairs

  bool operator==(const ResponseMatrix&) const = default;
};

// Builds a validated ResponseMatrix from a rectangular raw table whose
// entries are 1-based categories or kNoResponse.  IDs and anchors (1-based)
// are optional; defaults are generated positional IDs and anchor category 1.
ResponseMatrix validate_response_matrix(
    const std::vector<std::vector<int>>& raw, const std::vector<int>& categories,
    std::vector<std::string> respondent_ids = {},
    std::vector<std::string> question_ids = {},
    const std::vector<int>& anchors_one_based = {});

// SPRITE parameters: one Gaussian (mean, variance) per category per question
// plus per-respondent latent traits.  The anchor category of each question is
// pinned to mean 0, variance 1; construction rewrites it unconditionally.
struct SpriteParams {
  std::vector<double> traits;                   // Z_i, length N
  std::vector<std::vector<double>> means;       // Q x M_j
  std::vector<std::vector<double>> vars;        // Q x M_j, all > 0
  std::vector<int> anchor;                      // 0-based, length Q

  int n_questions() const { return static_cast<int>(means.size()); }
  static SpriteParams validated(std::vector<double> traits,
                                std::vector<std::vector<double>> means,
                                std::vector<std::vector<double>> vars,
                                std::vector<int> anchor);
};

// Ordered-bin probit parameters (ORD), optionally with a learned label
// permutation per question (LORD).  bins[j] holds the M_j - 1 finite interior
// edges; the first is pinned at 0.  perms[j][y] is the ordered slot assigned
// to label y; the identity permutation gives plain ORD.
struct OrdParams {
  std::vector<double> traits;                   // theta_i
  std::vector<double> difficulties;             // alpha_j
  std::vector<std::vector<double>> bins;        // Q x (M_j - 1), increasing
  std::vector<std::vector<int>> perms;          // Q x M_j bijections

  static OrdParams validated(std::vector<double> traits,
                             std::vector<double> difficulties,
                             std::vector<std::vector<double>> bins,
                             std::vector<std::vector<int>> perms);
};

// Nominal response model: a (discrimination, difficulty) pair per category.
// The category weights beta_k*(theta - alpha_k) are invariant to adding a
// common constant, so the parameterization is redundant by one degree of
// freedom; the priors regularize it rather than an explicit constraint.
struct NrmParams {
  std::vector<double> traits;
  std::vector<std::vector<double>> betas;       // Q x M_j
  std::vector<std::vector<double>> alphas;      // Q x M_j

  static NrmParams validated(std::vector<double> traits,
                             std::vector<std::vector<double>> betas,
                             std::vector<std::vector<double>> alphas);
};

// Generalized partial credit model: one discrimination per question and M_j
// thresholds.  The first threshold enters every category's cumulative sum and
// cancels in normalization, so it is reported but not identified.
struct GpcmParams {
  std::vector<double> traits;
  std::vector<double> discrimination;           // beta_j
  std::vector<std::vector<double>> thresholds;  // Q x M_j

  static GpcmParams validated(std::vector<double> traits,
                              std::vector<double> discrimination,
                              std::vector<std::vector<double>> thresholds);
};

enum class ModelTag { Sprite, Ord, Lord, Nrm, Gpcm };

using ModelParams = std::variant<SpriteParams, OrdParams, NrmParams, GpcmParams>;

const char* model_tag_name(ModelTag tag);
std::optional<ModelTag> parse_model_tag(const std::string& name);

// Prior hyperparameters.  The trait/mean/variance entries are the SPRITE
// priors; the ord_* entries are the ORD/LORD priors and double as the prior
// variances for the NRM/GPCM baselines (traits via ord_prior_trait_var,
// category parameters via ord_prior_diff_var).  Kept separate from the
// proposal tuning in FitConfig even where symbols coincide.
struct Hyperparams {
  double prior_trait_mean = 0.0;   // mu_z
  double prior_trait_var = 1.0;    // nu_z
  double prior_mean_var = 1.0;     // nu_mu
  double prior_var_shape = 1.0;    // alpha_nu
  double prior_var_scale = 1.0;    // beta_nu
  double ord_prior_trait_var = 1.0;  // nu_theta
  double ord_prior_diff_var = 1.0;   // nu_alpha
  double ord_prior_bin_var = 1.0;    // nu_gamma

  void validate() const;
};

enum class AcceptanceMode { Blockwise, Joint };

// Sampler tuning.  Proposal scales are random-walk standard deviations; the
// variance proposal is inverse-gamma with this shape, re-scaled each step so
// its mean sits at the current value (requires shape > 1).
struct FitConfig {
  int burn_in_iterations = 20000;
  int sample_iterations = 5000;
  double proposal_trait_sd = 0.25;
  double proposal_mean_sd = 0.12;
  double proposal_var_shape = 16.0;
  std::uint64_t rng_seed = 1;
  AcceptanceMode acceptance_mode = AcceptanceMode::Blockwise;
  bool random_init = false;
  int threads = 1;

  void validate() const;
};

}  // namespace polyirt
