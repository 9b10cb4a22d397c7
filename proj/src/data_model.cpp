// Apache License, Version 2.0, refer to LICENSE.txt

#include <algorithm>
#include <cmath>

#include "polyirt/data_model.hpp"

#include "fmt_helpers.hpp"

namespace polyirt {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::CategoryOutOfRange: return "CategoryOutOfRange";
    case ErrorCode::EmptyRow: return "EmptyRow";
    case ErrorCode::EmptyColumn: return "EmptyColumn";
    case ErrorCode::BadCategoryCount: return "BadCategoryCount";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::UnorderedBins: return "UnorderedBins";
    case ErrorCode::NotABijection: return "NotABijection";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidDimensions: return "InvalidDimensions";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroTruthNorm: return "ZeroTruthNorm";
    case ErrorCode::PunctureMakesRowEmpty: return "PunctureMakesRowEmpty";
    case ErrorCode::PunctureMakesColumnEmpty: return "PunctureMakesColumnEmpty";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::TooManyCategoriesForPermutationSearch:
      return "TooManyCategoriesForPermutationSearch";
    case ErrorCode::BadFile: return "BadFile";
    case ErrorCode::NonFiniteLikelihood: return "NonFiniteLikelihood";
  }
  return "UnknownError";
}

std::size_t ResponseMatrix::observed_count() const {
  std::size_t c = 0;
  for (auto b : observed) c += b;
  return c;
}

std::vector<std::pair<int, int>> ResponseMatrix::missing_cells() const {
  std::vector<std::pair<int, int>> out;
  for (int j = 0; j < n_questions; ++j)
    for (int i = 0; i < n_respondents; ++i)
      if (!is_observed(i, j)) out.emplace_back(i, j);
  return out;
}

ResponseMatrix validate_response_matrix(
    const std::vector<std::vector<int>>& raw, const std::vector<int>& categories,
    std::vector<std::string> respondent_ids, std::vector<std::string> question_ids,
    const std::vector<int>& anchors_one_based) {
  const int n = static_cast<int>(raw.size());
  const int q = static_cast<int>(categories.size());
  if (n == 0 || q == 0)
    throw ValidationError(ErrorCode::InvalidDimensions,
                          "response table must have at least one row and one question");
  for (int i = 0; i < n; ++i)
    if (static_cast<int>(raw[i].size()) != q)
      throw ValidationError(ErrorCode::InvalidDimensions,
                            cat("row ", i + 1, " has ", raw[i].size(),
                                " entries, expected ", q));
  for (int j = 0; j < q; ++j)
    if (categories[j] < 2)
      throw ValidationError(ErrorCode::BadCategoryCount,
                            cat("question ", j + 1, " has M=", categories[j],
                                ", need at least 2"));

  ResponseMatrix rm;
  rm.n_respondents = n;
  rm.n_questions = q;
  rm.categories = categories;
  rm.cells.assign(static_cast<std::size_t>(n) * q, kMissingCell);
  rm.observed.assign(static_cast<std::size_t>(n) * q, 0);

  std::vector<int> row_count(n, 0), col_count(q, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < q; ++j) {
      const int v = raw[i][j];
      if (v == kNoResponse) continue;
      if (v < 1 || v > categories[j])
        throw ValidationError(ErrorCode::CategoryOutOfRange,
                              cat("entry (", i + 1, ",", j + 1, ") = ", v,
                                  " outside 1..", categories[j]));
      rm.cells[rm.index(i, j)] = v - 1;
      rm.observed[rm.index(i, j)] = 1;
      ++row_count[i];
      ++col_count[j];
    }
  }
  for (int i = 0; i < n; ++i)
    if (row_count[i] == 0)
      throw ValidationError(ErrorCode::EmptyRow,
                            cat("respondent ", i + 1, " has no observed responses"));
  for (int j = 0; j < q; ++j)
    if (col_count[j] == 0)
      throw ValidationError(ErrorCode::EmptyColumn,
                            cat("question ", j + 1, " has no observed responses"));

  if (respondent_ids.empty()) {
    respondent_ids.resize(n);
    for (int i = 0; i < n; ++i) respondent_ids[i] = cat("r", i + 1);
  }
  if (question_ids.empty()) {
    question_ids.resize(q);
    for (int j = 0; j < q; ++j) question_ids[j] = cat("q", j + 1);
  }
  if (static_cast<int>(respondent_ids.size()) != n ||
      static_cast<int>(question_ids.size()) != q)
    throw ValidationError(ErrorCode::DimensionMismatch, "ID list sizes");
  rm.respondent_ids = std::move(respondent_ids);
  rm.question_ids = std::move(question_ids);

  rm.anchor.assign(q, 0);
  if (!anchors_one_based.empty()) {
    if (static_cast<int>(anchors_one_based.size()) != q)
      throw ValidationError(ErrorCode::DimensionMismatch, "anchor list size");
    for (int j = 0; j < q; ++j) {
      if (anchors_one_based[j] < 1 || anchors_one_based[j] > categories[j])
        throw ValidationError(ErrorCode::CategoryOutOfRange,
                              cat("anchor for question ", j + 1, " = ",
                                  anchors_one_based[j]));
      rm.anchor[j] = anchors_one_based[j] - 1;
    }
  }
  return rm;
}

namespace {

void check_traits(const std::vector<double>& traits) {
  if (traits.empty())
    throw ValidationError(ErrorCode::InvalidDimensions, "empty trait vector");
  for (double t : traits)
    if (!std::isfinite(t))
      throw ValidationError(ErrorCode::NonFiniteInput, "latent trait");
}

void check_ragged(const std::vector<std::vector<double>>& a,
                  const std::vector<std::vector<double>>& b,
                  const char* what) {
  if (a.size() != b.size())
    throw ValidationError(ErrorCode::DimensionMismatch, what);
  for (std::size_t j = 0; j < a.size(); ++j)
    if (a[j].size() != b[j].size())
      throw ValidationError(ErrorCode::DimensionMismatch,
                            cat(what, " at question ", j + 1));
}

void check_finite(const std::vector<std::vector<double>>& a, const char* what) {
  for (const auto& row : a)
    for (double v : row)
      if (!std::isfinite(v))
        throw ValidationError(ErrorCode::NonFiniteInput, what);
}

}  // namespace

SpriteParams SpriteParams::validated(std::vector<double> traits,
                                     std::vector<std::vector<double>> means,
                                     std::vector<std::vector<double>> vars,
                                     std::vector<int> anchor) {
  check_traits(traits);
  check_ragged(means, vars, "means/vars");
  check_finite(means, "sprite mean");
  if (anchor.size() != means.size())
    throw ValidationError(ErrorCode::DimensionMismatch, "anchor list");
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (means[j].size() < 2)
      throw ValidationError(ErrorCode::BadCategoryCount,
                            cat("question ", j + 1));
    if (anchor[j] < 0 || anchor[j] >= static_cast<int>(means[j].size()))
      throw ValidationError(ErrorCode::CategoryOutOfRange,
                            cat("anchor for question ", j + 1));
    for (double v : vars[j])
      if (!(v > 0.0) || !std::isfinite(v))
        throw ValidationError(ErrorCode::InvalidArgument,
                              cat("non-positive sprite variance in question ",
                                  j + 1));
    means[j][anchor[j]] = 0.0;
    vars[j][anchor[j]] = 1.0;
  }
  return SpriteParams{std::move(traits), std::move(means), std::move(vars),
                      std::move(anchor)};
}

OrdParams OrdParams::validated(std::vector<double> traits,
                               std::vector<double> difficulties,
                               std::vector<std::vector<double>> bins,
                               std::vector<std::vector<int>> perms) {
  check_traits(traits);
  if (bins.size() != perms.size() || bins.size() != difficulties.size())
    throw ValidationError(ErrorCode::DimensionMismatch, "per-question lists");
  for (double a : difficulties)
    if (!std::isfinite(a))
      throw ValidationError(ErrorCode::NonFiniteInput, "difficulty");
  for (std::size_t j = 0; j < bins.size(); ++j) {
    const int m = static_cast<int>(perms[j].size());
    if (m < 2)
      throw ValidationError(ErrorCode::BadCategoryCount, cat("question ", j + 1));
    if (static_cast<int>(bins[j].size()) != m - 1)
      throw ValidationError(ErrorCode::DimensionMismatch,
                            cat("question ", j + 1, " needs ", m - 1,
                                " interior bins"));
    if (bins[j][0] != 0.0)
      throw ValidationError(ErrorCode::InvalidArgument,
                            cat("first interior bin of question ", j + 1,
                                " must be 0"));
    for (int k = 0; k + 1 < m - 1; ++k)
      if (!(bins[j][k] < bins[j][k + 1]))
        throw ValidationError(ErrorCode::UnorderedBins, cat("question ", j + 1));
    for (double g : bins[j])
      if (!std::isfinite(g))
        throw ValidationError(ErrorCode::NonFiniteInput, "bin edge");
    std::vector<bool> seen(m, false);
    for (int v : perms[j]) {
      if (v < 0 || v >= m || seen[v])
        throw ValidationError(ErrorCode::NotABijection, cat("question ", j + 1));
      seen[v] = true;
    }
  }
  return OrdParams{std::move(traits), std::move(difficulties), std::move(bins),
                   std::move(perms)};
}

NrmParams NrmParams::validated(std::vector<double> traits,
                               std::vector<std::vector<double>> betas,
                               std::vector<std::vector<double>> alphas) {
  check_traits(traits);
  check_ragged(betas, alphas, "betas/alphas");
  check_finite(betas, "discrimination");
  check_finite(alphas, "difficulty");
  return NrmParams{std::move(traits), std::move(betas), std::move(alphas)};
}

GpcmParams GpcmParams::validated(std::vector<double> traits,
                                 std::vector<double> discrimination,
                                 std::vector<std::vector<double>> thresholds) {
  check_traits(traits);
  if (discrimination.size() != thresholds.size())
    throw ValidationError(ErrorCode::DimensionMismatch, "per-question lists");
  for (double b : discrimination)
    if (!std::isfinite(b))
      throw ValidationError(ErrorCode::NonFiniteInput, "discrimination");
  check_finite(thresholds, "threshold");
  return GpcmParams{std::move(traits), std::move(discrimination),
                    std::move(thresholds)};
}

const char* model_tag_name(ModelTag tag) {
  switch (tag) {
    case ModelTag::Sprite: return "sprite";
    case ModelTag::Ord: return "ord";
    case ModelTag::Lord: return "lord";
    case ModelTag::Nrm: return "nrm";
    case ModelTag::Gpcm: return "gpcm";
  }
  return "?";
}

std::optional<ModelTag> parse_model_tag(const std::string& name) {
  if (name == "sprite") return ModelTag::Sprite;
  if (name == "ord") return ModelTag::Ord;
  if (name == "lord") return ModelTag::Lord;
  if (name == "nrm") return ModelTag::Nrm;
  if (name == "gpcm") return ModelTag::Gpcm;
  return std::nullopt;
}

void Hyperparams::validate() const {
  const double fields[] = {prior_trait_var, prior_mean_var, prior_var_shape,
                           prior_var_scale, ord_prior_trait_var,
                           ord_prior_diff_var, ord_prior_bin_var};
  for (double f : fields)
    if (!(f > 0.0) || !std::isfinite(f))
      throw ValidationError(ErrorCode::InvalidArgument,
                            "hyperparameter variances/shapes must be positive");
  if (!std::isfinite(prior_trait_mean))
    throw ValidationError(ErrorCode::NonFiniteInput, "prior trait mean");
}

void FitConfig::validate() const {
  if (burn_in_iterations < 0 || sample_iterations < 0)
    throw ValidationError(ErrorCode::InvalidArgument, "negative iteration count");
  if (burn_in_iterations + sample_iterations < 1)
    throw ValidationError(ErrorCode::InvalidArgument,
                          "total iterations must be at least 1");
  if (sample_iterations < 1)
    throw ValidationError(ErrorCode::InvalidArgument,
                          "need at least one sampling iteration to summarize");
  if (!(proposal_trait_sd > 0.0) || !(proposal_mean_sd > 0.0))
    throw ValidationError(ErrorCode::InvalidArgument,
                          "proposal standard deviations must be positive");
  if (!(proposal_var_shape > 1.0))
    throw ValidationError(ErrorCode::InvalidArgument,
                          "proposal_var_shape must exceed 1");
  if (threads < 1)
    throw ValidationError(ErrorCode::InvalidArgument, "threads must be >= 1");
}

}  // namespace polyirt
