// Apache License, Version 2.0, refer to LICENSE.txt

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <unordered_map>

#include "polyirt/sampler.hpp"

#include "fmt_helpers.hpp"

namespace polyirt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var)) - d * d / (2.0 * var);
}

double invgamma_logpdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - scale / x;
}

// Inverse standard normal CDF by bisection; init-time use only.
double normal_quantile(double p) {
  double lo = -12.0, hi = 12.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (kernels::normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

int pick_category(const double* probs, int m, double u) {
  double c = 0.0;
  for (int k = 0; k < m; ++k) {
    c += probs[k];
    if (u < c) return k;
  }
  return m - 1;
}

}  // namespace

bool mh_accept(double log_like_new, double log_like_old, double log_prior_new,
               double log_prior_old, double log_hastings, RngStream& rng) {
  const double delta = (log_like_new - log_like_old) +
                       (log_prior_new - log_prior_old) + log_hastings;
  return rng.uniform() < std::exp(delta);
}

double propose_variance(double current, double shape, RngStream& rng) {
  return rng.inverse_gamma(shape, current * (shape - 1.0));
}

double variance_proposal_log_density(double proposed, double center,
                                     double shape) {
  return invgamma_logpdf(proposed, shape, center * (shape - 1.0));
}

namespace {

SpriteQuestionProposal propose_sprite_question_impl(
    const std::vector<double>& means, const std::vector<double>& vars,
    int anchor, const Hyperparams& hyper, double mean_sd, double var_shape,
    RngStream& rng) {
  SpriteQuestionProposal prop;
  prop.means = means;
  prop.vars = vars;
  const int m = static_cast<int>(means.size());
  for (int k = 0; k < m; ++k)
    if (k != anchor) prop.means[k] = means[k] + mean_sd * rng.normal();
  for (int k = 0; k < m; ++k)
    if (k != anchor) prop.vars[k] = propose_variance(vars[k], var_shape, rng);
  for (int k = 0; k < m; ++k) {
    if (k == anchor) continue;
    prop.log_hastings +=
        variance_proposal_log_density(vars[k], prop.vars[k], var_shape) -
        variance_proposal_log_density(prop.vars[k], vars[k], var_shape);
    prop.log_prior_delta +=
        normal_logpdf(prop.means[k], 0.0, hyper.prior_mean_var) -
        normal_logpdf(means[k], 0.0, hyper.prior_mean_var) +
        invgamma_logpdf(prop.vars[k], hyper.prior_var_shape,
                        hyper.prior_var_scale) -
        invgamma_logpdf(vars[k], hyper.prior_var_shape, hyper.prior_var_scale);
  }
  return prop;
}

}  // namespace

SpriteQuestionProposal propose_sprite_question(const SpriteParams& params,
                                               int j, const Hyperparams& hyper,
                                               double proposal_mean_sd,
                                               double proposal_var_shape,
                                               RngStream& rng) {
  return propose_sprite_question_impl(params.means[j], params.vars[j],
                                      params.anchor[j], hyper,
                                      proposal_mean_sd, proposal_var_shape,
                                      rng);
}

void gibbs_impute(const ModelParams& params, const ResponseMatrix& data,
                  std::vector<ImputedCell>& assignments, RngStream& rng) {
  std::vector<double> probs;
  for (auto& cell : assignments) {
    if (cell.row < 0 || cell.row >= data.n_respondents || cell.col < 0 ||
        cell.col >= data.n_questions)
      throw ValidationError(ErrorCode::DimensionMismatch, "imputed cell index");
    if (data.is_observed(cell.row, cell.col))
      throw ValidationError(ErrorCode::InvalidArgument,
                            "cell to impute is observed");
    const int j = cell.col;
    CategoryDistribution d;
    if (const auto* p = std::get_if<SpriteParams>(&params)) {
      d = sprite_category_probs(p->traits[cell.row], p->means[j], p->vars[j]);
    } else if (const auto* p = std::get_if<OrdParams>(&params)) {
      const auto table = ord_table(*p, j);
      d.probs.resize(table.m());
      kernels::probit_probs(p->traits[cell.row], table, d.probs.data());
    } else if (const auto* p = std::get_if<NrmParams>(&params)) {
      d = nrm_category_probs(p->traits[cell.row], p->betas[j], p->alphas[j]);
    } else {
      const auto& p = std::get<GpcmParams>(params);
      d = gpcm_category_probs(p.traits[cell.row], p.discrimination[j],
                              p.thresholds[j]);
    }
    cell.category = pick_category(d.probs.data(), d.m(), rng.uniform());
  }
}

namespace {

// Builds the slot-edge table for one question; bins are the interior edges
// and the difficulty shifts them into raw-trait space.
kernels::ProbitTable make_probit_table(const std::vector<double>& bins,
                                       const std::vector<int>& perm,
                                       double difficulty) {
  const int m = static_cast<int>(perm.size());
  kernels::ProbitTable t;
  t.lo.resize(m);
  t.hi.resize(m);
  for (int y = 0; y < m; ++y) {
    const int s = perm[y];
    t.lo[y] = s == 0 ? kNegInf : bins[s - 1] + difficulty;
    t.hi[y] = s == m - 1 ? std::numeric_limits<double>::infinity()
                         : bins[s] + difficulty;
  }
  return t;
}

using kernels::log_normal_interval;

bool permutation_move_impl(OrdParams& params, int j,
                           const std::int32_t* column, int n, RngStream& rng,
                           double* delta_ll) {
  auto& perm = params.perms[j];
  const int m = static_cast<int>(perm.size());
  if (m > 8)
    throw ValidationError(ErrorCode::TooManyCategoriesForPermutationSearch,
                          cat("question ", j + 1, " has M=", m));
  int a = static_cast<int>(rng.uniform_below(m));
  int b = static_cast<int>(rng.uniform_below(m - 1));
  if (b >= a) ++b;
  std::vector<int> prop = perm;
  std::swap(prop[a], prop[b]);

  const auto cur_table = make_probit_table(params.bins[j], perm,
                                           params.difficulties[j]);
  const auto new_table = make_probit_table(params.bins[j], prop,
                                           params.difficulties[j]);
  double ll_old = 0.0, ll_new = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::int32_t y = column[i];
    if (y == kMissingCell) continue;
    const double z = params.traits[i];
    ll_old += log_normal_interval(cur_table.lo[y] - z, cur_table.hi[y] - z);
    ll_new += log_normal_interval(new_table.lo[y] - z, new_table.hi[y] - z);
  }
  if (mh_accept(ll_new, ll_old, 0.0, 0.0, 0.0, rng)) {
    perm = std::move(prop);
    *delta_ll = ll_new - ll_old;
    return true;
  }
  *delta_ll = 0.0;
  return false;
}

}  // namespace

bool sample_permutation(OrdParams& params, int j, const std::int32_t* column,
                        int n_respondents, RngStream& rng) {
  double dll = 0.0;
  return permutation_move_impl(params, j, column, n_respondents, rng, &dll);
}

// ---------------------------------------------------------------------------
// Chain drivers: per-model parameter state, proposals, and batch evaluation.
// ---------------------------------------------------------------------------

namespace {

class Driver {
 public:
  Driver(const ResponseMatrix& data, const Hyperparams& hyper,
         const FitConfig& cfg)
      : data_(data), hyper_(hyper), cfg_(cfg) {}
  virtual ~Driver() = default;

  virtual void init(RngStream& rng) = 0;
  virtual std::vector<double>& traits() = 0;
  virtual double trait_log_prior(double z) const = 0;

  virtual void eval_current(int j, const double* z, const std::int32_t* y,
                            std::size_t n, double* out) const = 0;
  virtual void probs_current(int j, double z, double* probs,
                             double* logp) const = 0;

  // Blockwise MH move on question j's parameters; *delta_ll receives the
  // applied likelihood change (0 when rejected).
  virtual bool question_step(int j, const std::int32_t* ycol, RngStream& rng,
                             double* delta_ll) = 0;

  // Joint mode: stages a proposal for every question and returns its total
  // log prior delta plus Hastings correction (-inf if structurally invalid).
  virtual double propose_all_questions(RngStream& rng) = 0;
  virtual void eval_proposed(int j, const double* z, const std::int32_t* y,
                             std::size_t n, double* out) const = 0;
  virtual void commit_proposed() = 0;

  virtual bool has_permutations() const { return false; }
  virtual bool permutation_step(int /*j*/, const std::int32_t* /*ycol*/,
                                RngStream& /*rng*/, double* /*delta_ll*/) {
    return false;
  }

  virtual bool invariants_ok() const = 0;
  virtual void accumulate() = 0;
  virtual ModelParams mean_params(int samples,
                                  std::vector<double> trait_means) const = 0;
  virtual std::optional<std::vector<std::vector<int>>> modal_permutations()
      const {
    return std::nullopt;
  }

 protected:
  const ResponseMatrix& data_;
  const Hyperparams& hyper_;
  const FitConfig& cfg_;
};

class SpriteDriver final : public Driver {
 public:
  using Driver::Driver;

  void init(RngStream& rng) override {
    const int n = data_.n_respondents;
    const int q = data_.n_questions;
    cur_.traits.assign(n, 0.0);
    cur_.anchor = data_.anchor;
    cur_.means.resize(q);
    cur_.vars.resize(q);
    for (int j = 0; j < q; ++j) {
      cur_.means[j].assign(data_.categories[j], 0.0);
      cur_.vars[j].assign(data_.categories[j], 1.0);
    }
    if (cfg_.random_init) {
      for (double& z : cur_.traits)
        z = rng.normal(hyper_.prior_trait_mean,
                       std::sqrt(hyper_.prior_trait_var));
      for (int j = 0; j < q; ++j)
        for (int k = 0; k < data_.categories[j]; ++k) {
          if (k == cur_.anchor[j]) continue;
          cur_.means[j][k] = rng.normal(0.0, std::sqrt(hyper_.prior_mean_var));
          cur_.vars[j][k] = rng.inverse_gamma(hyper_.prior_var_shape,
                                              hyper_.prior_var_scale);
        }
    }
    tables_.resize(q);
    for (int j = 0; j < q; ++j) rebuild(j);
    prop_ = cur_;
    prop_tables_ = tables_;
    mean_sum_ = cur_.means;
    var_sum_ = cur_.vars;
    for (auto& v : mean_sum_) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : var_sum_) std::fill(v.begin(), v.end(), 0.0);
    buf_old_.resize(n);
    buf_new_.resize(n);
  }

  std::vector<double>& traits() override { return cur_.traits; }

  double trait_log_prior(double z) const override {
    return normal_logpdf(z, hyper_.prior_trait_mean, hyper_.prior_trait_var);
  }

  void eval_current(int j, const double* z, const std::int32_t* y,
                    std::size_t n, double* out) const override {
    kernels::gauss_cell_loglik(z, y, n, tables_[j], out);
  }

  void probs_current(int j, double z, double* probs,
                     double* logp) const override {
    kernels::gauss_probs(z, tables_[j], probs, logp);
  }

  bool question_step(int j, const std::int32_t* ycol, RngStream& rng,
                     double* delta_ll) override {
    auto prop = propose_sprite_question_impl(
        cur_.means[j], cur_.vars[j], cur_.anchor[j], hyper_,
        cfg_.proposal_mean_sd, cfg_.proposal_var_shape, rng);
    const auto table = kernels::GaussTable::build(prop.means, prop.vars);
    const int n = data_.n_respondents;
    kernels::gauss_cell_loglik(cur_.traits.data(), ycol, n, tables_[j],
                               buf_old_.data());
    kernels::gauss_cell_loglik(cur_.traits.data(), ycol, n, table,
                               buf_new_.data());
    double dll = 0.0;
    for (int i = 0; i < n; ++i) dll += buf_new_[i] - buf_old_[i];
    if (mh_accept(dll, 0.0, prop.log_prior_delta, 0.0, prop.log_hastings,
                  rng)) {
      cur_.means[j] = std::move(prop.means);
      cur_.vars[j] = std::move(prop.vars);
      tables_[j] = table;
      *delta_ll = dll;
      return true;
    }
    *delta_ll = 0.0;
    return false;
  }

  double propose_all_questions(RngStream& rng) override {
    double total = 0.0;
    for (int j = 0; j < data_.n_questions; ++j) {
      auto prop = propose_sprite_question_impl(
          cur_.means[j], cur_.vars[j], cur_.anchor[j], hyper_,
          cfg_.proposal_mean_sd, cfg_.proposal_var_shape, rng);
      total += prop.log_prior_delta + prop.log_hastings;
      prop_.means[j] = std::move(prop.means);
      prop_.vars[j] = std::move(prop.vars);
      prop_tables_[j] = kernels::GaussTable::build(prop_.means[j],
                                                   prop_.vars[j]);
    }
    return total;
  }

  void eval_proposed(int j, const double* z, const std::int32_t* y,
                     std::size_t n, double* out) const override {
    kernels::gauss_cell_loglik(z, y, n, prop_tables_[j], out);
  }

  void commit_proposed() override {
    cur_.means.swap(prop_.means);
    cur_.vars.swap(prop_.vars);
    tables_.swap(prop_tables_);
  }

  bool invariants_ok() const override {
    for (int j = 0; j < data_.n_questions; ++j) {
      const int a = cur_.anchor[j];
      if (cur_.means[j][a] != 0.0 || cur_.vars[j][a] != 1.0) return false;
      for (double v : cur_.vars[j])
        if (!(v > 0.0)) return false;
    }
    return true;
  }

  void accumulate() override {
    for (std::size_t j = 0; j < mean_sum_.size(); ++j)
      for (std::size_t k = 0; k < mean_sum_[j].size(); ++k) {
        mean_sum_[j][k] += cur_.means[j][k];
        var_sum_[j][k] += cur_.vars[j][k];
      }
  }

  ModelParams mean_params(int samples,
                          std::vector<double> trait_means) const override {
    auto means = mean_sum_;
    auto vars = var_sum_;
    for (auto& v : means)
      for (double& x : v) x /= samples;
    for (auto& v : vars)
      for (double& x : v) x /= samples;
    return SpriteParams::validated(std::move(trait_means), std::move(means),
                                   std::move(vars), cur_.anchor);
  }

 private:
  void rebuild(int j) {
    tables_[j] = kernels::GaussTable::build(cur_.means[j], cur_.vars[j]);
  }

  SpriteParams cur_, prop_;
  std::vector<kernels::GaussTable> tables_, prop_tables_;
  std::vector<std::vector<double>> mean_sum_, var_sum_;
  std::vector<double> buf_old_, buf_new_;
};

class OrdDriver final : public Driver {
 public:
  OrdDriver(const ResponseMatrix& data, const Hyperparams& hyper,
            const FitConfig& cfg, bool learn_permutations)
      : Driver(data, hyper, cfg), lord_(learn_permutations) {}

  void init(RngStream& rng) override {
    const int n = data_.n_respondents;
    const int q = data_.n_questions;
    cur_.traits.assign(n, 0.0);
    cur_.difficulties.assign(q, 0.0);
    cur_.bins.resize(q);
    cur_.perms.resize(q);
    for (int j = 0; j < q; ++j) {
      const int m = data_.categories[j];
      if (lord_ && m > 8)
        throw ValidationError(
            ErrorCode::TooManyCategoriesForPermutationSearch,
            cat("question ", j + 1, " has M=", m, "; LORD supports M <= 8"));
      // Standard-normal quantile spacing, shifted so the first edge is 0.
      cur_.bins[j].resize(m - 1);
      const double base = normal_quantile(1.0 / m);
      for (int k = 0; k < m - 1; ++k)
        cur_.bins[j][k] = normal_quantile(static_cast<double>(k + 1) / m) - base;
      cur_.bins[j][0] = 0.0;
      cur_.perms[j].resize(m);
      for (int k = 0; k < m; ++k) cur_.perms[j][k] = k;
    }
    if (cfg_.random_init) {
      for (double& z : cur_.traits)
        z = rng.normal(0.0, std::sqrt(hyper_.ord_prior_trait_var));
      for (double& a : cur_.difficulties)
        a = rng.normal(0.0, std::sqrt(hyper_.ord_prior_diff_var));
      for (int j = 0; j < q; ++j)
        for (std::size_t k = 1; k < cur_.bins[j].size(); ++k)
          cur_.bins[j][k] =
              cur_.bins[j][k - 1] +
              std::abs(rng.normal(0.0, std::sqrt(hyper_.ord_prior_bin_var))) +
              1e-6;
    }
    tables_.resize(q);
    for (int j = 0; j < q; ++j) rebuild(j);
    prop_ = cur_;
    prop_tables_ = tables_;
    diff_sum_.assign(q, 0.0);
    bin_sum_ = cur_.bins;
    for (auto& v : bin_sum_) std::fill(v.begin(), v.end(), 0.0);
    perm_counts_.assign(q, {});
    buf_old_.resize(n);
    buf_new_.resize(n);
  }

  std::vector<double>& traits() override { return cur_.traits; }

  double trait_log_prior(double z) const override {
    return normal_logpdf(z, 0.0, hyper_.ord_prior_trait_var);
  }

  void eval_current(int j, const double* z, const std::int32_t* y,
                    std::size_t n, double* out) const override {
    kernels::probit_cell_loglik(z, y, n, tables_[j], out);
  }

  void probs_current(int j, double z, double* probs,
                     double* logp) const override {
    kernels::probit_probs(z, tables_[j], probs, logp);
  }

  bool question_step(int j, const std::int32_t* ycol, RngStream& rng,
                     double* delta_ll) override {
    *delta_ll = 0.0;
    const int m = data_.categories[j];
    const double d_new =
        cur_.difficulties[j] + cfg_.proposal_mean_sd * rng.normal();
    std::vector<double> bins = cur_.bins[j];
    for (int k = 1; k < m - 1; ++k)
      bins[k] = cur_.bins[j][k] + cfg_.proposal_mean_sd * rng.normal();
    for (int k = 1; k < m - 1; ++k)
      if (!(bins[k] > bins[k - 1])) return false;  // outside ordered support

    double lp = normal_logpdf(d_new, 0.0, hyper_.ord_prior_diff_var) -
                normal_logpdf(cur_.difficulties[j], 0.0,
                              hyper_.ord_prior_diff_var);
    for (int k = 1; k < m - 1; ++k)
      lp += normal_logpdf(bins[k], 0.0, hyper_.ord_prior_bin_var) -
            normal_logpdf(cur_.bins[j][k], 0.0, hyper_.ord_prior_bin_var);

    const auto table = make_probit_table(bins, cur_.perms[j], d_new);
    const int n = data_.n_respondents;
    kernels::probit_cell_loglik(cur_.traits.data(), ycol, n, tables_[j],
                                buf_old_.data());
    kernels::probit_cell_loglik(cur_.traits.data(), ycol, n, table,
                                buf_new_.data());
    double dll = 0.0;
    for (int i = 0; i < n; ++i) dll += buf_new_[i] - buf_old_[i];
    if (mh_accept(dll, 0.0, lp, 0.0, 0.0, rng)) {
      cur_.difficulties[j] = d_new;
      cur_.bins[j] = std::move(bins);
      tables_[j] = table;
      *delta_ll = dll;
      return true;
    }
    return false;
  }

  double propose_all_questions(RngStream& rng) override {
    double total = 0.0;
    bool valid = true;
    for (int j = 0; j < data_.n_questions; ++j) {
      const int m = data_.categories[j];
      prop_.difficulties[j] =
          cur_.difficulties[j] + cfg_.proposal_mean_sd * rng.normal();
      prop_.bins[j] = cur_.bins[j];
      for (int k = 1; k < m - 1; ++k)
        prop_.bins[j][k] =
            cur_.bins[j][k] + cfg_.proposal_mean_sd * rng.normal();
      for (int k = 1; k < m - 1; ++k)
        if (!(prop_.bins[j][k] > prop_.bins[j][k - 1])) valid = false;
      if (!valid) continue;
      total += normal_logpdf(prop_.difficulties[j], 0.0,
                             hyper_.ord_prior_diff_var) -
               normal_logpdf(cur_.difficulties[j], 0.0,
                             hyper_.ord_prior_diff_var);
      for (int k = 1; k < m - 1; ++k)
        total += normal_logpdf(prop_.bins[j][k], 0.0, hyper_.ord_prior_bin_var) -
                 normal_logpdf(cur_.bins[j][k], 0.0, hyper_.ord_prior_bin_var);
      prop_tables_[j] = make_probit_table(prop_.bins[j], cur_.perms[j],
                                          prop_.difficulties[j]);
    }
    return valid ? total : kNegInf;
  }

  void eval_proposed(int j, const double* z, const std::int32_t* y,
                     std::size_t n, double* out) const override {
    kernels::probit_cell_loglik(z, y, n, prop_tables_[j], out);
  }

  void commit_proposed() override {
    cur_.difficulties.swap(prop_.difficulties);
    cur_.bins.swap(prop_.bins);
    tables_.swap(prop_tables_);
  }

  bool has_permutations() const override { return lord_; }

  bool permutation_step(int j, const std::int32_t* ycol, RngStream& rng,
                        double* delta_ll) override {
    const bool accepted =
        permutation_move_impl(cur_, j, ycol, data_.n_respondents, rng,
                              delta_ll);
    if (accepted) rebuild(j);
    return accepted;
  }

  bool invariants_ok() const override {
    for (const auto& bins : cur_.bins) {
      if (bins[0] != 0.0) return false;
      for (std::size_t k = 0; k + 1 < bins.size(); ++k)
        if (!(bins[k] < bins[k + 1])) return false;
    }
    return true;
  }

  void accumulate() override {
    for (int j = 0; j < data_.n_questions; ++j) {
      diff_sum_[j] += cur_.difficulties[j];
      for (std::size_t k = 0; k < cur_.bins[j].size(); ++k)
        bin_sum_[j][k] += cur_.bins[j][k];
      if (lord_) {
        std::uint64_t code = 0;
        for (std::size_t k = 0; k < cur_.perms[j].size(); ++k)
          code |= static_cast<std::uint64_t>(cur_.perms[j][k]) << (4 * k);
        ++perm_counts_[j][code];
      }
    }
  }

  ModelParams mean_params(int samples,
                          std::vector<double> trait_means) const override {
    std::vector<double> diffs(diff_sum_);
    for (double& d : diffs) d /= samples;
    auto bins = bin_sum_;
    for (auto& v : bins)
      for (double& x : v) x /= samples;
    auto perms = cur_.perms;
    if (lord_) perms = *modal_permutations();
    return OrdParams::validated(std::move(trait_means), std::move(diffs),
                                std::move(bins), std::move(perms));
  }

  std::optional<std::vector<std::vector<int>>> modal_permutations()
      const override {
    if (!lord_) return std::nullopt;
    std::vector<std::vector<int>> out(data_.n_questions);
    for (int j = 0; j < data_.n_questions; ++j) {
      std::uint64_t best_code = 0;
      std::uint64_t best_count = 0;
      for (const auto& [code, count] : perm_counts_[j]) {
        if (count > best_count ||
            (count == best_count && code < best_code)) {
          best_code = code;
          best_count = count;
        }
      }
      const int m = data_.categories[j];
      out[j].resize(m);
      for (int k = 0; k < m; ++k)
        out[j][k] = static_cast<int>((best_code >> (4 * k)) & 0xf);
    }
    return out;
  }

 private:
  void rebuild(int j) {
    tables_[j] = make_probit_table(cur_.bins[j], cur_.perms[j],
                                   cur_.difficulties[j]);
  }

  bool lord_;
  OrdParams cur_, prop_;
  std::vector<kernels::ProbitTable> tables_, prop_tables_;
  std::vector<double> diff_sum_;
  std::vector<std::vector<double>> bin_sum_;
  std::vector<std::unordered_map<std::uint64_t, std::uint64_t>> perm_counts_;
  std::vector<double> buf_old_, buf_new_;
};

// NRM and GPCM share the affine-softmax evaluation; the policy object maps
// between the parameter containers and per-question weight tables.
class NrmDriver final : public Driver {
 public:
  using Driver::Driver;

  void init(RngStream& rng) override {
    const int n = data_.n_respondents;
    const int q = data_.n_questions;
    cur_.traits.assign(n, 0.0);
    cur_.betas.resize(q);
    cur_.alphas.resize(q);
    for (int j = 0; j < q; ++j) {
      cur_.betas[j].assign(data_.categories[j], 0.0);
      cur_.alphas[j].assign(data_.categories[j], 0.0);
    }
    if (cfg_.random_init) {
      const double sd = std::sqrt(hyper_.ord_prior_diff_var);
      for (double& z : cur_.traits)
        z = rng.normal(0.0, std::sqrt(hyper_.ord_prior_trait_var));
      for (int j = 0; j < q; ++j)
        for (int k = 0; k < data_.categories[j]; ++k) {
          cur_.betas[j][k] = rng.normal(0.0, sd);
          cur_.alphas[j][k] = rng.normal(0.0, sd);
        }
    }
    tables_.resize(q);
    for (int j = 0; j < q; ++j) rebuild(j);
    prop_ = cur_;
    prop_tables_ = tables_;
    beta_sum_ = cur_.betas;
    alpha_sum_ = cur_.alphas;
    for (auto& v : beta_sum_) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : alpha_sum_) std::fill(v.begin(), v.end(), 0.0);
    buf_old_.resize(n);
    buf_new_.resize(n);
  }

  std::vector<double>& traits() override { return cur_.traits; }

  double trait_log_prior(double z) const override {
    return normal_logpdf(z, 0.0, hyper_.ord_prior_trait_var);
  }

  void eval_current(int j, const double* z, const std::int32_t* y,
                    std::size_t n, double* out) const override {
    kernels::affine_cell_loglik(z, y, n, tables_[j], out);
  }

  void probs_current(int j, double z, double* probs,
                     double* logp) const override {
    kernels::affine_probs(z, tables_[j], probs, logp);
  }

  bool question_step(int j, const std::int32_t* ycol, RngStream& rng,
                     double* delta_ll) override {
    *delta_ll = 0.0;
    const int m = data_.categories[j];
    std::vector<double> betas(m), alphas(m);
    double lp = 0.0;
    for (int k = 0; k < m; ++k)
      betas[k] = cur_.betas[j][k] + cfg_.proposal_mean_sd * rng.normal();
    for (int k = 0; k < m; ++k)
      alphas[k] = cur_.alphas[j][k] + cfg_.proposal_mean_sd * rng.normal();
    for (int k = 0; k < m; ++k)
      lp += normal_logpdf(betas[k], 0.0, hyper_.ord_prior_diff_var) -
            normal_logpdf(cur_.betas[j][k], 0.0, hyper_.ord_prior_diff_var) +
            normal_logpdf(alphas[k], 0.0, hyper_.ord_prior_diff_var) -
            normal_logpdf(cur_.alphas[j][k], 0.0, hyper_.ord_prior_diff_var);
    const auto table = build_table(betas, alphas);
    const int n = data_.n_respondents;
    kernels::affine_cell_loglik(cur_.traits.data(), ycol, n, tables_[j],
                                buf_old_.data());
    kernels::affine_cell_loglik(cur_.traits.data(), ycol, n, table,
                                buf_new_.data());
    double dll = 0.0;
    for (int i = 0; i < n; ++i) dll += buf_new_[i] - buf_old_[i];
    if (mh_accept(dll, 0.0, lp, 0.0, 0.0, rng)) {
      cur_.betas[j] = std::move(betas);
      cur_.alphas[j] = std::move(alphas);
      tables_[j] = table;
      *delta_ll = dll;
      return true;
    }
    return false;
  }

  double propose_all_questions(RngStream& rng) override {
    double total = 0.0;
    for (int j = 0; j < data_.n_questions; ++j) {
      const int m = data_.categories[j];
      for (int k = 0; k < m; ++k)
        prop_.betas[j][k] =
            cur_.betas[j][k] + cfg_.proposal_mean_sd * rng.normal();
      for (int k = 0; k < m; ++k)
        prop_.alphas[j][k] =
            cur_.alphas[j][k] + cfg_.proposal_mean_sd * rng.normal();
      for (int k = 0; k < m; ++k)
        total +=
            normal_logpdf(prop_.betas[j][k], 0.0, hyper_.ord_prior_diff_var) -
            normal_logpdf(cur_.betas[j][k], 0.0, hyper_.ord_prior_diff_var) +
            normal_logpdf(prop_.alphas[j][k], 0.0, hyper_.ord_prior_diff_var) -
            normal_logpdf(cur_.alphas[j][k], 0.0, hyper_.ord_prior_diff_var);
      prop_tables_[j] = build_table(prop_.betas[j], prop_.alphas[j]);
    }
    return total;
  }

  void eval_proposed(int j, const double* z, const std::int32_t* y,
                     std::size_t n, double* out) const override {
    kernels::affine_cell_loglik(z, y, n, prop_tables_[j], out);
  }

  void commit_proposed() override {
    cur_.betas.swap(prop_.betas);
    cur_.alphas.swap(prop_.alphas);
    tables_.swap(prop_tables_);
  }

  bool invariants_ok() const override { return true; }

  void accumulate() override {
    for (std::size_t j = 0; j < beta_sum_.size(); ++j)
      for (std::size_t k = 0; k < beta_sum_[j].size(); ++k) {
        beta_sum_[j][k] += cur_.betas[j][k];
        alpha_sum_[j][k] += cur_.alphas[j][k];
      }
  }

  ModelParams mean_params(int samples,
                          std::vector<double> trait_means) const override {
    auto betas = beta_sum_;
    auto alphas = alpha_sum_;
    for (auto& v : betas)
      for (double& x : v) x /= samples;
    for (auto& v : alphas)
      for (double& x : v) x /= samples;
    return NrmParams::validated(std::move(trait_means), std::move(betas),
                                std::move(alphas));
  }

 private:
  static kernels::AffineTable build_table(const std::vector<double>& betas,
                                          const std::vector<double>& alphas) {
    const int m = static_cast<int>(betas.size());
    kernels::AffineTable t;
    t.slope.resize(m);
    t.offset.resize(m);
    for (int k = 0; k < m; ++k) {
      t.slope[k] = betas[k];
      t.offset[k] = -betas[k] * alphas[k];
    }
    return t;
  }

  void rebuild(int j) { tables_[j] = build_table(cur_.betas[j], cur_.alphas[j]); }

  NrmParams cur_, prop_;
  std::vector<kernels::AffineTable> tables_, prop_tables_;
  std::vector<std::vector<double>> beta_sum_, alpha_sum_;
  std::vector<double> buf_old_, buf_new_;
};

class GpcmDriver final : public Driver {
 public:
  using Driver::Driver;

  void init(RngStream& rng) override {
    const int n = data_.n_respondents;
    const int q = data_.n_questions;
    cur_.traits.assign(n, 0.0);
    cur_.discrimination.assign(q, 0.0);
    cur_.thresholds.resize(q);
    for (int j = 0; j < q; ++j)
      cur_.thresholds[j].assign(data_.categories[j], 0.0);
    if (cfg_.random_init) {
      const double sd = std::sqrt(hyper_.ord_prior_diff_var);
      for (double& z : cur_.traits)
        z = rng.normal(0.0, std::sqrt(hyper_.ord_prior_trait_var));
      for (int j = 0; j < q; ++j) {
        cur_.discrimination[j] = rng.normal(0.0, sd);
        for (int k = 0; k < data_.categories[j]; ++k)
          cur_.thresholds[j][k] = rng.normal(0.0, sd);
      }
    }
    tables_.resize(q);
    for (int j = 0; j < q; ++j) rebuild(j);
    prop_ = cur_;
    prop_tables_ = tables_;
    disc_sum_.assign(q, 0.0);
    thr_sum_ = cur_.thresholds;
    for (auto& v : thr_sum_) std::fill(v.begin(), v.end(), 0.0);
    buf_old_.resize(n);
    buf_new_.resize(n);
  }

  std::vector<double>& traits() override { return cur_.traits; }

  double trait_log_prior(double z) const override {
    return normal_logpdf(z, 0.0, hyper_.ord_prior_trait_var);
  }

  void eval_current(int j, const double* z, const std::int32_t* y,
                    std::size_t n, double* out) const override {
    kernels::affine_cell_loglik(z, y, n, tables_[j], out);
  }

  void probs_current(int j, double z, double* probs,
                     double* logp) const override {
    kernels::affine_probs(z, tables_[j], probs, logp);
  }

  bool question_step(int j, const std::int32_t* ycol, RngStream& rng,
                     double* delta_ll) override {
    *delta_ll = 0.0;
    const int m = data_.categories[j];
    const double disc =
        cur_.discrimination[j] + cfg_.proposal_mean_sd * rng.normal();
    std::vector<double> thr(m);
    for (int k = 0; k < m; ++k)
      thr[k] = cur_.thresholds[j][k] + cfg_.proposal_mean_sd * rng.normal();
    double lp = normal_logpdf(disc, 0.0, hyper_.ord_prior_diff_var) -
                normal_logpdf(cur_.discrimination[j], 0.0,
                              hyper_.ord_prior_diff_var);
    for (int k = 0; k < m; ++k)
      lp += normal_logpdf(thr[k], 0.0, hyper_.ord_prior_diff_var) -
            normal_logpdf(cur_.thresholds[j][k], 0.0,
                          hyper_.ord_prior_diff_var);
    const auto table = build_table(disc, thr);
    const int n = data_.n_respondents;
    kernels::affine_cell_loglik(cur_.traits.data(), ycol, n, tables_[j],
                                buf_old_.data());
    kernels::affine_cell_loglik(cur_.traits.data(), ycol, n, table,
                                buf_new_.data());
    double dll = 0.0;
    for (int i = 0; i < n; ++i) dll += buf_new_[i] - buf_old_[i];
    if (mh_accept(dll, 0.0, lp, 0.0, 0.0, rng)) {
      cur_.discrimination[j] = disc;
      cur_.thresholds[j] = std::move(thr);
      tables_[j] = table;
      *delta_ll = dll;
      return true;
    }
    return false;
  }

  double propose_all_questions(RngStream& rng) override {
    double total = 0.0;
    for (int j = 0; j < data_.n_questions; ++j) {
      const int m = data_.categories[j];
      prop_.discrimination[j] =
          cur_.discrimination[j] + cfg_.proposal_mean_sd * rng.normal();
      for (int k = 0; k < m; ++k)
        prop_.thresholds[j][k] =
            cur_.thresholds[j][k] + cfg_.proposal_mean_sd * rng.normal();
      total += normal_logpdf(prop_.discrimination[j], 0.0,
                             hyper_.ord_prior_diff_var) -
               normal_logpdf(cur_.discrimination[j], 0.0,
                             hyper_.ord_prior_diff_var);
      for (int k = 0; k < m; ++k)
        total += normal_logpdf(prop_.thresholds[j][k], 0.0,
                               hyper_.ord_prior_diff_var) -
                 normal_logpdf(cur_.thresholds[j][k], 0.0,
                               hyper_.ord_prior_diff_var);
      prop_tables_[j] = build_table(prop_.discrimination[j],
                                    prop_.thresholds[j]);
    }
    return total;
  }

  void eval_proposed(int j, const double* z, const std::int32_t* y,
                     std::size_t n, double* out) const override {
    kernels::affine_cell_loglik(z, y, n, prop_tables_[j], out);
  }

  void commit_proposed() override {
    cur_.discrimination.swap(prop_.discrimination);
    cur_.thresholds.swap(prop_.thresholds);
    tables_.swap(prop_tables_);
  }

  bool invariants_ok() const override { return true; }

  void accumulate() override {
    for (std::size_t j = 0; j < thr_sum_.size(); ++j) {
      disc_sum_[j] += cur_.discrimination[j];
      for (std::size_t k = 0; k < thr_sum_[j].size(); ++k)
        thr_sum_[j][k] += cur_.thresholds[j][k];
    }
  }

  ModelParams mean_params(int samples,
                          std::vector<double> trait_means) const override {
    auto disc = disc_sum_;
    auto thr = thr_sum_;
    for (double& x : disc) x /= samples;
    for (auto& v : thr)
      for (double& x : v) x /= samples;
    return GpcmParams::validated(std::move(trait_means), std::move(disc),
                                 std::move(thr));
  }

 private:
  static kernels::AffineTable build_table(double disc,
                                          const std::vector<double>& thr) {
    const int m = static_cast<int>(thr.size());
    kernels::AffineTable t;
    t.slope.resize(m);
    t.offset.resize(m);
    double cum = 0.0;
    for (int k = 0; k < m; ++k) {
      cum += thr[k];
      t.slope[k] = disc * (k + 1);
      t.offset[k] = -disc * cum;
    }
    return t;
  }

  void rebuild(int j) {
    tables_[j] = build_table(cur_.discrimination[j], cur_.thresholds[j]);
  }

  GpcmParams cur_, prop_;
  std::vector<kernels::AffineTable> tables_, prop_tables_;
  std::vector<double> disc_sum_;
  std::vector<std::vector<double>> thr_sum_;
  std::vector<double> buf_old_, buf_new_;
};

std::unique_ptr<Driver> make_driver(ModelTag tag, const ResponseMatrix& data,
                                    const Hyperparams& hyper,
                                    const FitConfig& cfg) {
  switch (tag) {
    case ModelTag::Sprite:
      return std::make_unique<SpriteDriver>(data, hyper, cfg);
    case ModelTag::Ord:
      return std::make_unique<OrdDriver>(data, hyper, cfg, false);
    case ModelTag::Lord:
      return std::make_unique<OrdDriver>(data, hyper, cfg, true);
    case ModelTag::Nrm:
      return std::make_unique<NrmDriver>(data, hyper, cfg);
    case ModelTag::Gpcm:
      return std::make_unique<GpcmDriver>(data, hyper, cfg);
  }
  throw ValidationError(ErrorCode::InvalidArgument, "unknown model tag");
}

}  // namespace

FitResult run_chain(ModelTag tag, const ResponseMatrix& data,
                    const Hyperparams& hyper, const FitConfig& cfg) {
  hyper.validate();
  cfg.validate();

  const int n = data.n_respondents;
  const int q = data.n_questions;
  const std::uint64_t seed = cfg.rng_seed;
  const int total_iters = cfg.burn_in_iterations + cfg.sample_iterations;

  auto driver = make_driver(tag, data, hyper, cfg);
  {
    RngStream init_rng(seed, "init");
    driver->init(init_rng);
  }

  // Complete working matrix: observed responses plus current imputations.
  std::vector<std::int32_t> work = data.cells;
  const auto missing = data.missing_cells();
  {
    RngStream rng(seed, "init-impute");
    for (const auto& [i, j] : missing)
      work[data.index(i, j)] =
          static_cast<std::int32_t>(rng.uniform_below(data.categories[j]));
  }

  int max_m = 0;
  for (int m : data.categories) max_m = std::max(max_m, m);
  std::vector<double> probs(max_m), logp(max_m);
  std::vector<double> buf_old(n), buf_new(n), prop_z(n), unif(n), dll_row(n);

  auto column = [&](int j) { return work.data() + data.index(0, j); };

  std::vector<double>& traits = driver->traits();
  double loglik = 0.0;
  for (int j = 0; j < q; ++j) {
    driver->eval_current(j, traits.data(), column(j), n, buf_old.data());
    for (int i = 0; i < n; ++i) loglik += buf_old[i];
  }

  FitResult result;
  result.trace.reserve(total_iters);

  std::vector<double> trait_sum(n, 0.0);
  std::vector<std::vector<std::uint32_t>> impute_counts(missing.size());
  for (std::size_t c = 0; c < missing.size(); ++c)
    impute_counts[c].assign(data.categories[missing[c].second], 0);

  std::uint64_t acc_traits = 0, acc_questions = 0, acc_perms = 0,
                acc_joint = 0;
  const bool blockwise = cfg.acceptance_mode == AcceptanceMode::Blockwise;
  int samples_taken = 0;

  for (int t = 1; t <= total_iters; ++t) {
    double iter_acc_traits = 0.0, iter_acc_questions = 0.0;
    if (blockwise) {
      // Latent trait sweep: proposals and acceptance uniforms are drawn in
      // respondent order, then rows are decided independently (the row
      // likelihoods are separable given fixed question parameters).
      {
        RngStream rng(seed, "traits", static_cast<std::uint64_t>(t));
        for (int i = 0; i < n; ++i)
          prop_z[i] = traits[i] + cfg.proposal_trait_sd * rng.normal();
        for (int i = 0; i < n; ++i) unif[i] = rng.uniform();
        std::fill(dll_row.begin(), dll_row.end(), 0.0);
        for (int j = 0; j < q; ++j) {
          driver->eval_current(j, traits.data(), column(j), n, buf_old.data());
          driver->eval_current(j, prop_z.data(), column(j), n, buf_new.data());
          for (int i = 0; i < n; ++i) dll_row[i] += buf_new[i] - buf_old[i];
        }
        int acc = 0;
        for (int i = 0; i < n; ++i) {
          const double delta = dll_row[i] + driver->trait_log_prior(prop_z[i]) -
                               driver->trait_log_prior(traits[i]);
          if (unif[i] < std::exp(delta)) {
            traits[i] = prop_z[i];
            loglik += dll_row[i];
            ++acc;
          }
        }
        acc_traits += acc;
        iter_acc_traits = static_cast<double>(acc) / n;
      }
      // Question parameter sweep, one MH block per question.
      {
        int acc = 0;
        for (int j = 0; j < q; ++j) {
          RngStream rng(seed, "question", static_cast<std::uint64_t>(t),
                        static_cast<std::uint64_t>(j));
          double dll = 0.0;
          if (driver->question_step(j, column(j), rng, &dll)) {
            loglik += dll;
            ++acc;
          }
        }
        acc_questions += acc;
        iter_acc_questions = static_cast<double>(acc) / q;
      }
      if (driver->has_permutations()) {
        for (int j = 0; j < q; ++j) {
          RngStream rng(seed, "perm", static_cast<std::uint64_t>(t),
                        static_cast<std::uint64_t>(j));
          double dll = 0.0;
          if (driver->permutation_step(j, column(j), rng, &dll)) {
            loglik += dll;
            ++acc_perms;
          }
        }
      }
    } else {
      // Joint mode: one proposal of every latent trait and every question
      // parameter, accepted or rejected as a whole.
      RngStream rng(seed, "joint", static_cast<std::uint64_t>(t));
      for (int i = 0; i < n; ++i)
        prop_z[i] = traits[i] + cfg.proposal_trait_sd * rng.normal();
      const double lp_lh = driver->propose_all_questions(rng);
      bool accepted = false;
      if (lp_lh != kNegInf) {
        double new_ll = 0.0;
        for (int j = 0; j < q; ++j) {
          driver->eval_proposed(j, prop_z.data(), column(j), n, buf_new.data());
          for (int i = 0; i < n; ++i) new_ll += buf_new[i];
        }
        double prior_delta = lp_lh;
        for (int i = 0; i < n; ++i)
          prior_delta += driver->trait_log_prior(prop_z[i]) -
                         driver->trait_log_prior(traits[i]);
        if (mh_accept(new_ll, loglik, prior_delta, 0.0, 0.0, rng)) {
          traits = prop_z;
          driver->commit_proposed();
          loglik = new_ll;
          accepted = true;
        }
      }
      acc_joint += accepted ? 1 : 0;
      iter_acc_traits = iter_acc_questions = accepted ? 1.0 : 0.0;
    }

    // Gibbs imputation of the unobserved cells under the updated state.
    {
      RngStream rng(seed, "impute", static_cast<std::uint64_t>(t));
      for (const auto& [i, j] : missing) {
        driver->probs_current(j, traits[i], probs.data(), logp.data());
        const int c = pick_category(probs.data(), data.categories[j],
                                    rng.uniform());
        auto& slot = work[data.index(i, j)];
        if (c != slot) {
          loglik += logp[c] - logp[slot];
          slot = c;
        }
      }
    }

    if (!std::isfinite(loglik))
      throw NumericError(ErrorCode::NonFiniteLikelihood,
                         cat("iteration ", t));

    result.trace.push_back({t, loglik, iter_acc_traits, iter_acc_questions});

    if (t > cfg.burn_in_iterations) {
      ++samples_taken;
      for (int i = 0; i < n; ++i) trait_sum[i] += traits[i];
      driver->accumulate();
      for (std::size_t c = 0; c < missing.size(); ++c)
        ++impute_counts[c][work[data.index(missing[c].first,
                                           missing[c].second)]];
    }
    if (!driver->invariants_ok()) ++result.invariant_violations;
  }

  PosteriorSummary& s = result.summary;
  s.model = tag;
  s.burn_in = cfg.burn_in_iterations;
  s.samples = samples_taken;
  s.seed = seed;
  s.trait_means.resize(n);
  for (int i = 0; i < n; ++i) s.trait_means[i] = trait_sum[i] / samples_taken;
  s.mean_params = driver->mean_params(samples_taken, s.trait_means);
  s.permutation_mode = driver->modal_permutations();

  s.imputed_modes.reserve(missing.size());
  for (std::size_t c = 0; c < missing.size(); ++c) {
    const auto& counts = impute_counts[c];
    int best = 0;
    for (int k = 1; k < static_cast<int>(counts.size()); ++k)
      if (counts[k] > counts[best]) best = k;  // ties keep the lowest index
    s.imputed_modes.push_back(
        {missing[c].first, missing[c].second, static_cast<std::int32_t>(best)});
  }

  const double nT = static_cast<double>(n) * total_iters;
  const double qT = static_cast<double>(q) * total_iters;
  if (blockwise) {
    s.acceptance.traits = static_cast<double>(acc_traits) / nT;
    s.acceptance.questions = static_cast<double>(acc_questions) / qT;
    if (driver->has_permutations())
      s.acceptance.permutations = static_cast<double>(acc_perms) / qT;
  } else {
    s.acceptance.joint = static_cast<double>(acc_joint) / total_iters;
  }
  return result;
}

}  // namespace polyirt
