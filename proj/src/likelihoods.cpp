// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <limits>

#include "polyirt/likelihoods.hpp"

#include "fmt_helpers.hpp"

namespace polyirt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw ValidationError(ErrorCode::NonFiniteInput, what);
}

void require_all_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) require_finite(x, what);
}

}  // namespace

CategoryDistribution sprite_category_probs(double z,
                                           const std::vector<double>& means,
                                           const std::vector<double>& vars) {
  require_finite(z, "z");
  require_all_finite(means, "sprite mean");
  if (means.size() != vars.size())
    throw ValidationError(ErrorCode::DimensionMismatch, "means/vars");
  if (means.size() < 2)
    throw ValidationError(ErrorCode::BadCategoryCount, "need M >= 2");
  for (double v : vars) {
    require_finite(v, "sprite variance");
    if (!(v > 0.0))
      throw ValidationError(ErrorCode::InvalidArgument,
                            "sprite variance must be positive");
  }
  const auto table = kernels::GaussTable::build(means, vars);
  CategoryDistribution d;
  d.probs.resize(means.size());
  kernels::gauss_probs(z, table, d.probs.data());
  return d;
}

CategoryDistribution ord_category_probs(double z,
                                        const std::vector<double>& interior_bins,
                                        const std::vector<int>& permutation) {
  require_finite(z, "z");
  require_all_finite(interior_bins, "bin edge");
  const int m = static_cast<int>(permutation.size());
  if (m < 2)
    throw ValidationError(ErrorCode::BadCategoryCount, "need M >= 2");
  if (static_cast<int>(interior_bins.size()) != m - 1)
    throw ValidationError(ErrorCode::DimensionMismatch,
                          cat("need ", m - 1, " interior bins for M=", m));
  for (int k = 0; k + 1 < m - 1; ++k)
    if (!(interior_bins[k] < interior_bins[k + 1]))
      throw ValidationError(ErrorCode::UnorderedBins,
                            cat("edges ", k + 1, " and ", k + 2));
  std::vector<bool> seen(m, false);
  for (int v : permutation) {
    if (v < 0 || v >= m || seen[v])
      throw ValidationError(ErrorCode::NotABijection, "permutation");
    seen[v] = true;
  }

  kernels::ProbitTable table;
  table.lo.resize(m);
  table.hi.resize(m);
  for (int y = 0; y < m; ++y) {
    const int s = permutation[y];
    table.lo[y] = s == 0 ? -kInf : interior_bins[s - 1];
    table.hi[y] = s == m - 1 ? kInf : interior_bins[s];
  }
  CategoryDistribution d;
  d.probs.resize(m);
  kernels::probit_probs(z, table, d.probs.data());
  return d;
}

CategoryDistribution nrm_category_probs(double theta,
                                        const std::vector<double>& betas,
                                        const std::vector<double>& alphas) {
  require_finite(theta, "theta");
  require_all_finite(betas, "beta");
  require_all_finite(alphas, "alpha");
  if (betas.size() != alphas.size())
    throw ValidationError(ErrorCode::DimensionMismatch, "betas/alphas");
  if (betas.size() < 2)
    throw ValidationError(ErrorCode::BadCategoryCount, "need M >= 2");
  kernels::AffineTable table;
  const int m = static_cast<int>(betas.size());
  table.slope.resize(m);
  table.offset.resize(m);
  for (int k = 0; k < m; ++k) {
    table.slope[k] = betas[k];
    table.offset[k] = -betas[k] * alphas[k];
  }
  CategoryDistribution d;
  d.probs.resize(m);
  kernels::affine_probs(theta, table, d.probs.data());
  return d;
}

CategoryDistribution gpcm_category_probs(double theta, double beta,
                                         const std::vector<double>& alphas) {
  require_finite(theta, "theta");
  require_finite(beta, "beta");
  require_all_finite(alphas, "alpha");
  if (alphas.size() < 2)
    throw ValidationError(ErrorCode::BadCategoryCount, "need M >= 2");
  kernels::AffineTable table;
  const int m = static_cast<int>(alphas.size());
  table.slope.resize(m);
  table.offset.resize(m);
  double cum = 0.0;
  for (int k = 0; k < m; ++k) {
    cum += alphas[k];
    table.slope[k] = beta * (k + 1);
    table.offset[k] = -beta * cum;
  }
  CategoryDistribution d;
  d.probs.resize(m);
  kernels::affine_probs(theta, table, d.probs.data());
  return d;
}

kernels::GaussTable sprite_table(const SpriteParams& p, int j) {
  return kernels::GaussTable::build(p.means[j], p.vars[j]);
}

kernels::ProbitTable ord_table(const OrdParams& p, int j) {
  const int m = static_cast<int>(p.perms[j].size());
  const double shift = p.difficulties[j];
  kernels::ProbitTable table;
  table.lo.resize(m);
  table.hi.resize(m);
  for (int y = 0; y < m; ++y) {
    const int s = p.perms[j][y];
    table.lo[y] = s == 0 ? -kInf : p.bins[j][s - 1] + shift;
    table.hi[y] = s == m - 1 ? kInf : p.bins[j][s] + shift;
  }
  return table;
}

kernels::AffineTable nrm_table(const NrmParams& p, int j) {
  const int m = static_cast<int>(p.betas[j].size());
  kernels::AffineTable table;
  table.slope.resize(m);
  table.offset.resize(m);
  for (int k = 0; k < m; ++k) {
    table.slope[k] = p.betas[j][k];
    table.offset[k] = -p.betas[j][k] * p.alphas[j][k];
  }
  return table;
}

kernels::AffineTable gpcm_table(const GpcmParams& p, int j) {
  const int m = static_cast<int>(p.thresholds[j].size());
  kernels::AffineTable table;
  table.slope.resize(m);
  table.offset.resize(m);
  double cum = 0.0;
  for (int k = 0; k < m; ++k) {
    cum += p.thresholds[j][k];
    table.slope[k] = p.discrimination[j] * (k + 1);
    table.offset[k] = -p.discrimination[j] * cum;
  }
  return table;
}

namespace {

struct Dims {
  const std::vector<double>* traits;
  int q;
  std::vector<int> m;  // categories per question implied by the params
};

Dims param_dims(const ModelParams& params) {
  Dims d;
  if (const auto* p = std::get_if<SpriteParams>(&params)) {
    d.traits = &p->traits;
    d.q = static_cast<int>(p->means.size());
    for (const auto& v : p->means) d.m.push_back(static_cast<int>(v.size()));
  } else if (const auto* p = std::get_if<OrdParams>(&params)) {
    d.traits = &p->traits;
    d.q = static_cast<int>(p->perms.size());
    for (const auto& v : p->perms) d.m.push_back(static_cast<int>(v.size()));
  } else if (const auto* p = std::get_if<NrmParams>(&params)) {
    d.traits = &p->traits;
    d.q = static_cast<int>(p->betas.size());
    for (const auto& v : p->betas) d.m.push_back(static_cast<int>(v.size()));
  } else {
    const auto* p = std::get_if<GpcmParams>(&params);
    d.traits = &p->traits;
    d.q = static_cast<int>(p->thresholds.size());
    for (const auto& v : p->thresholds)
      d.m.push_back(static_cast<int>(v.size()));
  }
  return d;
}

}  // namespace

double dataset_log_likelihood(const ModelParams& params,
                              const ResponseMatrix& data,
                              const std::vector<ImputedCell>* imputed) {
  const Dims dims = param_dims(params);
  if (static_cast<int>(dims.traits->size()) != data.n_respondents ||
      dims.q != data.n_questions)
    throw ValidationError(ErrorCode::DimensionMismatch,
                          "parameter dimensions do not match data");
  for (int j = 0; j < dims.q; ++j)
    if (dims.m[j] != data.categories[j])
      throw ValidationError(ErrorCode::DimensionMismatch,
                            cat("question ", j + 1, " category count"));

  // Per-column gather of the cells to evaluate (observed plus any imputed
  // assignments), so each column is a single batch kernel call.
  const int n = data.n_respondents;
  std::vector<std::vector<ImputedCell>> extra(dims.q);
  if (imputed != nullptr) {
    for (const auto& cell : *imputed) {
      if (cell.row < 0 || cell.row >= n || cell.col < 0 || cell.col >= dims.q)
        throw ValidationError(ErrorCode::DimensionMismatch, "imputed cell index");
      if (data.is_observed(cell.row, cell.col))
        throw ValidationError(ErrorCode::InvalidArgument,
                              "imputed cell is observed");
      if (cell.category < 0 || cell.category >= data.categories[cell.col])
        throw ValidationError(ErrorCode::CategoryOutOfRange,
                              "imputed category");
      extra[cell.col].push_back(cell);
    }
  }

  std::vector<double> zbuf(n), out(n);
  std::vector<std::int32_t> ybuf(n);
  const std::vector<double>& traits = *dims.traits;
  double total = 0.0;
  for (int j = 0; j < dims.q; ++j) {
    std::size_t c = 0;
    const std::int32_t* col = data.column(j);
    for (int i = 0; i < n; ++i) {
      if (col[i] != kMissingCell) {
        zbuf[c] = traits[i];
        ybuf[c] = col[i];
        ++c;
      }
    }
    for (const auto& cell : extra[j]) {
      zbuf[c] = traits[cell.row];
      ybuf[c] = cell.category;
      ++c;
    }
    if (c == 0) continue;
    if (const auto* p = std::get_if<SpriteParams>(&params)) {
      const auto table = sprite_table(*p, j);
      kernels::gauss_cell_loglik(zbuf.data(), ybuf.data(), c, table, out.data());
    } else if (const auto* p = std::get_if<OrdParams>(&params)) {
      const auto table = ord_table(*p, j);
      kernels::probit_cell_loglik(zbuf.data(), ybuf.data(), c, table, out.data());
    } else if (const auto* p = std::get_if<NrmParams>(&params)) {
      const auto table = nrm_table(*p, j);
      kernels::affine_cell_loglik(zbuf.data(), ybuf.data(), c, table, out.data());
    } else {
      const auto table = gpcm_table(std::get<GpcmParams>(params), j);
      kernels::affine_cell_loglik(zbuf.data(), ybuf.data(), c, table, out.data());
    }
    for (std::size_t i = 0; i < c; ++i) total += out[i];
  }
  return total;
}

}  // namespace polyirt
