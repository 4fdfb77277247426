#include "spill/econometrics.hpp"

#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "spill/errors.hpp"

namespace spill {

namespace {

int factor_levels(const std::vector<int>& codes) {
  int lo = 0, hi = -1;
  for (int c : codes) {
    if (c < 0) throw ConfigError("negative factor code");
    hi = std::max(hi, c);
    lo = std::min(lo, c);
  }
  return hi + 1;
}

}  // namespace

void demean_inplace(Eigen::MatrixXd& columns,
                    const std::vector<std::vector<int>>& fe_factors,
                    double tol, int max_sweeps) {
  if (fe_factors.empty()) return;
  const int n = static_cast<int>(columns.rows());
  const int m = static_cast<int>(columns.cols());

  struct Factor {
    const std::vector<int>* codes;
    int levels;
    std::vector<int> size;
  };
  std::vector<Factor> factors;
  for (const auto& f : fe_factors) {
    if (static_cast<int>(f.size()) != n)
      throw ShapeError("fixed-effect factor length mismatch");
    Factor fac{&f, factor_levels(f), {}};
    fac.size.assign(fac.levels, 0);
    for (int c : f) fac.size[c]++;
    factors.push_back(std::move(fac));
  }

  std::vector<double> group_sum;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (const auto& fac : factors) {
      for (int col = 0; col < m; ++col) {
        group_sum.assign(fac.levels, 0.0);
        for (int i = 0; i < n; ++i) group_sum[(*fac.codes)[i]] += columns(i, col);
        for (int lvl = 0; lvl < fac.levels; ++lvl) group_sum[lvl] /= fac.size[lvl];
        for (int i = 0; i < n; ++i) {
          double mean = group_sum[(*fac.codes)[i]];
          columns(i, col) -= mean;
          max_change = std::max(max_change, std::abs(mean));
        }
      }
    }
    if (max_change < tol) return;
  }
  throw DataError("fixed-effect demeaning did not converge");
}

int dummy_param_count(int p, const std::vector<std::vector<int>>& fe_factors,
                      bool add_intercept) {
  if (fe_factors.empty()) return p + (add_intercept ? 1 : 0);
  int k = p;
  for (size_t j = 0; j < fe_factors.size(); ++j) {
    int levels = factor_levels(fe_factors[j]);
    k += (j == 0) ? levels : levels - 1;
  }
  return k;
}

std::vector<int> encode_factor(const std::vector<std::string>& values) {
  std::map<std::string, int> codes;
  std::vector<int> out;
  out.reserve(values.size());
  for (const auto& v : values) {
    auto [it, inserted] = codes.emplace(v, static_cast<int>(codes.size()));
    out.push_back(it->second);
  }
  return out;
}

std::vector<int> cross_factors(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ShapeError("factor length mismatch");
  std::map<std::pair<int, int>, int> codes;
  std::vector<int> out;
  out.reserve(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    auto [it, inserted] =
        codes.emplace(std::make_pair(a[i], b[i]), static_cast<int>(codes.size()));
    out.push_back(it->second);
  }
  return out;
}

double RegressionResult::coef(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return beta(static_cast<int>(i));
  throw ConfigError("no coefficient named '" + name + "'");
}

double RegressionResult::stderr_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return se(static_cast<int>(i));
  throw ConfigError("no coefficient named '" + name + "'");
}

double RegressionResult::tstat(const std::string& name) const {
  double s = stderr_of(name);
  return coef(name) / s;
}

double RegressionResult::pvalue(const std::string& name) const {
  double t = std::abs(tstat(name));
  int df = n_clusters > 0 ? n_clusters - 1 : n_obs - n_params;
  if (df < 1) df = 1;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

RegressionResult ols_fe(const Design& design, SeKind se_kind) {
  const int n = design.n();
  int p = static_cast<int>(design.x.cols());
  if (design.x.rows() != n) throw ShapeError("x rows != y rows");
  if (static_cast<int>(design.names.size()) != p)
    throw ShapeError("names size != regressor count");
  if (n == 0) throw DataError("empty design");

  bool intercept = design.fe_factors.empty() && design.add_intercept;
  Eigen::MatrixXd x(n, p + (intercept ? 1 : 0));
  std::vector<std::string> names = design.names;
  x.leftCols(p) = design.x;
  if (intercept) {
    x.col(p) = Eigen::VectorXd::Ones(n);
    names.push_back("(intercept)");
    ++p;
  }

  // Demean response and regressors together so both converge against the
  // same projection.
  Eigen::MatrixXd z(n, p + 1);
  z.col(0) = design.y;
  z.rightCols(p) = x;
  demean_inplace(z, design.fe_factors);
  Eigen::VectorXd yt = z.col(0);
  Eigen::MatrixXd xt = z.rightCols(p);

  int n_params = dummy_param_count(static_cast<int>(design.x.cols()),
                                   design.fe_factors, design.add_intercept);
  if (n <= n_params)
    throw DataError("more parameters (" + std::to_string(n_params) +
                    ") than observations (" + std::to_string(n) + ")");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xt);
  qr.setThreshold(1e-9);
  if (qr.rank() < p) {
    // Name a column involved in the dependency: the first pivot that fell
    // outside the numerical rank.
    int bad = qr.colsPermutation().indices()(qr.rank());
    throw CollinearityError("regressor '" + names[bad] +
                            "' is collinear after fixed-effect absorption");
  }
  Eigen::VectorXd beta = qr.solve(yt);
  Eigen::VectorXd resid = yt - xt * beta;

  RegressionResult out;
  out.names = names;
  out.beta = beta;
  out.residuals = resid;
  out.n_obs = n;
  out.n_params = n_params;
  out.se_kind = se_kind;

  double ybar = design.y.mean();
  double sst = (design.y.array() - ybar).square().sum();
  double ssr = resid.squaredNorm();
  out.r2 = sst > 0.0 ? 1.0 - ssr / sst : 0.0;

  switch (se_kind) {
    case SeKind::classical: {
      double sigma2 = ssr / (n - n_params);
      Eigen::MatrixXd xtx_inv =
          (xt.transpose() * xt).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
      out.vcov = sigma2 * xtx_inv;
      break;
    }
    case SeKind::hc1:
      out.vcov = hc1_vcov(xt, resid, n_params);
      break;
    case SeKind::cr1:
      if (design.cluster.empty())
        throw ConfigError("cluster-robust errors requested without a cluster factor");
      out.vcov = cluster_robust_vcov(xt, resid, design.cluster, n_params,
                                     &out.warnings);
      out.n_clusters = factor_levels(design.cluster);
      break;
  }
  out.se = out.vcov.diagonal().array().sqrt();
  return out;
}

Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& xt,
                                    const Eigen::VectorXd& residuals,
                                    const std::vector<int>& cluster, int n_params,
                                    std::vector<std::string>* warnings) {
  const int n = static_cast<int>(xt.rows());
  const int p = static_cast<int>(xt.cols());
  if (static_cast<int>(cluster.size()) != n)
    throw ShapeError("cluster factor length mismatch");
  int g = factor_levels(cluster);
  if (g < 2) throw InferenceError("cluster-robust errors need >= 2 clusters");
  if (g == 2 && warnings)
    warnings->push_back("only 2 clusters: few-cluster inference is unreliable");

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(g, p);
  for (int i = 0; i < n; ++i)
    scores.row(cluster[i]) += residuals(i) * xt.row(i);
  Eigen::MatrixXd meat = scores.transpose() * scores;

  double c = (static_cast<double>(g) / (g - 1)) *
             (static_cast<double>(n - 1) / (n - n_params));
  Eigen::MatrixXd xtx_inv =
      (xt.transpose() * xt).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  return c * xtx_inv * meat * xtx_inv;
}

Eigen::MatrixXd hc1_vcov(const Eigen::MatrixXd& xt, const Eigen::VectorXd& residuals,
                         int n_params) {
  const int n = static_cast<int>(xt.rows());
  const int p = static_cast<int>(xt.cols());
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd xi = xt.row(i);
    meat += residuals(i) * residuals(i) * xi * xi.transpose();
  }
  double c = static_cast<double>(n) / (n - n_params);
  Eigen::MatrixXd xtx_inv =
      (xt.transpose() * xt).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  return c * xtx_inv * meat * xtx_inv;
}

std::vector<PeriodBin> parse_bins(const std::string& csv_spec) {
  std::vector<PeriodBin> bins;
  size_t pos = 0;
  while (pos < csv_spec.size()) {
    size_t comma = csv_spec.find(',', pos);
    std::string tok = csv_spec.substr(pos, comma == std::string::npos
                                               ? std::string::npos
                                               : comma - pos);
    size_t dash = tok.find('-');
    if (dash == std::string::npos)
      throw ConfigError("bad period bin '" + tok + "' (want lo-hi)");
    try {
      bins.push_back({std::stoi(tok.substr(0, dash)), std::stoi(tok.substr(dash + 1))});
    } catch (const std::exception&) {
      throw ConfigError("bad period bin '" + tok + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  validate_bins(bins);
  return bins;
}

void validate_bins(const std::vector<PeriodBin>& bins) {
  if (bins.empty()) throw ConfigError("no period bins given");
  for (const auto& b : bins)
    if (b.lo > b.hi)
      throw ConfigError("inverted bin " + std::to_string(b.lo) + "-" +
                        std::to_string(b.hi));
  for (size_t i = 0; i < bins.size(); ++i)
    for (size_t j = i + 1; j < bins.size(); ++j) {
      bool disjoint = bins[i].hi < bins[j].lo || bins[j].hi < bins[i].lo;
      if (!disjoint)
        throw ConfigError("overlapping bins " + std::to_string(bins[i].lo) + "-" +
                          std::to_string(bins[i].hi) + " and " +
                          std::to_string(bins[j].lo) + "-" +
                          std::to_string(bins[j].hi));
    }
}

std::vector<std::pair<std::string, Eigen::VectorXd>> make_period_interactions(
    const Eigen::VectorXd& x, const std::string& x_name,
    const std::vector<int>& year, const std::vector<PeriodBin>& bins) {
  if (static_cast<int>(year.size()) != x.size())
    throw ShapeError("year column length mismatch");
  validate_bins(bins);
  std::vector<std::pair<std::string, Eigen::VectorXd>> out;
  for (const auto& b : bins) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(x.size());
    for (int i = 0; i < x.size(); ++i)
      if (year[i] >= b.lo && year[i] <= b.hi) col(i) = x(i);
    out.emplace_back(x_name + "_" + std::to_string(b.lo) + "_" + std::to_string(b.hi),
                     std::move(col));
  }
  return out;
}

double fisher_exact_p(double original, const std::vector<double>& placebos) {
  int extreme = 0;
  for (double t : placebos)
    if (std::abs(t) >= std::abs(original)) ++extreme;
  return (1.0 + extreme) / (1.0 + placebos.size());
}

std::pair<double, double> wald_joint_zero(const RegressionResult& reg,
                                          const std::vector<std::string>& names,
                                          int df2) {
  int q = static_cast<int>(names.size());
  if (q == 0) return {0.0, 1.0};
  std::vector<int> idx;
  for (const auto& n : names) {
    int found = -1;
    for (size_t i = 0; i < reg.names.size(); ++i)
      if (reg.names[i] == n) found = static_cast<int>(i);
    if (found < 0) throw ConfigError("no coefficient named '" + n + "'");
    idx.push_back(found);
  }
  Eigen::VectorXd b(q);
  Eigen::MatrixXd v(q, q);
  for (int i = 0; i < q; ++i) {
    b(i) = reg.beta(idx[i]);
    for (int j = 0; j < q; ++j) v(i, j) = reg.vcov(idx[i], idx[j]);
  }
  double w = b.dot(v.ldlt().solve(b));
  double f = w / q;
  if (df2 < 1) df2 = 1;
  boost::math::fisher_f dist(q, df2);
  double p = boost::math::cdf(boost::math::complement(dist, f));
  return {f, p};
}

DidResult did_estimate(const PanelSpec& panel) {
  const int n = static_cast<int>(panel.outcome.size());
  if (static_cast<int>(panel.unit.size()) != n ||
      static_cast<int>(panel.year.size()) != n ||
      panel.treatment.size() != n)
    throw ShapeError("panel columns differ in length");
  int n_units = factor_levels(panel.unit);
  std::set<int> years(panel.year.begin(), panel.year.end());
  if (n_units < 2 || years.size() < 2)
    throw DataError("difference-in-differences needs >= 2 units and >= 2 periods");
  validate_bins(panel.bins);
  if (panel.ref_bin < 0 || panel.ref_bin >= static_cast<int>(panel.bins.size()))
    throw ConfigError("reference bin index out of range");

  Eigen::VectorXd treat(n);
  for (int i = 0; i < n; ++i) {
    double t = panel.treatment(i);
    treat(i) = panel.binary_treatment ? (t > 0.0 ? 1.0 : 0.0) : t;
  }

  Design d;
  d.y = panel.outcome;
  std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
  DidResult out;
  for (int bi = 0; bi < static_cast<int>(panel.bins.size()); ++bi) {
    if (bi == panel.ref_bin) continue;
    const PeriodBin& b = panel.bins[bi];
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
      if (panel.year[i] >= b.lo && panel.year[i] <= b.hi) col(i) = treat(i);
    std::string name =
        "treat_" + std::to_string(b.lo) + "_" + std::to_string(b.hi);
    cols.emplace_back(name, std::move(col));
    DidResult::BinEffect eff;
    eff.bin = b;
    eff.name = name;
    eff.is_pre = b.hi < panel.treat_start_year;
    out.effects.push_back(eff);
  }

  if (panel.unit_trends) {
    const std::vector<int>& group =
        panel.trend_group.empty() ? panel.unit : panel.trend_group;
    if (static_cast<int>(group.size()) != n)
      throw ShapeError("trend group length mismatch");
    double tbar = std::accumulate(panel.year.begin(), panel.year.end(), 0.0) / n;
    int levels = factor_levels(group);
    for (int lvl = 0; lvl < levels; ++lvl) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
      for (int i = 0; i < n; ++i)
        if (group[i] == lvl) col(i) = panel.year[i] - tbar;
      cols.emplace_back("trend_g" + std::to_string(lvl), std::move(col));
    }
  }

  d.x.resize(n, static_cast<int>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c) {
    d.names.push_back(cols[c].first);
    d.x.col(static_cast<int>(c)) = cols[c].second;
  }

  std::vector<int> year_codes(panel.year.size());
  {
    std::vector<int> sorted_years(years.begin(), years.end());
    std::map<int, int> code;
    for (size_t i = 0; i < sorted_years.size(); ++i) code[sorted_years[i]] = i;
    for (int i = 0; i < n; ++i) year_codes[i] = code[panel.year[i]];
  }
  d.fe_factors = {panel.unit, year_codes};
  d.fe_names = {"unit", "year"};
  d.cluster = panel.unit;

  out.reg = ols_fe(d, SeKind::cr1);
  for (auto& eff : out.effects) {
    eff.estimate = out.reg.coef(eff.name);
    eff.se = out.reg.stderr_of(eff.name);
  }

  std::vector<std::string> pre_names;
  for (const auto& eff : out.effects)
    if (eff.is_pre) pre_names.push_back(eff.name);
  if (!pre_names.empty()) {
    auto [f, p] = wald_joint_zero(out.reg, pre_names, out.reg.n_clusters - 1);
    out.wald_pre_f = f;
    out.wald_pre_df = static_cast<int>(pre_names.size());
    out.wald_pre_p = p;
  }
  return out;
}

Eigen::VectorXd zscore(const Eigen::VectorXd& column) {
  const int n = static_cast<int>(column.size());
  if (n < 2) throw DataError("zscore needs >= 2 values");
  double mean = column.mean();
  double ss = (column.array() - mean).square().sum();
  double sd = std::sqrt(ss / (n - 1));
  if (sd == 0.0) throw DataError("zscore of a constant column");
  return (column.array() - mean) / sd;
}

BinscatterResult binscatter_residualized(const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& x,
                                         const std::vector<std::vector<int>>& fe_factors,
                                         int n_bins) {
  const int n = static_cast<int>(y.size());
  if (x.size() != n) throw ShapeError("x and y differ in length");
  if (n_bins < 1 || n_bins > n)
    throw ConfigError("n_bins must be in [1, N]");

  Eigen::MatrixXd z(n, 2);
  z.col(0) = y;
  z.col(1) = x;
  demean_inplace(z, fe_factors);
  Eigen::VectorXd yr = z.col(0).array() + y.mean();
  Eigen::VectorXd xr = z.col(1).array() + x.mean();

  // Residualized slope: one-regressor OLS with intercept. By Frisch-Waugh
  // this equals the ols_fe coefficient of x.
  double xbar = xr.mean(), ybar = yr.mean();
  double sxx = (xr.array() - xbar).square().sum();
  if (sxx == 0.0) throw DataError("x has no within variation");
  double sxy = ((xr.array() - xbar) * (yr.array() - ybar)).sum();

  BinscatterResult out;
  out.slope = sxy / sxx;
  out.intercept = ybar - out.slope * xbar;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (xr(a) != xr(b)) return xr(a) < xr(b);
    return a < b;
  });

  int base = n / n_bins, extra = n % n_bins;
  int pos = 0;
  for (int b = 0; b < n_bins; ++b) {
    int count = base + (b < extra ? 1 : 0);
    BinscatterResult::Bin bin;
    bin.count = count;
    for (int i = 0; i < count; ++i, ++pos) {
      bin.x_mean += xr(order[pos]);
      bin.y_mean += yr(order[pos]);
    }
    if (count > 0) {
      bin.x_mean /= count;
      bin.y_mean /= count;
    }
    out.bins.push_back(bin);
  }
  return out;
}

}  // namespace spill
