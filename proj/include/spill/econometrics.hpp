#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spill {

// Regression design after listwise deletion: named regressors, absorbed
// fixed-effect factors (integer codes), and an optional cluster factor.
struct Design {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;               // n x p, no dummies
  std::vector<std::string> names;  // size p
  std::vector<std::vector<int>> fe_factors;  // each size n, codes 0..L-1
  std::vector<std::string> fe_names;
  std::vector<int> cluster;        // empty: no clustering requested
  bool add_intercept = true;       // only honored when fe_factors is empty

  int n() const { return static_cast<int>(y.size()); }
};

enum class SeKind { classical, hc1, cr1 };

struct RegressionResult {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd residuals;
  double r2 = 0.0;       // overall, consistent with the dummy expansion
  int n_obs = 0;
  int n_params = 0;      // regressors + absorbed fixed-effect parameters
  int n_clusters = 0;    // 0 when no cluster factor
  int dropped_rows = 0;  // filled by builders that do listwise deletion
  SeKind se_kind = SeKind::classical;
  std::vector<std::string> warnings;

  double coef(const std::string& name) const;
  double stderr_of(const std::string& name) const;
  double tstat(const std::string& name) const;
  // two-sided p, student-t with (G-1) df under clustering, else (N-K)
  double pvalue(const std::string& name) const;
};

// Fixed-effects OLS via iterated demeaning (tolerance 1e-10 on the largest
// column change), then QR on the within-transformed data. Coefficients match
// the full dummy expansion; residuals are the full-model residuals. Rank
// deficiency after absorption raises CollinearityError naming a column.
RegressionResult ols_fe(const Design& design, SeKind se = SeKind::classical);

// Sandwich covariance with CR1 small-sample factor (G/(G-1))*((N-1)/(N-K)).
// xt is the within-transformed regressor matrix; requires >= 2 clusters.
Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& xt,
                                    const Eigen::VectorXd& residuals,
                                    const std::vector<int>& cluster, int n_params,
                                    std::vector<std::string>* warnings = nullptr);

// Heteroskedasticity-robust (HC1) covariance, scale N/(N-K).
Eigen::MatrixXd hc1_vcov(const Eigen::MatrixXd& xt, const Eigen::VectorXd& residuals,
                         int n_params);

// One interaction column x*1{year in [lo,hi]} per bin (closed intervals).
// Overlapping bins raise ConfigError. Column names are
// <x_name>_<lo>_<hi>.
struct PeriodBin {
  int lo = 0;
  int hi = 0;
};
std::vector<PeriodBin> parse_bins(const std::string& csv_spec);  // "1660-1679,..."
void validate_bins(const std::vector<PeriodBin>& bins);
std::vector<std::pair<std::string, Eigen::VectorXd>> make_period_interactions(
    const Eigen::VectorXd& x, const std::string& x_name,
    const std::vector<int>& year, const std::vector<PeriodBin>& bins);

// Randomization-style exact p: (1 + #{|placebo| >= |original|}) / (1 + J).
double fisher_exact_p(double original, const std::vector<double>& placebos);

// Event-study difference-in-differences panel.
struct PanelSpec {
  std::vector<int> unit;    // codes 0..U-1
  std::vector<int> year;
  Eigen::VectorXd outcome;  // ln mean innovation per unit-year
  Eigen::VectorXd treatment;  // intensity, constant within unit
  std::vector<PeriodBin> bins;
  int ref_bin = 0;            // omitted reference bin index
  int treat_start_year = 0;   // bins entirely before this are "pre"
  bool binary_treatment = false;  // 1{ln intensity > 0} i.e. raw index > 1
  bool unit_trends = false;       // linear trend per trend group
  std::vector<int> trend_group;   // defaults to unit when empty
};

struct DidResult {
  RegressionResult reg;
  struct BinEffect {
    PeriodBin bin;
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    bool is_pre = false;
  };
  std::vector<BinEffect> effects;
  // Wald F-test that all pre-period effects are zero (cluster df).
  double wald_pre_f = 0.0;
  int wald_pre_df = 0;
  double wald_pre_p = 1.0;
};

DidResult did_estimate(const PanelSpec& panel);

// Joint zero test on a named coefficient subset using the stored vcov;
// returns {F, p} with F = W/q against F(q, df2).
std::pair<double, double> wald_joint_zero(const RegressionResult& reg,
                                          const std::vector<std::string>& names,
                                          int df2);

// Mean 0, sample sd 1 (N-1 denominator). Zero variance raises DataError.
Eigen::VectorXd zscore(const Eigen::VectorXd& column);

// Residualize y and x on fixed effects, add back grand means, split into
// equal-count bins by x, and report the residualized OLS slope.
struct BinscatterResult {
  struct Bin {
    double x_mean = 0.0;
    double y_mean = 0.0;
    int count = 0;
  };
  std::vector<Bin> bins;
  double slope = 0.0;
  double intercept = 0.0;
};
BinscatterResult binscatter_residualized(const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& x,
                                         const std::vector<std::vector<int>>& fe_factors,
                                         int n_bins);

// Iterated demeaning shared by ols_fe and binscatter: projects out every
// factor until the largest column change is below tol.
void demean_inplace(Eigen::MatrixXd& columns,
                    const std::vector<std::vector<int>>& fe_factors,
                    double tol = 1e-10, int max_sweeps = 20000);

// Parameter count of the equivalent dummy model: p regressors + one
// intercept-bearing factor + (levels-1) for every further factor.
int dummy_param_count(int p, const std::vector<std::vector<int>>& fe_factors,
                      bool add_intercept);

// Codes a categorical column into 0..L-1 in first-appearance order.
std::vector<int> encode_factor(const std::vector<std::string>& values);
// Combined factor (e.g. subject x year interacted fixed effect).
std::vector<int> cross_factors(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace spill
