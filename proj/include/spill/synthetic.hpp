#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spill/corpus.hpp"
#include "spill/econometrics.hpp"
#include "spill/embeddings.hpp"
#include "spill/kernel.hpp"
#include "spill/measures.hpp"

namespace spill {

// Ground-truth corpus generator. Field means drift deterministically through
// the embedding space; a configurable share of lambda documents is mixed
// toward the past of the omega fields (weight w), and the coupling schedule
// c(t) additionally pulls exactly those documents toward their own field's
// future mean. That plants the received-spillover -> innovation relationship
// the estimators are supposed to recover, with a sign flip at the break year.
struct SynthField {
  std::string label;
  enum class Domain { omega, lambda, placebo } domain = Domain::placebo;
  DocKind kind = DocKind::title;
};

struct SynthConfig {
  std::vector<SynthField> fields;
  int year_lo = 1600;
  int year_hi = 1800;
  int docs_per_field_year = 4;
  int dim = 16;
  double drift_rate = 0.03;   // yearly motion of each field mean
  double coupling_pre = 0.0;  // c(t) before the break year
  double coupling_post = 0.0; // c(t) from the break year on
  int break_year = 1700;
  double pull_scale = 1.0;
  double mix_prob = 0.5;  // share of lambda docs with omega-past mixing
  double mix_lo = 0.25;   // mixing weight range for mixed docs
  double mix_hi = 0.6;
  double noise = 0.15;    // expected norm of the isotropic noise term
  std::uint64_t seed = 1;

  FieldSetConfig field_sets() const;
};

struct GroundTruthRow {
  std::string id;
  int year = 0;
  std::string field;
  double omega_mix = 0.0;  // planted proximity to the omega past
  double pull = 0.0;       // c(year) * omega_mix
};

struct SynthResult {
  Corpus corpus;
  EmbeddingSet embeddings;
  std::vector<GroundTruthRow> truth;
};

SynthResult generate(const SynthConfig& config);

void write_ground_truth(const std::vector<GroundTruthRow>& truth,
                        const std::string& path);

// Event-study panel with a planted post-period level shift on treated units.
struct DidSynthConfig {
  int n_units = 25;
  int year_lo = 1695;
  int year_hi = 1714;
  int treat_start = 1705;
  double delta = 0.1;        // planted effect on treated units post start
  double treated_share = 0.5;
  double unit_sd = 0.3;
  double year_sd = 0.2;
  double noise = 0.05;
  std::vector<PeriodBin> bins;  // empty: consecutive 5-year bins
  std::uint64_t seed = 1;
};

struct DidSynthResult {
  PanelSpec panel;
  std::vector<bool> treated;  // per unit
};

DidSynthResult generate_did_panel(const DidSynthConfig& config);

// --- Independent oracles ----------------------------------------------------
//
// Reference implementations used by the acceptance suite. They share no
// arithmetic code with the kernel/measures/econometrics paths: similarities
// are recomputed with plain loops and full sorts, and the fixed-effect fit
// uses an explicit dummy matrix.

double oracle_topk(std::span<const float> query, const Pool& pool, int k);

struct OracleOlsResult {
  Eigen::VectorXd beta;       // aligned to design.names
  Eigen::VectorXd residuals;  // full-model residuals
};
OracleOlsResult oracle_ols(const Design& design);

struct OracleMeasureRecord {
  std::string id;
  std::optional<double> innovation;
  std::map<std::string, std::optional<double>> received;  // set name -> aggregate
  std::map<std::string, int> received_sources;            // set name -> used count
};

// Direct transcription of the index definitions over a full corpus scan.
// Config semantics mirror MeasureEngine::Config.
std::vector<OracleMeasureRecord> oracle_measures(const Corpus& corpus,
                                                 const EmbeddingSet& emb,
                                                 const MeasureEngine::Config& config);

}  // namespace spill
