#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spill/corpus.hpp"
#include "spill/embeddings.hpp"
#include "spill/kernel.hpp"

namespace spill {

struct MeasureParams {
  int k = 20;    // pool members entering the top-k mean
  int rho = 20;  // own-field counterfactuals in the received denominator
  int tau = 20;  // window span in years
};

// Forward-vs-backward similarity ratio for one query against a pair of
// pools. Both indices (innovation, created spillover) reduce to this.
// Throws UndefinedMeasureError when either pool is empty; a zero backward
// mean yields an IEEE infinity that callers exclude under the log policy.
double index_ratio(std::span<const float> query, const Pool& forward,
                   const Pool& backward, int k);

// Innovation: the document against its own field's future and past.
double innovation_index(const Document& doc, const CorpusView& own_field_view,
                        const EmbeddingSet& emb, const MeasureParams& params);

// Created spillover: the document against another field's future and past.
double created_spillover(const Document& doc, const CorpusView& target_field_view,
                         const EmbeddingSet& emb, const MeasureParams& params);

struct ReceivedValue {
  double raw = 0.0;       // may be non-finite when the denominator is zero
  bool rho_clamped = false;
  int counterfactuals_used = 0;
};

// Received spillover: similarity of the document to the source field's past,
// over the mean of the same similarity for its rho nearest own-field past
// counterfactuals. The document itself never enters the counterfactual set.
ReceivedValue received_spillover(const Document& doc,
                                 const CorpusView& source_field_view,
                                 const CorpusView& own_field_view,
                                 const EmbeddingSet& emb,
                                 const MeasureParams& params);

// Mean over the defined per-field values; absent when none are defined.
struct AggregateValue {
  std::optional<double> raw;
  int sources_used = 0;
};
AggregateValue aggregate_received(const std::vector<std::optional<double>>& per_field);

struct ConceptTermList {
  std::string name;
  std::vector<std::string> terms;
  EmbeddingSet term_vectors;  // aligned to terms, embedded upstream
};

// Mean cosine between the document vector and every term vector.
double concept_similarity(std::span<const float> doc_vec, const ConceptTermList& term_list);

// Natural log on strictly positive values; nonpositive values are excluded
// and flagged. Absent inputs stay absent without counting as exclusions.
struct LogPolicyResult {
  std::vector<std::optional<double>> ln;
  std::vector<bool> excluded;
  int n_excluded = 0;
};
LogPolicyResult log_policy(const std::vector<std::optional<double>>& raw);

// --- Pipeline -------------------------------------------------------------

struct NamedFieldSet {
  std::string name;               // e.g. "omega"; CSV columns become recv_<name>_*
  std::set<std::string> fields;
};

struct MeasureRecord {
  std::string id;
  int year = 0;
  std::string field;
  std::optional<double> innovation;
  struct Received {
    std::optional<double> raw;
    int sources_used = 0;
  };
  std::map<std::string, Received> received;          // set name -> aggregate
  std::map<std::string, std::optional<double>> created;  // target field -> ratio
  std::map<std::string, double> concepts;            // concept name -> similarity
  std::vector<std::string> flags;                    // e.g. "innovation:empty_pool"
};

// Batch computation of all per-document measures over a corpus. Pools are
// cached per (field, year, direction) and shared read-only across worker
// threads; output order is (year, id) regardless of thread count.
class MeasureEngine {
 public:
  struct Config {
    MeasureParams params;
    FieldSetConfig field_sets;
    std::set<std::string> receiver_fields;   // empty: omega ∪ lambda
    YearRange receiver_years{0, 0};          // {0,0}: clip to [min+tau, max-tau]
    std::vector<NamedFieldSet> source_sets;  // empty: {omega, lambda} defaults
    std::set<std::string> created_targets;
    std::vector<ConceptTermList> concepts;
    int n_threads = 1;
  };

  MeasureEngine(const Corpus& corpus, const EmbeddingSet& emb, Config config);

  std::vector<MeasureRecord> run();

  const Config& config() const { return config_; }

 private:
  const Corpus& corpus_;
  const EmbeddingSet& emb_;
  Config config_;
  std::map<std::string, CorpusView> own_views_;     // pools incl. patents
  std::map<std::string, CorpusView> source_views_;  // patents excluded per flag

  const CorpusView& own_view(const std::string& field);
  const CorpusView& source_view(const std::string& field);
};

void write_measure_csv(const std::vector<MeasureRecord>& records,
                       const std::vector<std::string>& received_set_names,
                       const std::vector<std::string>& created_targets,
                       const std::vector<std::string>& concept_names,
                       const std::string& path);

}  // namespace spill
