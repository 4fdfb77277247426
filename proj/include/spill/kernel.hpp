#pragma once

#include <span>
#include <string>
#include <vector>

#include "spill/corpus.hpp"
#include "spill/embeddings.hpp"

namespace spill {

// A year window strictly around a focal year t0: backward covers
// [t0-tau, t0-1], forward covers [t0+1, t0+tau]. t0 itself is never in the
// window.
struct WindowSpec {
  enum class Direction { backward, forward };
  int t0 = 0;
  int tau = 1;
  Direction dir = Direction::backward;

  int lo() const { return dir == Direction::backward ? t0 - tau : t0 + 1; }
  int hi() const { return dir == Direction::backward ? t0 - 1 : t0 + tau; }
};

// Pool member: embedding row plus the document id used for deterministic
// tie-breaking. The id view points into the owning corpus.
struct PoolEntry {
  int row = -1;
  std::string_view id;
  int year = 0;
};

// Window-restricted slice of one corpus view, ordered (year, id). May be
// empty.
struct Pool {
  std::vector<PoolEntry> entries;
  const EmbeddingSet* emb = nullptr;

  size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

// Cosine similarity of two vectors, normalized by both norms, accumulated in
// doubles and clamped to [-1, 1]. Throws ShapeError on dim mismatch.
double cosine(std::span<const float> u, std::span<const float> v);

// Plain dot product with double accumulation (callers that guarantee unit
// norm can skip the normalization in cosine()).
double dot(std::span<const float> u, std::span<const float> v);

// Mean cosine between the query and the k most similar pool members, with
// k clamped to the pool size. Ties at the k-th similarity admit the
// lexicographically smallest document id. Throws UndefinedMeasureError on an
// empty pool.
double topk_mean_similarity(std::span<const float> query, const Pool& pool, int k);

// All documents of the view whose year lies inside the window, ordered
// (year, id). Every view id must resolve in the embedding set.
Pool build_pool(const CorpusView& view, const WindowSpec& window,
                const EmbeddingSet& emb);

// Elementwise topk_mean_similarity over a row-major batch of queries.
// Output order matches query order for every thread count.
std::vector<double> batch_topk(std::span<const float> queries, int dim,
                               const Pool& pool, int k, int n_threads = 1);

// --- Embedding-space diagnostics -----------------------------------------

// Mean over vectors of the cosine to their nearest *other* vector.
// Requires >= 2 rows.
double mean_nn_cosine(const EmbeddingSet& emb);

// Fraction of total variance carried by the first principal component of
// the centered point cloud. Degenerate (zero-variance) input yields 0 and
// appends to warnings when provided.
double pc1_variance_fraction(const EmbeddingSet& emb,
                             std::vector<std::string>* warnings = nullptr);

// Mean |topk_A(i) ∩ topk_B(i)| / k over shared ids (self excluded).
// Both sets must hold exactly the same ids.
double rank_overlap(const EmbeddingSet& a, const EmbeddingSet& b, int k);

// Fraction of points whose majority label among the k nearest neighbors
// (self excluded) equals their own label. Label-count ties resolve to the
// label with the smallest sum of neighbor row indices.
double knn_label_accuracy(const EmbeddingSet& emb,
                          const std::vector<std::string>& labels, int k);

}  // namespace spill
