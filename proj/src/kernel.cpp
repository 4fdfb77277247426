#include "spill/kernel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "spill/errors.hpp"
#include "spill/util.hpp"

namespace spill {

double dot(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size())
    throw ShapeError("vector dims differ: " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  double acc = 0.0;
  for (size_t i = 0; i < u.size(); ++i)
    acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return acc;
}

double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size())
    throw ShapeError("vector dims differ: " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    double a = u[i], b = v[i];
    uv += a * b;
    uu += a * a;
    vv += b * b;
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  double c = uv / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

namespace {

struct Scored {
  double sim;
  int pos;  // position in pool, used to reach the id for tie-breaks
};

// (similarity descending, id ascending)
struct ScoredBetter {
  const Pool* pool;
  bool operator()(const Scored& a, const Scored& b) const {
    if (a.sim != b.sim) return a.sim > b.sim;
    return pool->entries[a.pos].id < pool->entries[b.pos].id;
  }
};

double topk_from_scores(std::vector<Scored>& scores, const Pool& pool, int k) {
  int kk = std::min<int>(k, static_cast<int>(scores.size()));
  ScoredBetter better{&pool};
  std::partial_sort(scores.begin(), scores.begin() + kk, scores.end(), better);
  double acc = 0.0;
  for (int i = 0; i < kk; ++i) acc += scores[i].sim;
  return acc / kk;
}

}  // namespace

double topk_mean_similarity(std::span<const float> query, const Pool& pool, int k) {
  if (pool.empty()) throw UndefinedMeasureError("empty pool");
  if (k <= 0) throw ConfigError("k must be positive");
  std::vector<Scored> scores;
  scores.reserve(pool.size());
  for (int p = 0; p < static_cast<int>(pool.size()); ++p)
    scores.push_back({cosine(query, pool.emb->row(pool.entries[p].row)), p});
  return topk_from_scores(scores, pool, k);
}

Pool build_pool(const CorpusView& view, const WindowSpec& window,
                const EmbeddingSet& emb) {
  if (window.tau <= 0) throw ConfigError("window tau must be positive");
  Pool pool;
  pool.emb = &emb;
  int lo = window.lo(), hi = window.hi();
  for (size_t i = 0; i < view.size(); ++i) {
    const Document& d = view.doc(i);
    if (d.year < lo || d.year > hi) continue;
    int row = emb.row_of(d.id);
    if (row < 0)
      throw IntegrityError("document id '" + d.id + "' has no embedding row");
    pool.entries.push_back({row, std::string_view(d.id), d.year});
  }
  // view enumeration is already (year, id); the filter preserves it
  return pool;
}

std::vector<double> batch_topk(std::span<const float> queries, int dim,
                               const Pool& pool, int k, int n_threads) {
  if (dim <= 0) throw ShapeError("dim must be positive");
  if (queries.size() % static_cast<size_t>(dim) != 0)
    throw ShapeError("query buffer is not a multiple of dim");
  int nq = static_cast<int>(queries.size() / dim);
  std::vector<double> out(nq);
  parallel_for(nq, n_threads, [&](int i) {
    std::span<const float> q = queries.subspan(static_cast<size_t>(i) * dim, dim);
    out[i] = topk_mean_similarity(q, pool, k);
  });
  return out;
}

double mean_nn_cosine(const EmbeddingSet& emb) {
  int n = emb.count();
  if (n < 2) throw UndefinedMeasureError("mean_nn_cosine needs >= 2 vectors");
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double best = -2.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      best = std::max(best, cosine(emb.row(i), emb.row(j)));
    }
    total += best;
  }
  return total / n;
}

double pc1_variance_fraction(const EmbeddingSet& emb,
                             std::vector<std::string>* warnings) {
  int n = emb.count(), d = emb.dim();
  if (n < 2) throw UndefinedMeasureError("pc1_variance_fraction needs >= 2 vectors");
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    auto r = emb.row(i);
    for (int j = 0; j < d; ++j) x(i, j) = r[j];
  }
  Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
  const auto& s = svd.singularValues();
  double total = 0.0;
  for (int i = 0; i < s.size(); ++i) total += s(i) * s(i);
  if (total <= 1e-24 * n * d) {
    if (warnings) warnings->push_back("pc1_variance_fraction: zero total variance");
    return 0.0;
  }
  return s(0) * s(0) / total;
}

namespace {

// Top-k neighbor rows of point i (self excluded), ties by lower row index.
std::vector<int> topk_neighbor_rows(const EmbeddingSet& emb, int i, int k) {
  int n = emb.count();
  std::vector<std::pair<double, int>> sims;
  sims.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    sims.emplace_back(cosine(emb.row(i), emb.row(j)), j);
  }
  int kk = std::min<int>(k, static_cast<int>(sims.size()));
  std::partial_sort(sims.begin(), sims.begin() + kk, sims.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<int> rows(kk);
  for (int t = 0; t < kk; ++t) rows[t] = sims[t].second;
  return rows;
}

}  // namespace

double rank_overlap(const EmbeddingSet& a, const EmbeddingSet& b, int k) {
  if (a.count() != b.count())
    throw IntegrityError("rank_overlap: sets differ in count");
  if (k <= 0) throw ConfigError("k must be positive");
  int n = a.count();
  if (n < 2) throw UndefinedMeasureError("rank_overlap needs >= 2 vectors");
  // Rows must describe the same documents; b is addressed through a's ids.
  std::vector<int> b_row(n);
  for (int i = 0; i < n; ++i) {
    int r = b.row_of(a.id(i));
    if (r < 0) throw IntegrityError("rank_overlap: id '" + a.id(i) + "' missing in second set");
    b_row[i] = r;
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    auto ka = topk_neighbor_rows(a, i, k);
    auto kb = topk_neighbor_rows(b, b_row[i], k);
    std::set<std::string> ids_a, ids_b;
    for (int r : ka) ids_a.insert(a.id(r));
    for (int r : kb) ids_b.insert(b.id(r));
    int common = 0;
    for (const auto& id : ids_a)
      if (ids_b.count(id)) ++common;
    total += static_cast<double>(common) / std::min<int>(k, n - 1);
  }
  return total / n;
}

double knn_label_accuracy(const EmbeddingSet& emb,
                          const std::vector<std::string>& labels, int k) {
  int n = emb.count();
  if (static_cast<int>(labels.size()) != n)
    throw ShapeError("labels size does not match embedding count");
  if (k <= 0) throw ConfigError("k must be positive");
  if (n < k + 1)
    throw UndefinedMeasureError("knn_label_accuracy needs >= k+1 points");
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    auto nbrs = topk_neighbor_rows(emb, i, k);
    std::map<std::string, std::pair<int, long long>> votes;  // label -> (count, row-sum)
    for (int r : nbrs) {
      auto& v = votes[labels[r]];
      v.first += 1;
      v.second += r;
    }
    std::string best;
    int best_count = -1;
    long long best_sum = 0;
    for (const auto& [label, v] : votes) {
      if (v.first > best_count ||
          (v.first == best_count && v.second < best_sum)) {
        best = label;
        best_count = v.first;
        best_sum = v.second;
      }
    }
    if (best == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / n;
}

}  // namespace spill
