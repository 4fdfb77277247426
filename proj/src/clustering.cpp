#include "spill/clustering.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

#include "json.hpp"
#include "spill/errors.hpp"

namespace spill {

using nlohmann::json;

int adaptive_min_cluster_size(int n, const ClusterParams& params) {
  int adaptive = static_cast<int>(std::ceil(params.gamma * n));
  return std::max(params.min_floor, adaptive);
}

// --- PCA ---------------------------------------------------------------------

PcaResult pca_fit_transform(const Eigen::MatrixXd& x, int components) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (n < 2) throw ShapeError("pca needs >= 2 rows");
  if (components < 1) throw ConfigError("pca components must be positive");

  PcaResult out;
  out.basis.mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - out.basis.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();

  // Numerical rank; rank-0 input keeps one (zero) component so downstream
  // stages still see well-formed shapes.
  double cutoff = std::max(n, d) * std::numeric_limits<double>::epsilon() *
                  (s.size() > 0 ? s(0) : 0.0);
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) ++rank;
  int c = std::min(components, std::max(rank, 1));
  out.components_reduced = c < components;

  Eigen::MatrixXd v = svd.matrixV().leftCols(c);
  // Deterministic sign: make each component's largest-magnitude loading
  // positive (first index wins on ties).
  for (int j = 0; j < c; ++j) {
    int arg = 0;
    double best = std::abs(v(0, j));
    for (int i = 1; i < d; ++i) {
      if (std::abs(v(i, j)) > best) {
        best = std::abs(v(i, j));
        arg = i;
      }
    }
    if (v(arg, j) < 0.0) v.col(j) = -v.col(j);
  }

  out.basis.components = v;
  out.scores_raw = centered * v;
  out.explained_variance.resize(c);
  for (int j = 0; j < c; ++j)
    out.explained_variance(j) = s(j) * s(j) / std::max(n - 1, 1);

  out.scores = out.scores_raw;
  for (int i = 0; i < n; ++i) {
    double norm = out.scores.row(i).norm();
    if (norm > 0.0) out.scores.row(i) /= norm;
  }
  return out;
}

Eigen::MatrixXd pca_project(const PcaBasis& basis, const Eigen::MatrixXd& x) {
  if (x.cols() != basis.mean.size())
    throw ShapeError("pca_project: input dim " + std::to_string(x.cols()) +
                     " does not match basis dim " + std::to_string(basis.mean.size()));
  Eigen::MatrixXd scores =
      (x.rowwise() - basis.mean.transpose()) * basis.components;
  for (int i = 0; i < scores.rows(); ++i) {
    double norm = scores.row(i).norm();
    if (norm > 0.0) scores.row(i) /= norm;
  }
  return scores;
}

// --- Density clustering --------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CondensedNode {
  int parent = -1;
  double birth_lambda = 0.0;
  double death_lambda = kInf;
  std::vector<int> children;                      // condensed node ids
  std::vector<std::pair<int, double>> points;     // (point, fall-out lambda)
};

double lambda_of(double dist) { return dist > 0.0 ? 1.0 / dist : kInf; }

struct Dendrogram {
  // Binary merge tree over n leaves; internal nodes are n..2n-2 in merge
  // order (ascending distance).
  std::vector<int> left, right;
  std::vector<double> dist;
  std::vector<int> size;
  int n = 0;

  int root() const { return n + static_cast<int>(dist.size()) - 1; }
  bool is_leaf(int node) const { return node < n; }
  int node_size(int node) const { return is_leaf(node) ? 1 : size[node - n]; }

  void collect_leaves(int node, std::vector<int>& out) const {
    if (is_leaf(node)) {
      out.push_back(node);
      return;
    }
    collect_leaves(left[node - n], out);
    collect_leaves(right[node - n], out);
  }
};

}  // namespace

DensityResult density_cluster(const Eigen::MatrixXd& points, int min_cluster_size) {
  const int n = static_cast<int>(points.rows());
  const int m = min_cluster_size;
  if (m < 2) throw ConfigError("min_cluster_size must be >= 2");

  DensityResult out;
  out.labels.assign(n, -1);
  out.probabilities.assign(n, 0.0);
  out.candidate.assign(n, -1);
  out.candidate_strength.assign(n, 0.0);
  if (n < m) return out;  // all noise; valid outcome

  // Pairwise Euclidean distances.
  Eigen::MatrixXd dist(n, n);
  for (int i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      double d = (points.row(i) - points.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  // Core distance: to the min_samples-th nearest neighbor including self,
  // with min_samples = min_cluster_size.
  int min_samples = std::min(m, n);
  std::vector<double> core(n);
  {
    std::vector<double> row(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) row[j] = dist(i, j);
      std::nth_element(row.begin(), row.begin() + (min_samples - 1), row.end());
      core[i] = row[min_samples - 1];
    }
  }

  auto mreach = [&](int i, int j) {
    return std::max({core[i], core[j], dist(i, j)});
  };

  // Minimum spanning tree over mutual reachability (Prim, ties by index).
  struct Edge {
    double w;
    int a, b;
  };
  std::vector<Edge> edges;
  {
    std::vector<bool> in_tree(n, false);
    std::vector<double> best(n, kInf);
    std::vector<int> from(n, -1);
    in_tree[0] = true;
    for (int j = 1; j < n; ++j) {
      best[j] = mreach(0, j);
      from[j] = 0;
    }
    for (int step = 1; step < n; ++step) {
      int pick = -1;
      for (int j = 0; j < n; ++j) {
        if (in_tree[j]) continue;
        if (pick < 0 || best[j] < best[pick]) pick = j;
      }
      in_tree[pick] = true;
      edges.push_back({best[pick], std::min(from[pick], pick),
                       std::max(from[pick], pick)});
      for (int j = 0; j < n; ++j) {
        if (in_tree[j]) continue;
        double w = mreach(pick, j);
        if (w < best[j]) {
          best[j] = w;
          from[j] = pick;
        }
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.w != y.w) return x.w < y.w;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  // Single-linkage dendrogram via union-find over the sorted edges.
  Dendrogram dendro;
  dendro.n = n;
  {
    std::vector<int> find_root(2 * n - 1);
    std::iota(find_root.begin(), find_root.end(), 0);
    std::function<int(int)> find = [&](int x) {
      while (find_root[x] != x) {
        find_root[x] = find_root[find_root[x]];
        x = find_root[x];
      }
      return x;
    };
    int next = n;
    for (const Edge& e : edges) {
      int ra = find(e.a), rb = find(e.b);
      dendro.left.push_back(ra);
      dendro.right.push_back(rb);
      dendro.dist.push_back(e.w);
      dendro.size.push_back(dendro.node_size(ra) + dendro.node_size(rb));
      find_root[ra] = next;
      find_root[rb] = next;
      ++next;
    }
  }

  // Condense: walk top-down; sides smaller than m fall out of the current
  // condensed node at the split lambda, splits with two big sides create
  // children.
  std::vector<CondensedNode> cnodes;
  cnodes.push_back({});  // root, birth 0
  {
    struct Item {
      int dnode;
      int cnode;
    };
    std::vector<Item> stack{{dendro.root(), 0}};
    std::vector<int> leaves;
    while (!stack.empty()) {
      Item item = stack.back();
      stack.pop_back();
      int node = item.dnode;
      CondensedNode& cn = cnodes[item.cnode];
      while (true) {
        int l = dendro.left[node - n], r = dendro.right[node - n];
        double lam = lambda_of(dendro.dist[node - n]);
        int sl = dendro.node_size(l), sr = dendro.node_size(r);
        if (sl >= m && sr >= m) {
          cn.death_lambda = lam;
          for (int side : {l, r}) {
            CondensedNode child;
            child.parent = item.cnode;
            child.birth_lambda = lam;
            cnodes.push_back(child);
            int cid = static_cast<int>(cnodes.size()) - 1;
            cnodes[item.cnode].children.push_back(cid);
            if (dendro.is_leaf(side)) {
              cnodes[cid].points.emplace_back(side, lam);  // m == 1 only
            } else {
              stack.push_back({side, cid});
            }
          }
          break;
        }
        if (sl < m && sr < m) {
          cn.death_lambda = lam;
          leaves.clear();
          dendro.collect_leaves(node, leaves);
          for (int p : leaves) cn.points.emplace_back(p, lam);
          break;
        }
        int small = sl < m ? l : r;
        int big = sl < m ? r : l;
        leaves.clear();
        dendro.collect_leaves(small, leaves);
        for (int p : leaves) cn.points.emplace_back(p, lam);
        if (dendro.is_leaf(big)) {  // unreachable for m >= 2
          cn.points.emplace_back(big, lam);
          cn.death_lambda = lam;
          break;
        }
        node = big;
      }
    }
  }

  // Cluster selection.
  std::vector<bool> selected(cnodes.size(), false);
  if (cnodes.size() == 1) {
    // Root-only tree. The root qualifies as a single cluster only when a
    // core of >= m points persists to zero distance (exact co-location);
    // points that fell out earlier stay noise.
    int survivors = 0;
    for (const auto& [p, lam] : cnodes[0].points)
      if (lam == kInf) ++survivors;
    if (cnodes[0].death_lambda == kInf && survivors >= m) selected[0] = true;
  } else {
    // Excess-of-mass, root excluded: a node beats its children when its own
    // stability exceeds the sum of theirs.
    std::vector<double> stability(cnodes.size(), 0.0);
    for (size_t c = 0; c < cnodes.size(); ++c) {
      double s = 0.0;
      for (const auto& [p, lam] : cnodes[c].points) {
        double gain = lam - cnodes[c].birth_lambda;
        if (std::isnan(gain)) gain = 0.0;  // inf - inf
        s += gain;
      }
      stability[c] = s;
    }
    std::vector<double> subtree_stability(cnodes.size(), 0.0);
    // Children always follow parents in cnodes, so reverse order is
    // bottom-up.
    for (int c = static_cast<int>(cnodes.size()) - 1; c >= 0; --c) {
      if (cnodes[c].children.empty()) {
        selected[c] = c != 0;
        subtree_stability[c] = stability[c];
        continue;
      }
      double child_sum = 0.0;
      for (int ch : cnodes[c].children) child_sum += subtree_stability[ch];
      if (c != 0 && stability[c] > child_sum) {
        selected[c] = true;
        subtree_stability[c] = stability[c];
        // Deselect the whole subtree below.
        std::vector<int> walk = cnodes[c].children;
        while (!walk.empty()) {
          int x = walk.back();
          walk.pop_back();
          selected[x] = false;
          for (int ch : cnodes[x].children) walk.push_back(ch);
        }
      } else {
        subtree_stability[c] = child_sum;
      }
    }
  }

  // Gather members per selected cluster (points recorded anywhere in the
  // selected node's subtree belong to it).
  struct RawCluster {
    std::vector<std::pair<int, double>> members;
    double lambda_max = 0.0;
    int min_point = std::numeric_limits<int>::max();
  };
  std::vector<RawCluster> raw;
  for (size_t c = 0; c < cnodes.size(); ++c) {
    if (!selected[c]) continue;
    RawCluster rc;
    std::vector<int> walk{static_cast<int>(c)};
    while (!walk.empty()) {
      int x = walk.back();
      walk.pop_back();
      for (const auto& pt : cnodes[x].points) rc.members.push_back(pt);
      for (int ch : cnodes[x].children) walk.push_back(ch);
    }
    if (cnodes.size() == 1) {
      // Root rule: only the co-located survivors are members.
      std::vector<std::pair<int, double>> core_members;
      for (const auto& [p, lam] : rc.members)
        if (lam == kInf) core_members.emplace_back(p, lam);
      rc.members = std::move(core_members);
    }
    for (const auto& [p, lam] : rc.members) {
      rc.lambda_max = std::max(rc.lambda_max, lam);
      rc.min_point = std::min(rc.min_point, p);
    }
    raw.push_back(std::move(rc));
  }
  std::sort(raw.begin(), raw.end(),
            [](const RawCluster& a, const RawCluster& b) {
              return a.min_point < b.min_point;
            });

  out.n_clusters = static_cast<int>(raw.size());
  std::vector<double> cluster_lambda_max(raw.size());
  for (size_t c = 0; c < raw.size(); ++c) {
    cluster_lambda_max[c] = raw[c].lambda_max;
    for (const auto& [p, lam] : raw[c].members) {
      out.labels[p] = static_cast<int>(c);
      double prob;
      if (lam == kInf)
        prob = 1.0;
      else if (raw[c].lambda_max == kInf || raw[c].lambda_max == 0.0)
        prob = lam == raw[c].lambda_max ? 1.0 : 0.0;
      else
        prob = std::min(1.0, lam / raw[c].lambda_max);
      out.probabilities[p] = prob;
      out.candidate[p] = static_cast<int>(c);
      out.candidate_strength[p] = prob;
    }
  }

  // Membership strength of noise points toward each cluster: the lambda at
  // which the point would join through its closest member, relative to the
  // cluster's strongest member.
  if (out.n_clusters > 0) {
    for (int p = 0; p < n; ++p) {
      if (out.labels[p] != -1) continue;
      int best_cluster = -1;
      double best_strength = -1.0;
      for (size_t c = 0; c < raw.size(); ++c) {
        double d_join = kInf;
        for (const auto& [q, lam_q] : raw[c].members) {
          (void)lam_q;
          d_join = std::min(d_join, std::max({dist(p, q), core[p], core[q]}));
        }
        double lam_join = lambda_of(d_join);
        double strength;
        if (cluster_lambda_max[c] == kInf)
          strength = lam_join == kInf ? 1.0 : 0.0;
        else if (cluster_lambda_max[c] == 0.0)
          strength = 0.0;
        else
          strength = std::min(1.0, lam_join / cluster_lambda_max[c]);
        if (strength > best_strength) {
          best_strength = strength;
          best_cluster = static_cast<int>(c);
        }
      }
      out.candidate[p] = best_cluster;
      out.candidate_strength[p] = best_strength;
    }
  }
  return out;
}

std::vector<int> reassign_noise(const std::vector<int>& labels,
                                const std::vector<int>& candidate,
                                const std::vector<double>& candidate_strength,
                                double threshold) {
  if (labels.size() != candidate.size() ||
      labels.size() != candidate_strength.size())
    throw ShapeError("reassign_noise: input lengths differ");
  std::vector<int> out = labels;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != -1) continue;
    if (candidate[i] >= 0 && candidate_strength[i] > threshold)
      out[i] = candidate[i];
  }
  return out;
}

Eigen::MatrixXd cluster_centroids(const Eigen::MatrixXd& points,
                                  const std::vector<int>& labels, int n_clusters) {
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(n_clusters, points.cols());
  std::vector<int> counts(n_clusters, 0);
  for (int i = 0; i < points.rows(); ++i) {
    int c = labels[i];
    if (c < 0) continue;
    if (c >= n_clusters) throw ShapeError("label out of range");
    centroids.row(c) += points.row(i);
    counts[c]++;
  }
  for (int c = 0; c < n_clusters; ++c) {
    if (counts[c] > 0) centroids.row(c) /= counts[c];
    double norm = centroids.row(c).norm();
    if (norm > 0.0) centroids.row(c) /= norm;
  }
  return centroids;
}

std::vector<int> absorb_outliers(const std::vector<int>& labels,
                                 const Eigen::MatrixXd& points,
                                 const Eigen::MatrixXd& centroids,
                                 double threshold) {
  if (static_cast<int>(labels.size()) != points.rows())
    throw ShapeError("absorb_outliers: labels/points length mismatch");
  std::vector<int> out = labels;
  for (int i = 0; i < points.rows(); ++i) {
    if (labels[i] != -1) continue;
    int best = -1;
    double best_cos = -2.0;
    for (int c = 0; c < centroids.rows(); ++c) {
      double cos = points.row(i).dot(centroids.row(c));
      double pn = points.row(i).norm(), cn = centroids.row(c).norm();
      if (pn > 0.0 && cn > 0.0) cos /= pn * cn;
      if (cos > best_cos) {  // strict: ties keep the lowest cluster id
        best_cos = cos;
        best = c;
      }
    }
    if (best >= 0 && best_cos > threshold) out[i] = best;
  }
  return out;
}

// --- Keywords -----------------------------------------------------------------

namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

}  // namespace

std::vector<std::vector<std::string>> tfidf_labels(
    const std::vector<std::vector<std::string>>& cluster_texts, int top_n) {
  if (top_n < 1) throw ConfigError("top_n must be positive");
  const int n_clusters = static_cast<int>(cluster_texts.size());

  std::vector<std::map<std::string, int>> counts(n_clusters);
  std::map<std::string, int> doc_freq;  // clusters containing the token
  for (int c = 0; c < n_clusters; ++c) {
    for (const auto& text : cluster_texts[c])
      for (const auto& tok : tokenize_lower(text)) counts[c][tok]++;
    for (const auto& [tok, cnt] : counts[c]) {
      (void)cnt;
      doc_freq[tok]++;
    }
  }

  std::vector<std::vector<std::string>> out(n_clusters);
  for (int c = 0; c < n_clusters; ++c) {
    if (counts[c].empty()) continue;  // flagged by the caller
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& [tok, cnt] : counts[c]) {
      // Smoothed idf; a token present in every cluster is dampened to the
      // baseline weight, unique tokens score above it.
      double idf = std::log((1.0 + n_clusters) / (1.0 + doc_freq[tok])) + 1.0;
      scored.emplace_back(cnt * idf, tok);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    int take = std::min<int>(top_n, static_cast<int>(scored.size()));
    for (int i = 0; i < take; ++i) out[c].push_back(scored[i].second);
  }
  return out;
}

// --- Model ----------------------------------------------------------------------

std::string stage_name(AssignStage s) {
  switch (s) {
    case AssignStage::dense: return "dense";
    case AssignStage::reassigned: return "reassigned";
    case AssignStage::absorbed: return "absorbed";
    case AssignStage::noise: return "noise";
  }
  return "noise";
}

ClusterModel fit_cluster_model(const std::string& subject,
                               const std::vector<std::string>& doc_ids,
                               const Eigen::MatrixXd& embeddings,
                               const ClusterParams& params,
                               const std::vector<std::string>& texts) {
  const int n = static_cast<int>(embeddings.rows());
  if (static_cast<int>(doc_ids.size()) != n)
    throw ShapeError("doc_ids/embeddings length mismatch");
  if (!texts.empty() && static_cast<int>(texts.size()) != n)
    throw ShapeError("texts/embeddings length mismatch");

  ClusterModel model;
  model.subject = subject;
  model.params = params;
  model.doc_ids = doc_ids;

  PcaResult pca = pca_fit_transform(embeddings, params.pca_components);
  model.basis = pca.basis;
  if (pca.components_reduced)
    model.notes.push_back("pca components reduced to rank " +
                          std::to_string(pca.basis.components.cols()));

  int m = adaptive_min_cluster_size(n, params);
  DensityResult density = density_cluster(pca.scores, m);
  model.n_clusters = density.n_clusters;

  std::vector<int> labels = reassign_noise(density.labels, density.candidate,
                                           density.candidate_strength,
                                           params.noise_reassign_threshold);
  model.stages.assign(n, AssignStage::noise);
  for (int i = 0; i < n; ++i) {
    if (density.labels[i] != -1)
      model.stages[i] = AssignStage::dense;
    else if (labels[i] != -1)
      model.stages[i] = AssignStage::reassigned;
  }

  // Centroids reflect the dense+reassigned membership; absorption compares
  // against exactly these and does not move them.
  model.centroids = cluster_centroids(pca.scores, labels, model.n_clusters);

  std::vector<int> final_labels = absorb_outliers(
      labels, pca.scores, model.centroids, params.absorb_cosine_threshold);
  for (int i = 0; i < n; ++i)
    if (labels[i] == -1 && final_labels[i] != -1)
      model.stages[i] = AssignStage::absorbed;
  model.labels = final_labels;

  if (!texts.empty() && model.n_clusters > 0) {
    std::vector<std::vector<std::string>> cluster_texts(model.n_clusters);
    for (int i = 0; i < n; ++i)
      if (model.labels[i] >= 0) cluster_texts[model.labels[i]].push_back(texts[i]);
    model.keywords = tfidf_labels(cluster_texts, 10);
    for (int c = 0; c < model.n_clusters; ++c)
      if (model.keywords[c].empty())
        model.notes.push_back("cluster " + std::to_string(c) + " has no keywords");
  } else {
    model.keywords.assign(std::max(model.n_clusters, 0), {});
    if (texts.empty()) model.notes.push_back("no texts given; keywords empty");
  }
  return model;
}

std::vector<int> assign_external(const EmbeddingSet& entries, const ClusterModel& model) {
  if (model.n_clusters == 0)
    throw DataError("cluster model has no clusters to assign to");
  const int n = entries.count();
  Eigen::MatrixXd x(n, entries.dim());
  for (int i = 0; i < n; ++i) {
    auto r = entries.row(i);
    for (int j = 0; j < entries.dim(); ++j) x(i, j) = r[j];
  }
  Eigen::MatrixXd projected = pca_project(model.basis, x);

  std::vector<int> out(n, -1);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_cos = -2.0;
    for (int c = 0; c < model.n_clusters; ++c) {
      double cos = projected.row(i).dot(model.centroids.row(c));
      if (cos > best_cos) {
        best_cos = cos;
        best = c;
      }
    }
    out[i] = best;  // total mapping: even orthogonal entries get the argmax
  }
  return out;
}

void save_cluster_model(const ClusterModel& model, const std::string& json_path,
                        const std::string& basis_path) {
  json j;
  j["subject"] = model.subject;
  j["params"] = {{"pca_components", model.params.pca_components},
                 {"gamma", model.params.gamma},
                 {"min_floor", model.params.min_floor},
                 {"noise_reassign_threshold", model.params.noise_reassign_threshold},
                 {"absorb_cosine_threshold", model.params.absorb_cosine_threshold}};
  j["n_clusters"] = model.n_clusters;
  json centroids = json::array();
  for (int c = 0; c < model.centroids.rows(); ++c) {
    json row = json::array();
    for (int k = 0; k < model.centroids.cols(); ++k) row.push_back(model.centroids(c, k));
    centroids.push_back(row);
  }
  j["centroids"] = centroids;
  j["keywords"] = model.keywords;
  j["doc_ids"] = model.doc_ids;
  j["labels"] = model.labels;
  json stages = json::array();
  for (auto s : model.stages) stages.push_back(stage_name(s));
  j["stages"] = stages;
  j["notes"] = model.notes;

  std::ofstream out(json_path);
  if (!out) throw ConfigError("cannot open for writing: " + json_path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + json_path);

  // Basis: row 0 is the mean, rows 1.. are the components.
  int dim = static_cast<int>(model.basis.mean.size());
  int comps = static_cast<int>(model.basis.components.cols());
  std::vector<std::string> ids = {"mean"};
  std::vector<float> data;
  data.reserve(static_cast<size_t>(comps + 1) * dim);
  for (int d = 0; d < dim; ++d) data.push_back(static_cast<float>(model.basis.mean(d)));
  for (int c = 0; c < comps; ++c) {
    ids.push_back("pc_" + std::to_string(c));
    for (int d = 0; d < dim; ++d)
      data.push_back(static_cast<float>(model.basis.components(d, c)));
  }
  EmbeddingSet basis(dim, std::move(ids), std::move(data));
  write_embeddings(basis, basis_path, basis_path + ".ids");
}

ClusterModel load_cluster_model(const std::string& json_path,
                                const std::string& basis_path) {
  std::ifstream in(json_path);
  if (!in) throw ConfigError("cannot open: " + json_path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("bad cluster model json: ") + e.what());
  }

  ClusterModel model;
  try {
    model.subject = j.at("subject").get<std::string>();
    const json& p = j.at("params");
    model.params.pca_components = p.at("pca_components").get<int>();
    model.params.gamma = p.at("gamma").get<double>();
    model.params.min_floor = p.at("min_floor").get<int>();
    model.params.noise_reassign_threshold = p.at("noise_reassign_threshold").get<double>();
    model.params.absorb_cosine_threshold = p.at("absorb_cosine_threshold").get<double>();
    model.n_clusters = j.at("n_clusters").get<int>();
    const json& cent = j.at("centroids");
    if (!cent.empty()) {
      model.centroids.resize(cent.size(), cent[0].size());
      for (size_t c = 0; c < cent.size(); ++c)
        for (size_t k = 0; k < cent[c].size(); ++k)
          model.centroids(static_cast<int>(c), static_cast<int>(k)) =
              cent[c][k].get<double>();
    }
    model.keywords = j.at("keywords").get<std::vector<std::vector<std::string>>>();
    model.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
    model.labels = j.at("labels").get<std::vector<int>>();
    for (const auto& s : j.at("stages")) {
      std::string name = s.get<std::string>();
      if (name == "dense") model.stages.push_back(AssignStage::dense);
      else if (name == "reassigned") model.stages.push_back(AssignStage::reassigned);
      else if (name == "absorbed") model.stages.push_back(AssignStage::absorbed);
      else model.stages.push_back(AssignStage::noise);
    }
    if (j.contains("notes"))
      model.notes = j.at("notes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad cluster model json: ") + e.what());
  }

  // The basis matrix is raw (the mean row may legitimately have any norm),
  // so it bypasses the normalizing loader.
  {
    std::ifstream bin(basis_path, std::ios::binary);
    if (!bin) throw ConfigError("cannot open: " + basis_path);
    char magic[4];
    bin.read(magic, 4);
    if (!bin || std::string(magic, 4) != "EMB1")
      throw FormatError("bad magic in " + basis_path);
    unsigned char hdr[8];
    bin.read(reinterpret_cast<char*>(hdr), 8);
    if (!bin) throw FormatError("truncated header in " + basis_path);
    auto u32 = [&](int off) {
      return static_cast<unsigned>(hdr[off]) | (static_cast<unsigned>(hdr[off + 1]) << 8) |
             (static_cast<unsigned>(hdr[off + 2]) << 16) |
             (static_cast<unsigned>(hdr[off + 3]) << 24);
    };
    int rows = static_cast<int>(u32(0));
    int dim = static_cast<int>(u32(4));
    if (rows < 1 || dim < 1) throw FormatError("bad basis shape in " + basis_path);
    std::vector<float> data(static_cast<size_t>(rows) * dim);
    bin.read(reinterpret_cast<char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (static_cast<size_t>(bin.gcount()) != data.size() * sizeof(float))
      throw FormatError("truncated payload in " + basis_path);
    model.basis.mean.resize(dim);
    for (int d = 0; d < dim; ++d) model.basis.mean(d) = data[d];
    model.basis.components.resize(dim, rows - 1);
    for (int c = 1; c < rows; ++c)
      for (int d = 0; d < dim; ++d)
        model.basis.components(d, c - 1) = data[static_cast<size_t>(c) * dim + d];
  }
  return model;
}

}  // namespace spill
