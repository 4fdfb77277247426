#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "spill/embeddings.hpp"

namespace spill {

struct ClusterParams {
  int pca_components = 50;
  double gamma = 0.015;  // adaptive size factor
  int min_floor = 6;
  double noise_reassign_threshold = 0.15;  // strict
  double absorb_cosine_threshold = 0.4;    // strict
};

// max(min_floor, ceil(gamma * n))
int adaptive_min_cluster_size(int n, const ClusterParams& params);

// --- PCA -------------------------------------------------------------------

struct PcaBasis {
  Eigen::VectorXd mean;        // dim
  Eigen::MatrixXd components;  // dim x c, orthonormal columns
};

struct PcaResult {
  PcaBasis basis;
  Eigen::MatrixXd scores;      // n x c, rows L2-normalized
  Eigen::MatrixXd scores_raw;  // n x c, centered projection before scaling
  Eigen::VectorXd explained_variance;  // c entries, descending
  bool components_reduced = false;     // requested count exceeded the rank
};

// Centered projection onto the top principal components via full SVD.
// Sign convention: the largest-magnitude loading of every component is
// positive (first index wins ties). Rows of `scores` are L2-normalized so
// Euclidean distance matches cosine.
PcaResult pca_fit_transform(const Eigen::MatrixXd& x, int components);

// Projects new points through a stored basis and L2-normalizes rows.
Eigen::MatrixXd pca_project(const PcaBasis& basis, const Eigen::MatrixXd& x);

// --- Density clustering ------------------------------------------------

// Deterministic hierarchical density clustering: mutual-reachability
// single-linkage, condensation at min_cluster_size, excess-of-mass cluster
// selection. Noise points carry the membership strength of their best
// cluster so the reassignment stage can apply its threshold.
struct DensityResult {
  std::vector<int> labels;                  // -1 = noise
  std::vector<double> probabilities;        // own-cluster strength, 0 for noise
  std::vector<int> candidate;               // best cluster (own for members)
  std::vector<double> candidate_strength;   // strength toward candidate
  int n_clusters = 0;
};

DensityResult density_cluster(const Eigen::MatrixXd& points, int min_cluster_size);

// Noise points whose best-cluster strength strictly exceeds the threshold
// adopt that cluster.
std::vector<int> reassign_noise(const std::vector<int>& labels,
                                const std::vector<int>& candidate,
                                const std::vector<double>& candidate_strength,
                                double threshold);

// Unit-norm centroid per cluster (mean of member rows, renormalized).
Eigen::MatrixXd cluster_centroids(const Eigen::MatrixXd& points,
                                  const std::vector<int>& labels, int n_clusters);

// Remaining noise joins the nearest centroid when the cosine strictly
// exceeds the threshold; ties resolve to the lowest cluster id.
std::vector<int> absorb_outliers(const std::vector<int>& labels,
                                 const Eigen::MatrixXd& points,
                                 const Eigen::MatrixXd& centroids,
                                 double threshold);

// --- Keywords ----------------------------------------------------------------

// Top keywords per cluster by tf-idf of the cluster's aggregated term counts
// against all clusters. Tokens are lowercased; single tokens, no stop-word
// removal; ties break alphabetically.
std::vector<std::vector<std::string>> tfidf_labels(
    const std::vector<std::vector<std::string>>& cluster_texts, int top_n);

// --- Model -------------------------------------------------------------------

enum class AssignStage { dense, reassigned, absorbed, noise };
std::string stage_name(AssignStage s);

struct ClusterModel {
  std::string subject;
  ClusterParams params;
  PcaBasis basis;
  int n_clusters = 0;
  Eigen::MatrixXd centroids;  // n_clusters x c, unit rows
  std::vector<std::string> doc_ids;
  std::vector<int> labels;
  std::vector<AssignStage> stages;
  std::vector<std::vector<std::string>> keywords;
  std::vector<std::string> notes;
};

// Full per-subject pipeline: PCA, density clustering with the adaptive
// minimum size, posterior reassignment, centroid absorption, keywords.
// texts may be empty (keyword lists stay empty, noted).
ClusterModel fit_cluster_model(const std::string& subject,
                               const std::vector<std::string>& doc_ids,
                               const Eigen::MatrixXd& embeddings,
                               const ClusterParams& params,
                               const std::vector<std::string>& texts = {});

// Maps every external entry to the cluster whose centroid is most cosine-
// similar after projection through the model basis; ties to the lowest id.
// The mapping is total. Throws ShapeError on dimension mismatch.
std::vector<int> assign_external(const EmbeddingSet& entries, const ClusterModel& model);

// Persistence: JSON header (params, centroids, keywords, labels) plus the
// basis as an EMB1 matrix (row 0 = mean, then one row per component).
void save_cluster_model(const ClusterModel& model, const std::string& json_path,
                        const std::string& basis_path);
ClusterModel load_cluster_model(const std::string& json_path,
                                const std::string& basis_path);

}  // namespace spill
