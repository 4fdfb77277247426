#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace spill {

// Aligned matrix of unit-norm vectors, one row per document id. Storage is
// float32 row-major; all similarity arithmetic accumulates in doubles.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(int dim, std::vector<std::string> ids, std::vector<float> data);

  int dim() const { return dim_; }
  int count() const { return static_cast<int>(ids_.size()); }

  std::span<const float> row(int i) const {
    return {data_.data() + static_cast<size_t>(i) * dim_, static_cast<size_t>(dim_)};
  }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(int i) const { return ids_[i]; }

  // -1 when absent.
  int row_of(const std::string& id) const;

  // Rescales every row to unit Euclidean norm (computed in double).
  // Throws DataError naming the row when a row has zero norm.
  void normalize();

  const std::vector<float>& raw() const { return data_; }

 private:
  int dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, int> by_id_;

  void rebuild_index();
};

// Binary format: magic "EMB1", u32-le count, u32-le dim, then count*dim
// float32-le values row-major. The companion ids file is newline-delimited,
// line i <-> row i.
EmbeddingSet load_embeddings(const std::string& vec_path, const std::string& ids_path);
void write_embeddings(const EmbeddingSet& emb, const std::string& vec_path,
                      const std::string& ids_path);

}  // namespace spill
