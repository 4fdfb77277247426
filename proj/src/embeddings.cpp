#include "spill/embeddings.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "spill/errors.hpp"

namespace spill {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

EmbeddingSet::EmbeddingSet(int dim, std::vector<std::string> ids,
                           std::vector<float> data)
    : dim_(dim), ids_(std::move(ids)), data_(std::move(data)) {
  if (dim_ <= 0) throw ShapeError("embedding dim must be positive");
  if (data_.size() != ids_.size() * static_cast<size_t>(dim_))
    throw ShapeError("embedding data size does not match count*dim");
  rebuild_index();
}

void EmbeddingSet::rebuild_index() {
  by_id_.clear();
  by_id_.reserve(ids_.size());
  for (int i = 0; i < static_cast<int>(ids_.size()); ++i) {
    auto [it, inserted] = by_id_.emplace(ids_[i], i);
    if (!inserted) throw IntegrityError("duplicate embedding id: " + ids_[i]);
  }
}

int EmbeddingSet::row_of(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? -1 : it->second;
}

void EmbeddingSet::normalize() {
  for (int i = 0; i < count(); ++i) {
    float* p = data_.data() + static_cast<size_t>(i) * dim_;
    double ss = 0.0;
    for (int d = 0; d < dim_; ++d) ss += static_cast<double>(p[d]) * p[d];
    double norm = std::sqrt(ss);
    if (!(norm > 0.0))
      throw DataError("zero-norm embedding row " + std::to_string(i) + " (id " +
                      ids_[i] + ")");
    for (int d = 0; d < dim_; ++d)
      p[d] = static_cast<float>(static_cast<double>(p[d]) / norm);
  }
}

EmbeddingSet load_embeddings(const std::string& vec_path, const std::string& ids_path) {
  std::ifstream vin(vec_path, std::ios::binary);
  if (!vin) throw ConfigError("cannot open embeddings file: " + vec_path);

  char magic[4];
  vin.read(magic, 4);
  if (!vin || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic in " + vec_path + " (expected EMB1)");
  std::uint32_t count = read_u32_le(vin);
  std::uint32_t dim = read_u32_le(vin);
  if (!vin) throw FormatError("truncated header in " + vec_path);
  if (count == 0 || dim == 0)
    throw FormatError("zero count or dim in " + vec_path);

  std::vector<float> data(static_cast<size_t>(count) * dim);
  vin.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (static_cast<size_t>(vin.gcount()) != data.size() * sizeof(float))
    throw FormatError("truncated payload in " + vec_path);
  vin.get();
  if (!vin.eof())
    throw FormatError("trailing bytes in " + vec_path);

  std::ifstream iin(ids_path);
  if (!iin) throw ConfigError("cannot open ids file: " + ids_path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(iin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty())
      throw FormatError("empty id at line " + std::to_string(ids.size() + 1) +
                        " in " + ids_path);
    ids.push_back(line);
  }
  if (ids.size() != count)
    throw FormatError("ids file has " + std::to_string(ids.size()) +
                      " lines but header count is " + std::to_string(count));

  EmbeddingSet emb(static_cast<int>(dim), std::move(ids), std::move(data));
  emb.normalize();
  return emb;
}

void write_embeddings(const EmbeddingSet& emb, const std::string& vec_path,
                      const std::string& ids_path) {
  std::ofstream vout(vec_path, std::ios::binary);
  if (!vout) throw ConfigError("cannot open for writing: " + vec_path);
  vout.write(kMagic, 4);
  write_u32_le(vout, static_cast<std::uint32_t>(emb.count()));
  write_u32_le(vout, static_cast<std::uint32_t>(emb.dim()));
  vout.write(reinterpret_cast<const char*>(emb.raw().data()),
             static_cast<std::streamsize>(emb.raw().size() * sizeof(float)));
  if (!vout) throw DataError("write failed: " + vec_path);

  std::ofstream iout(ids_path);
  if (!iout) throw ConfigError("cannot open for writing: " + ids_path);
  for (const auto& id : emb.ids()) iout << id << '\n';
  if (!iout) throw DataError("write failed: " + ids_path);
}

}  // namespace spill
