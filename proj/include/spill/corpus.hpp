#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace spill {

enum class DocKind { title, patent, lexicon_entry };

std::string kind_name(DocKind k);
DocKind kind_from_name(const std::string& s);  // throws FormatError

// Author metadata extracted upstream from title pages; used as indicator
// variables in the mechanism regressions.
struct AuthorFlags {
  bool royal_society = false;
  bool enlightenment_society = false;
  bool engineer = false;
  bool university_enrolled = false;
  bool academic = false;
  bool medical = false;

  bool operator==(const AuthorFlags&) const = default;
};

inline const std::vector<std::string> kAuthorFlagNames = {
    "royal_society", "enlightenment_society", "engineer",
    "university_enrolled", "academic", "medical"};

bool get_flag(const AuthorFlags& f, const std::string& name);
void set_flag(AuthorFlags& f, const std::string& name, bool value);

struct Document {
  std::string id;
  int year = 0;
  std::string field;
  std::optional<std::string> subfield;
  DocKind kind = DocKind::title;
  int word_count = 0;
  AuthorFlags flags;
  std::optional<std::string> language;
  // Set when the year falls outside the configured range for the kind.
  // Flagged documents are retained but excluded from default views.
  bool range_flagged = false;
};

// Accepted year ranges per document kind. Out-of-range records are kept but
// flagged; patents before 1700 are the motivating case.
struct RangePolicy {
  int title_lo = 1600, title_hi = 1800;
  int patent_lo = 1700, patent_hi = 1800;
  int lexicon_lo = 1600, lexicon_hi = 1800;

  bool in_range(DocKind kind, int year) const;
};

class Corpus {
 public:
  Corpus() = default;

  // Throws IntegrityError on duplicate id.
  void add(Document doc);

  const std::vector<Document>& docs() const { return docs_; }
  size_t size() const { return docs_.size(); }
  const Document& at(int i) const { return docs_[i]; }

  // -1 when absent.
  int index_of(const std::string& id) const;
  bool has_field(const std::string& field) const;
  const std::set<std::string>& fields() const { return fields_; }

  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, int> by_id_;
  std::set<std::string> fields_;
  std::vector<std::string> warnings_;
};

// JSONL, one object per line: id, year, field, subfield, kind, word_count,
// flags, language. Malformed lines raise FormatError naming the line;
// duplicate ids raise IntegrityError. Range violations become warnings and
// flag the document.
Corpus load_metadata(const std::string& path, const RangePolicy& policy = {});
void write_metadata(const Corpus& corpus, const std::string& path);

// Field-set configuration: propositional (omega) and prescriptive (lambda)
// subject classes. The two sets must be disjoint.
struct FieldSetConfig {
  std::set<std::string> omega = {"applied physics", "astronomy", "mathematics",
                                 "chemistry", "encyclopedias"};
  std::set<std::string> lambda = {"technical instructions trades",
                                  "technical instructions agriculture",
                                  "navigation", "scientific instruments",
                                  "patents"};
  bool spillover_source_excludes_patents = true;

  void validate() const;  // throws ConfigError on overlap
};

struct YearRange {
  int lo = 0;
  int hi = 0;
  bool contains(int y) const { return lo <= y && y <= hi; }
};

// Filtered, deterministically ordered window onto a corpus. Enumeration
// order is (year ascending, id ascending).
class CorpusView {
 public:
  CorpusView() = default;
  const Corpus* corpus = nullptr;
  std::vector<int> indices;  // into corpus->docs(), sorted (year, id)

  size_t size() const { return indices.size(); }
  const Document& doc(size_t i) const { return corpus->at(indices[i]); }
};

// fields must all be known to the corpus; years must satisfy lo <= hi.
// Range-flagged documents are excluded unless include_flagged is set.
CorpusView make_view(const Corpus& corpus, const std::set<std::string>& fields,
                     YearRange years,
                     const std::set<DocKind>& kinds = {DocKind::title,
                                                       DocKind::patent,
                                                       DocKind::lexicon_entry},
                     bool include_flagged = false);

}  // namespace spill
