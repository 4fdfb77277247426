#include "spill/corpus.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "spill/errors.hpp"

namespace spill {

using nlohmann::json;

std::string kind_name(DocKind k) {
  switch (k) {
    case DocKind::title: return "title";
    case DocKind::patent: return "patent";
    case DocKind::lexicon_entry: return "lexicon_entry";
  }
  return "title";
}

DocKind kind_from_name(const std::string& s) {
  if (s == "title") return DocKind::title;
  if (s == "patent") return DocKind::patent;
  if (s == "lexicon_entry") return DocKind::lexicon_entry;
  throw FormatError("unknown document kind: " + s);
}

bool get_flag(const AuthorFlags& f, const std::string& name) {
  if (name == "royal_society") return f.royal_society;
  if (name == "enlightenment_society") return f.enlightenment_society;
  if (name == "engineer") return f.engineer;
  if (name == "university_enrolled") return f.university_enrolled;
  if (name == "academic") return f.academic;
  if (name == "medical") return f.medical;
  throw ConfigError("unknown author flag: " + name);
}

void set_flag(AuthorFlags& f, const std::string& name, bool value) {
  if (name == "royal_society") f.royal_society = value;
  else if (name == "enlightenment_society") f.enlightenment_society = value;
  else if (name == "engineer") f.engineer = value;
  else if (name == "university_enrolled") f.university_enrolled = value;
  else if (name == "academic") f.academic = value;
  else if (name == "medical") f.medical = value;
  else throw ConfigError("unknown author flag: " + name);
}

bool RangePolicy::in_range(DocKind kind, int year) const {
  switch (kind) {
    case DocKind::title: return year >= title_lo && year <= title_hi;
    case DocKind::patent: return year >= patent_lo && year <= patent_hi;
    case DocKind::lexicon_entry: return year >= lexicon_lo && year <= lexicon_hi;
  }
  return false;
}

void Corpus::add(Document doc) {
  auto [it, inserted] = by_id_.emplace(doc.id, static_cast<int>(docs_.size()));
  if (!inserted) throw IntegrityError("duplicate document id: " + doc.id);
  fields_.insert(doc.field);
  docs_.push_back(std::move(doc));
}

int Corpus::index_of(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? -1 : it->second;
}

bool Corpus::has_field(const std::string& field) const {
  return fields_.count(field) > 0;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

Document parse_record(const json& j, int lineno) {
  auto where = [&](const std::string& what) {
    return "line " + std::to_string(lineno) + ": " + what;
  };
  if (!j.is_object()) throw FormatError(where("record is not an object"));

  Document d;
  try {
    if (!j.contains("id") || !j["id"].is_string())
      throw FormatError(where("missing or non-string id"));
    d.id = j["id"].get<std::string>();
    if (d.id.empty()) throw FormatError(where("empty id"));

    // Measures are undefined without a timestamp, so a missing year is a
    // hard load failure rather than a flagged record.
    if (!j.contains("year") || !j["year"].is_number_integer())
      throw FormatError(where("missing or non-integer year (document " + d.id + ")"));
    d.year = j["year"].get<int>();

    if (!j.contains("field") || !j["field"].is_string())
      throw FormatError(where("missing or non-string field"));
    d.field = trim(j["field"].get<std::string>());
    if (d.field.empty()) throw FormatError(where("empty field label"));

    if (j.contains("subfield") && !j["subfield"].is_null())
      d.subfield = j["subfield"].get<std::string>();

    if (!j.contains("kind") || !j["kind"].is_string())
      throw FormatError(where("missing or non-string kind"));
    d.kind = kind_from_name(j["kind"].get<std::string>());

    if (!j.contains("word_count") || !j["word_count"].is_number_integer())
      throw FormatError(where("missing or non-integer word_count"));
    d.word_count = j["word_count"].get<int>();
    if (d.word_count < 0) throw FormatError(where("negative word_count"));

    if (j.contains("flags") && !j["flags"].is_null()) {
      if (!j["flags"].is_object()) throw FormatError(where("flags is not an object"));
      for (auto& [key, val] : j["flags"].items()) {
        bool known = std::find(kAuthorFlagNames.begin(), kAuthorFlagNames.end(),
                               key) != kAuthorFlagNames.end();
        if (!known) continue;  // tolerated; caller sees a warning
        if (!val.is_boolean()) throw FormatError(where("flag " + key + " is not boolean"));
        set_flag(d.flags, key, val.get<bool>());
      }
    }

    if (j.contains("language") && !j["language"].is_null())
      d.language = j["language"].get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(where(e.what()));
  }
  return d;
}

}  // namespace

Corpus load_metadata(const std::string& path, const RangePolicy& policy) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metadata file: " + path);

  Corpus corpus;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    Document d = parse_record(j, lineno);

    if (j.contains("flags") && j["flags"].is_object()) {
      for (auto& [key, val] : j["flags"].items()) {
        (void)val;
        bool known = std::find(kAuthorFlagNames.begin(), kAuthorFlagNames.end(),
                               key) != kAuthorFlagNames.end();
        if (!known)
          corpus.add_warning("line " + std::to_string(lineno) +
                             ": ignored unknown flag '" + key + "'");
      }
    }
    if (!policy.in_range(d.kind, d.year)) {
      d.range_flagged = true;
      corpus.add_warning("line " + std::to_string(lineno) + ": " +
                         kind_name(d.kind) + " '" + d.id + "' year " +
                         std::to_string(d.year) +
                         " outside configured range; retained flagged");
    }
    corpus.add(std::move(d));
  }
  return corpus;
}

void write_metadata(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  for (const auto& d : corpus.docs()) {
    json j;
    j["id"] = d.id;
    j["year"] = d.year;
    j["field"] = d.field;
    j["subfield"] = d.subfield ? json(*d.subfield) : json(nullptr);
    j["kind"] = kind_name(d.kind);
    j["word_count"] = d.word_count;
    json flags = json::object();
    for (const auto& name : kAuthorFlagNames)
      if (get_flag(d.flags, name)) flags[name] = true;
    j["flags"] = flags;
    j["language"] = d.language ? json(*d.language) : json(nullptr);
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

void FieldSetConfig::validate() const {
  for (const auto& f : omega)
    if (lambda.count(f))
      throw ConfigError("field sets overlap on '" + f + "'");
}

CorpusView make_view(const Corpus& corpus, const std::set<std::string>& fields,
                     YearRange years, const std::set<DocKind>& kinds,
                     bool include_flagged) {
  if (years.lo > years.hi)
    throw ConfigError("inverted year range [" + std::to_string(years.lo) + ", " +
                      std::to_string(years.hi) + "]");
  for (const auto& f : fields)
    if (!corpus.has_field(f))
      throw ConfigError("unknown field label: '" + f + "'");

  CorpusView view;
  view.corpus = &corpus;
  for (int i = 0; i < static_cast<int>(corpus.size()); ++i) {
    const Document& d = corpus.at(i);
    if (!fields.count(d.field)) continue;
    if (!years.contains(d.year)) continue;
    if (!kinds.count(d.kind)) continue;
    if (d.range_flagged && !include_flagged) continue;
    view.indices.push_back(i);
  }
  std::sort(view.indices.begin(), view.indices.end(), [&](int a, int b) {
    const Document& da = corpus.at(a);
    const Document& db = corpus.at(b);
    if (da.year != db.year) return da.year < db.year;
    return da.id < db.id;
  });
  return view;
}

}  // namespace spill
