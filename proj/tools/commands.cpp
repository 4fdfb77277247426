#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>

#include "json.hpp"
#include "spill/clustering.hpp"
#include "spill/corpus.hpp"
#include "spill/csv.hpp"
#include "spill/econometrics.hpp"
#include "spill/embeddings.hpp"
#include "spill/errors.hpp"
#include "spill/kernel.hpp"
#include "spill/measures.hpp"
#include "spill/synthetic.hpp"
#include "spill/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spill::cli {

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("missing required path for " + what);
  if (!fs::exists(path)) throw ConfigError(what + " file not found: " + path);
}

void ensure_out_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("--out directory is required");
  fs::create_directories(out);
}

// Every run echoes its resolved configuration for reproducibility.
void write_run_config(const std::string& out_dir, const json& config) {
  std::ofstream f(fs::path(out_dir) / "run_config.json");
  if (!f) throw ConfigError("cannot write run_config.json under " + out_dir);
  f << config.dump(2) << '\n';
}

std::set<std::string> parse_field_list(const std::string& csv) {
  std::set<std::string> out;
  size_t pos = 0;
  while (pos <= csv.size()) {
    size_t comma = csv.find(',', pos);
    std::string tok = csv.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    size_t a = tok.find_first_not_of(" \t");
    if (a != std::string::npos) {
      size_t b = tok.find_last_not_of(" \t");
      out.insert(tok.substr(a, b - a + 1));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

YearRange parse_years(const std::string& spec) {
  size_t dash = spec.find('-');
  if (dash == std::string::npos)
    throw ConfigError("bad year range '" + spec + "' (want lo-hi)");
  try {
    return {std::stoi(spec.substr(0, dash)), std::stoi(spec.substr(dash + 1))};
  } catch (const std::exception&) {
    throw ConfigError("bad year range '" + spec + "'");
  }
}

// --- joined analysis table ---------------------------------------------------

struct Table {
  std::vector<std::string> id;
  std::vector<int> year;
  std::vector<std::string> field;
  std::map<std::string, std::vector<std::optional<double>>> cols;

  size_t rows() const { return id.size(); }
  const std::vector<std::optional<double>>& col(const std::string& name) const {
    auto it = cols.find(name);
    if (it == cols.end()) throw ConfigError("no column '" + name + "' in measures");
    return it->second;
  }
  bool has_col(const std::string& name) const { return cols.count(name) > 0; }
};

Table records_to_table(const std::vector<MeasureRecord>& records) {
  Table t;
  std::set<std::string> set_names;
  for (const auto& r : records)
    for (const auto& [name, v] : r.received) set_names.insert(name);
  std::set<std::string> concept_names;
  for (const auto& r : records)
    for (const auto& [name, v] : r.concepts) concept_names.insert(name);

  auto lnify = [](const std::optional<double>& raw) -> std::optional<double> {
    if (!raw || !(*raw > 0.0)) return std::nullopt;
    return std::log(*raw);
  };

  for (const auto& r : records) {
    t.id.push_back(r.id);
    t.year.push_back(r.year);
    t.field.push_back(r.field);
    t.cols["innovation_raw"].push_back(r.innovation);
    t.cols["innovation_ln"].push_back(lnify(r.innovation));
    for (const auto& s : set_names) {
      auto it = r.received.find(s);
      std::optional<double> raw =
          it == r.received.end() ? std::nullopt : it->second.raw;
      t.cols["recv_" + s + "_raw"].push_back(raw);
      t.cols["recv_" + s + "_ln"].push_back(lnify(raw));
    }
    for (const auto& c : concept_names) {
      auto it = r.concepts.find(c);
      t.cols["concept_" + c].push_back(
          it == r.concepts.end() ? std::nullopt : std::optional<double>(it->second));
    }
  }
  return t;
}

Table load_measures_table(const std::string& path) {
  CsvTable csv = read_csv(path);
  Table t;
  int id_c = csv.col_required("id");
  int year_c = csv.col_required("year");
  int field_c = csv.col_required("field");
  std::vector<std::pair<int, std::string>> numeric;
  for (size_t c = 0; c < csv.header.size(); ++c) {
    const std::string& h = csv.header[c];
    if (h == "id" || h == "year" || h == "field" || h == "excluded_flags") continue;
    numeric.emplace_back(static_cast<int>(c), h);
  }
  for (const auto& row : csv.rows) {
    t.id.push_back(row[id_c]);
    t.year.push_back(std::stoi(row[year_c]));
    t.field.push_back(row[field_c]);
    for (const auto& [c, name] : numeric) {
      const std::string& cell = row[c];
      if (cell.empty())
        t.cols[name].push_back(std::nullopt);
      else
        t.cols[name].push_back(std::stod(cell));
    }
  }
  return t;
}

// --- regression plumbing -----------------------------------------------------

struct BuiltDesign {
  Design design;
  std::vector<int> kept;  // row indices of the table that survived deletion
  int dropped = 0;
};

// Assembles a Design from named table columns after listwise deletion.
// Extra regressors (word count controls, flag dummies) come from the corpus.
class DesignBuilder {
 public:
  DesignBuilder(const Table& table, const Corpus* corpus)
      : table_(table), corpus_(corpus) {}

  void set_sample(std::vector<int> rows) { scope_ = std::move(rows); }
  void set_response(const std::string& col) { response_ = col; }
  void add_column(const std::string& col) { columns_.push_back(col); }
  void add_wordcount_controls() { wordcount_ = true; }
  void add_flag_dummies() { flag_dummies_ = true; }
  void interact_with_bins(const std::string& col, const std::vector<PeriodBin>& bins) {
    interact_col_ = col;
    bins_ = bins;
  }
  void interact_with_industry(const std::string& col) { industry_col_ = col; }
  void add_zscore_interaction(const std::string& s_col, const std::string& m_col) {
    zs_pairs_.emplace_back(s_col, m_col);
  }
  void set_fe(std::vector<std::string> fe) { fe_ = std::move(fe); }  // subject|year|subject_year
  void set_cluster(const std::string& c) { cluster_ = c; }           // year|subject

  BuiltDesign build() const;

 private:
  const Table& table_;
  const Corpus* corpus_;
  std::vector<int> scope_;
  std::string response_;
  std::vector<std::string> columns_;
  bool wordcount_ = false;
  bool flag_dummies_ = false;
  std::string interact_col_;
  std::vector<PeriodBin> bins_;
  std::string industry_col_;
  std::vector<std::pair<std::string, std::string>> zs_pairs_;
  std::vector<std::string> fe_;
  std::string cluster_;

  int doc_index(int row) const {
    if (!corpus_) return -1;
    return corpus_->index_of(table_.id[row]);
  }
};

BuiltDesign DesignBuilder::build() const {
  std::vector<int> scope = scope_;
  if (scope.empty())
    for (size_t i = 0; i < table_.rows(); ++i) scope.push_back(static_cast<int>(i));

  std::vector<std::string> needed = columns_;
  needed.push_back(response_);
  if (!interact_col_.empty()) needed.push_back(interact_col_);
  for (const auto& [s, m] : zs_pairs_) {
    needed.push_back(s);
    needed.push_back(m);
  }
  if (!industry_col_.empty()) needed.push_back(industry_col_);

  BuiltDesign out;
  for (int row : scope) {
    bool ok = true;
    for (const auto& col : needed)
      if (!table_.col(col)[row]) {
        ok = false;
        break;
      }
    if (ok && (wordcount_ || flag_dummies_)) {
      if (doc_index(row) < 0) ok = false;
    }
    if (ok && !industry_col_.empty()) {
      int di = doc_index(row);
      if (di < 0 || !corpus_->at(di).subfield) ok = false;
    }
    if (ok)
      out.kept.push_back(row);
    else
      ++out.dropped;
  }
  const int n = static_cast<int>(out.kept.size());
  if (n == 0) throw DataError("no observations left after listwise deletion");

  Design& d = out.design;
  d.y.resize(n);
  for (int i = 0; i < n; ++i) d.y(i) = *table_.col(response_)[out.kept[i]];

  std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
  auto pull = [&](const std::string& col) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = *table_.col(col)[out.kept[i]];
    return v;
  };

  if (!interact_col_.empty()) {
    Eigen::VectorXd x = pull(interact_col_);
    std::vector<int> years(n);
    for (int i = 0; i < n; ++i) years[i] = table_.year[out.kept[i]];
    if (bins_.empty()) {
      cols.emplace_back(interact_col_, std::move(x));
    } else {
      for (auto& [name, col] : make_period_interactions(x, interact_col_, years, bins_))
        cols.emplace_back(name, std::move(col));
    }
  }

  if (!industry_col_.empty()) {
    Eigen::VectorXd x = pull(industry_col_);
    std::map<std::string, std::vector<int>> industries;
    for (int i = 0; i < n; ++i)
      industries[*corpus_->at(doc_index(out.kept[i])).subfield].push_back(i);
    for (const auto& [industry, rows] : industries) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
      for (int i : rows) col(i) = x(i);
      cols.emplace_back(industry_col_ + "@" + industry, std::move(col));
    }
  }

  for (const auto& [s_name, m_name] : zs_pairs_) {
    Eigen::VectorXd s = pull(s_name);
    Eigen::VectorXd m = zscore(pull(m_name));
    cols.emplace_back(s_name, s);
    cols.emplace_back("z_" + m_name, m);
    cols.emplace_back(s_name + ":z_" + m_name,
                      (s.array() * m.array()).matrix());
  }

  for (const auto& c : columns_) cols.emplace_back(c, pull(c));

  if (flag_dummies_) {
    for (const auto& flag : kAuthorFlagNames) {
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i)
        v(i) = get_flag(corpus_->at(doc_index(out.kept[i])).flags, flag) ? 1.0 : 0.0;
      cols.emplace_back(flag, std::move(v));
    }
  }
  if (wordcount_) {
    Eigen::VectorXd wc(n);
    for (int i = 0; i < n; ++i)
      wc(i) = corpus_->at(doc_index(out.kept[i])).word_count;
    cols.emplace_back("word_count", wc);
    cols.emplace_back("word_count_sq", (wc.array() * wc.array()).matrix());
  }

  d.x.resize(n, static_cast<int>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c) {
    d.names.push_back(cols[c].first);
    d.x.col(static_cast<int>(c)) = cols[c].second;
  }

  std::vector<std::string> subject(n);
  std::vector<std::string> year_str(n);
  for (int i = 0; i < n; ++i) {
    subject[i] = table_.field[out.kept[i]];
    year_str[i] = std::to_string(table_.year[out.kept[i]]);
  }
  for (const auto& fe : fe_) {
    if (fe == "subject") {
      d.fe_factors.push_back(encode_factor(subject));
    } else if (fe == "year") {
      d.fe_factors.push_back(encode_factor(year_str));
    } else if (fe == "subject_year") {
      d.fe_factors.push_back(
          cross_factors(encode_factor(subject), encode_factor(year_str)));
    } else {
      throw ConfigError("unknown fixed effect '" + fe + "'");
    }
    d.fe_names.push_back(fe);
  }

  if (cluster_ == "year")
    d.cluster = encode_factor(year_str);
  else if (cluster_ == "subject")
    d.cluster = encode_factor(subject);
  else if (!cluster_.empty())
    throw ConfigError("unknown cluster factor '" + cluster_ + "'");

  out.design.add_intercept = fe_.empty();
  out.dropped = static_cast<int>(scope.size()) - n;
  return out;
}

void write_regression_outputs(const RegressionResult& reg, const std::string& out_dir,
                              const std::string& stem) {
  CsvWriter csv((fs::path(out_dir) / (stem + ".csv")).string());
  csv.row({"term", "estimate", "se", "t", "p", "n", "g", "r2"});
  for (size_t i = 0; i < reg.names.size(); ++i) {
    const std::string& name = reg.names[i];
    csv.row({name, fmt_double(reg.beta(static_cast<int>(i))),
             fmt_double(reg.se(static_cast<int>(i))), fmt_double(reg.tstat(name)),
             fmt_double(reg.pvalue(name)), std::to_string(reg.n_obs),
             std::to_string(reg.n_clusters), fmt_double(reg.r2)});
  }
  csv.close();

  json j;
  j["n"] = reg.n_obs;
  j["clusters"] = reg.n_clusters;
  j["params"] = reg.n_params;
  j["r2"] = reg.r2;
  j["dropped_rows"] = reg.dropped_rows;
  j["warnings"] = reg.warnings;
  json terms = json::array();
  for (size_t i = 0; i < reg.names.size(); ++i) {
    terms.push_back({{"term", reg.names[i]},
                     {"estimate", reg.beta(static_cast<int>(i))},
                     {"se", reg.se(static_cast<int>(i))},
                     {"t", reg.tstat(reg.names[i])},
                     {"p", reg.pvalue(reg.names[i])}});
  }
  j["terms"] = terms;
  std::ofstream jf(fs::path(out_dir) / (stem + ".json"));
  jf << j.dump(2) << '\n';
}

// --- synth ---------------------------------------------------------------------

struct SynthOpts {
  std::string out;
  int omega = 2, lambda = 2, placebo = 0;
  std::string years = "1600-1800";
  int docs_per_year = 4;
  int dim = 16;
  double coupling_pre = 0.0, coupling_post = 0.0;
  int break_year = 1700;
  double noise = 0.15, pull_scale = 1.0, mix_prob = 0.5;
  double drift = 0.03;
  bool with_patents = false;
  std::uint64_t seed = 1;
};

SynthConfig make_synth_config(const SynthOpts& o) {
  SynthConfig cfg;
  for (int i = 0; i < o.omega; ++i)
    cfg.fields.push_back({"omega_field_" + std::to_string(i),
                          SynthField::Domain::omega, DocKind::title});
  for (int i = 0; i < o.lambda; ++i)
    cfg.fields.push_back({"lambda_field_" + std::to_string(i),
                          SynthField::Domain::lambda, DocKind::title});
  if (o.with_patents)
    cfg.fields.push_back({"patents", SynthField::Domain::lambda, DocKind::patent});
  for (int i = 0; i < o.placebo; ++i)
    cfg.fields.push_back({"placebo_field_" + std::to_string(i),
                          SynthField::Domain::placebo, DocKind::title});
  YearRange yr = parse_years(o.years);
  cfg.year_lo = yr.lo;
  cfg.year_hi = yr.hi;
  cfg.docs_per_field_year = o.docs_per_year;
  cfg.dim = o.dim;
  cfg.coupling_pre = o.coupling_pre;
  cfg.coupling_post = o.coupling_post;
  cfg.break_year = o.break_year;
  cfg.noise = o.noise;
  cfg.pull_scale = o.pull_scale;
  cfg.mix_prob = o.mix_prob;
  cfg.drift_rate = o.drift;
  cfg.seed = o.seed;
  return cfg;
}

int cmd_synth(const SynthOpts& o) {
  ensure_out_dir(o.out);
  SynthConfig cfg = make_synth_config(o);
  SynthResult result = generate(cfg);

  write_metadata(result.corpus, (fs::path(o.out) / "metadata.jsonl").string());
  write_embeddings(result.embeddings, (fs::path(o.out) / "embeddings.emb1").string(),
                   (fs::path(o.out) / "embeddings.ids").string());
  write_ground_truth(result.truth, (fs::path(o.out) / "ground_truth.csv").string());

  json echo{{"command", "synth"},
            {"seed", o.seed},
            {"omega_fields", o.omega},
            {"lambda_fields", o.lambda},
            {"placebo_fields", o.placebo},
            {"with_patents", o.with_patents},
            {"years", o.years},
            {"docs_per_year", o.docs_per_year},
            {"dim", o.dim},
            {"coupling_pre", o.coupling_pre},
            {"coupling_post", o.coupling_post},
            {"break_year", o.break_year},
            {"noise", o.noise},
            {"pull_scale", o.pull_scale},
            {"mix_prob", o.mix_prob},
            {"drift", o.drift}};
  write_run_config(o.out, echo);
  return 0;
}

// --- measure ---------------------------------------------------------------------

struct MeasureOpts {
  std::string meta, emb, ids, out;
  int k = 20, rho = 20, tau = 20;
  std::string years;  // empty: clip to [min+tau, max-tau]
  std::string omega, lambda, receiving, created_targets;
  bool sources_include_patents = false;
  std::string concepts, concept_emb, concept_ids;
  int threads = 1;
};

std::vector<ConceptTermList> load_concepts(const std::string& concepts_json,
                                           const std::string& emb_path,
                                           const std::string& ids_path) {
  require_file(concepts_json, "concepts");
  require_file(emb_path, "concept embeddings");
  require_file(ids_path, "concept ids");
  EmbeddingSet terms = load_embeddings(emb_path, ids_path);

  std::ifstream in(concepts_json);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("bad concepts json: ") + e.what());
  }
  std::vector<ConceptTermList> out;
  for (const auto& c : j.at("concepts")) {
    ConceptTermList term_list;
    term_list.name = c.at("name").get<std::string>();
    std::vector<std::string> ids;
    std::vector<float> data;
    for (const auto& term : c.at("terms")) {
      std::string t = term.get<std::string>();
      int row = terms.row_of(t);
      if (row < 0) throw DataError("concept term '" + t + "' has no embedding");
      term_list.terms.push_back(t);
      ids.push_back(t);
      auto r = terms.row(row);
      data.insert(data.end(), r.begin(), r.end());
    }
    if (term_list.terms.empty())
      throw ConfigError("concept '" + term_list.name + "' has no terms");
    term_list.term_vectors = EmbeddingSet(terms.dim(), std::move(ids), std::move(data));
    out.push_back(std::move(term_list));
  }
  return out;
}

MeasureEngine::Config measure_config_from(const MeasureOpts& o, const Corpus& corpus) {
  MeasureEngine::Config cfg;
  cfg.params = {o.k, o.rho, o.tau};
  if (!o.omega.empty()) cfg.field_sets.omega = parse_field_list(o.omega);
  if (!o.lambda.empty()) cfg.field_sets.lambda = parse_field_list(o.lambda);
  cfg.field_sets.spillover_source_excludes_patents = !o.sources_include_patents;
  if (!o.receiving.empty()) cfg.receiver_fields = parse_field_list(o.receiving);
  if (!o.years.empty()) cfg.receiver_years = parse_years(o.years);
  if (!o.created_targets.empty())
    cfg.created_targets = parse_field_list(o.created_targets);
  if (!o.concepts.empty())
    cfg.concepts = load_concepts(o.concepts, o.concept_emb, o.concept_ids);
  cfg.n_threads = o.threads;
  (void)corpus;
  return cfg;
}

int cmd_measure(const MeasureOpts& o) {
  require_file(o.meta, "metadata");
  require_file(o.emb, "embeddings");
  require_file(o.ids, "embedding ids");
  ensure_out_dir(o.out);

  Corpus corpus = load_metadata(o.meta);
  EmbeddingSet emb = load_embeddings(o.emb, o.ids);
  MeasureEngine::Config cfg = measure_config_from(o, corpus);
  MeasureEngine engine(corpus, emb, cfg);
  std::vector<MeasureRecord> records = engine.run();

  std::vector<std::string> set_names;
  for (const auto& s : engine.config().source_sets) set_names.push_back(s.name);
  std::vector<std::string> created(engine.config().created_targets.begin(),
                                   engine.config().created_targets.end());
  std::vector<std::string> concept_names;
  for (const auto& c : engine.config().concepts) concept_names.push_back(c.name);

  write_measure_csv(records, set_names, created, concept_names,
                    (fs::path(o.out) / "measures.csv").string());

  json echo{{"command", "measure"},
            {"k", o.k},
            {"rho", o.rho},
            {"tau", o.tau},
            {"years",
             std::to_string(engine.config().receiver_years.lo) + "-" +
                 std::to_string(engine.config().receiver_years.hi)},
            {"omega", json(std::vector<std::string>(
                          engine.config().field_sets.omega.begin(),
                          engine.config().field_sets.omega.end()))},
            {"lambda", json(std::vector<std::string>(
                           engine.config().field_sets.lambda.begin(),
                           engine.config().field_sets.lambda.end()))},
            {"sources_exclude_patents",
             engine.config().field_sets.spillover_source_excludes_patents},
            {"threads", o.threads}};
  write_run_config(o.out, echo);

  if (!corpus.warnings().empty()) {
    std::ofstream wf(fs::path(o.out) / "load_warnings.txt");
    for (const auto& w : corpus.warnings()) wf << w << '\n';
  }
  return 0;
}

// --- regress ---------------------------------------------------------------------

struct RegressOpts {
  std::string measures, meta, out;
  std::string design = "spillover";  // spillover|mechanism|complementarities|by_industry
  std::string receiving = "lambda";  // receivers: lambda or omega
  std::string bins;                  // e.g. "1660-1679,1680-1699"
  std::string cluster = "year";
  std::string concept_name;  // for complementarities
  std::string years;
  // placebo sweep
  bool placebo_sweep = false;
  std::string emb, ids, target_bin;
  std::string placebo_fields;
  int k = 20, rho = 20, tau = 20;
  int threads = 1;
};

std::string recv_col_for(const RegressOpts& o) {
  // Receivers in lambda read spillovers from omega and vice versa.
  return o.receiving == "lambda" ? "recv_omega_ln" : "recv_lambda_ln";
}

std::vector<int> scope_rows(const Table& t, const std::set<std::string>& fields,
                            const std::optional<YearRange>& years) {
  std::vector<int> rows;
  for (size_t i = 0; i < t.rows(); ++i) {
    if (!fields.empty() && !fields.count(t.field[i])) continue;
    if (years && !(years->contains(t.year[i]))) continue;
    rows.push_back(static_cast<int>(i));
  }
  return rows;
}

RegressionResult run_spillover_design(const Table& table, const Corpus& corpus,
                                      const std::set<std::string>& receiving_fields,
                                      const std::string& recv_col,
                                      const std::vector<PeriodBin>& bins,
                                      const std::string& cluster) {
  DesignBuilder b(table, &corpus);
  std::optional<YearRange> span;
  if (!bins.empty()) {
    int lo = bins[0].lo, hi = bins[0].hi;
    for (const auto& bin : bins) {
      lo = std::min(lo, bin.lo);
      hi = std::max(hi, bin.hi);
    }
    span = YearRange{lo, hi};
  }
  b.set_sample(scope_rows(table, receiving_fields, span));
  b.set_response("innovation_ln");
  b.interact_with_bins(recv_col, bins);
  b.add_wordcount_controls();
  b.set_fe({"subject", "year"});
  b.set_cluster(cluster);
  BuiltDesign built = b.build();
  RegressionResult reg = ols_fe(built.design, SeKind::cr1);
  reg.dropped_rows = built.dropped;
  return reg;
}

int cmd_regress(const RegressOpts& o) {
  require_file(o.meta, "metadata");
  ensure_out_dir(o.out);
  Corpus corpus = load_metadata(o.meta);

  FieldSetConfig fsc;  // defaults; refined below for synthetic labels
  std::set<std::string> omega, lambda;
  {
    // Field sets are taken from the corpus when the defaults are absent:
    // any field named omega_*/lambda_* groups accordingly.
    for (const auto& f : corpus.fields()) {
      if (f.rfind("omega_", 0) == 0) omega.insert(f);
      if (f.rfind("lambda_", 0) == 0 || f == "patents") lambda.insert(f);
    }
    if (omega.empty()) omega = fsc.omega;
    if (lambda.empty()) lambda = fsc.lambda;
  }
  std::set<std::string> receiving_fields = o.receiving == "lambda" ? lambda : omega;

  std::vector<PeriodBin> bins;
  if (!o.bins.empty()) bins = parse_bins(o.bins);

  json echo{{"command", "regress"}, {"design", o.design},
            {"receiving", o.receiving}, {"bins", o.bins},
            {"cluster", o.cluster},    {"placebo_sweep", o.placebo_sweep}};

  if (o.placebo_sweep) {
    require_file(o.emb, "embeddings");
    require_file(o.ids, "embedding ids");
    if (bins.empty()) throw ConfigError("--placebo-sweep needs --bins");
    if (o.target_bin.empty()) throw ConfigError("--placebo-sweep needs --target-bin");
    PeriodBin target = parse_bins(o.target_bin).at(0);
    std::string target_suffix =
        "_" + std::to_string(target.lo) + "_" + std::to_string(target.hi);

    EmbeddingSet emb = load_embeddings(o.emb, o.ids);

    auto engine_run = [&](const NamedFieldSet& source) {
      MeasureEngine::Config cfg;
      cfg.params = {o.k, o.rho, o.tau};
      cfg.field_sets.omega = omega;
      cfg.field_sets.lambda = lambda;
      cfg.receiver_fields = receiving_fields;
      if (!o.years.empty()) cfg.receiver_years = parse_years(o.years);
      cfg.source_sets = {source};
      cfg.n_threads = 1;
      MeasureEngine engine(corpus, emb, cfg);
      return records_to_table(engine.run());
    };

    // Original: spillovers from the opposite knowledge set.
    NamedFieldSet original_set{o.receiving == "lambda" ? "omega" : "lambda",
                               o.receiving == "lambda" ? omega : lambda};
    Table original_table = engine_run(original_set);
    RegressionResult original =
        run_spillover_design(original_table, corpus, receiving_fields,
                             "recv_" + original_set.name + "_ln", bins, o.cluster);
    double tau_hat = original.coef("recv_" + original_set.name + "_ln" + target_suffix);

    std::vector<std::string> placebo;
    if (!o.placebo_fields.empty()) {
      auto set = parse_field_list(o.placebo_fields);
      placebo.assign(set.begin(), set.end());
    } else {
      for (const auto& f : corpus.fields())
        if (!omega.count(f) && !lambda.count(f)) placebo.push_back(f);
      std::sort(placebo.begin(), placebo.end());
    }
    if (placebo.empty()) throw ConfigError("no placebo fields available");

    struct PlaceboRow {
      std::string field;
      double estimate = 0.0, se = 0.0;
      bool failed = false;
    };
    std::vector<PlaceboRow> rows(placebo.size());
    parallel_for(static_cast<int>(placebo.size()), o.threads, [&](int i) {
      rows[i].field = placebo[i];
      try {
        Table t = engine_run({placebo[i], {placebo[i]}});
        std::string col = "recv_" + placebo[i] + "_ln";
        RegressionResult reg = run_spillover_design(t, corpus, receiving_fields,
                                                    col, bins, o.cluster);
        rows[i].estimate = reg.coef(col + target_suffix);
        rows[i].se = reg.stderr_of(col + target_suffix);
      } catch (const std::exception&) {
        rows[i].failed = true;
      }
    });

    std::vector<double> placebo_coefs;
    CsvWriter csv((fs::path(o.out) / "placebo.csv").string());
    csv.row({"field", "role", "estimate", "se"});
    csv.row({original_set.name, "original", fmt_double(tau_hat),
             fmt_double(original.stderr_of("recv_" + original_set.name + "_ln" +
                                           target_suffix))});
    for (const auto& r : rows) {
      if (r.failed) {
        csv.row({r.field, "placebo_failed", "", ""});
        continue;
      }
      placebo_coefs.push_back(r.estimate);
      csv.row({r.field, "placebo", fmt_double(r.estimate), fmt_double(r.se)});
    }
    csv.close();

    double p = fisher_exact_p(tau_hat, placebo_coefs);
    int extreme = 0;
    for (double c : placebo_coefs)
      if (std::abs(c) >= std::abs(tau_hat)) ++extreme;
    json j{{"original", tau_hat},
           {"target_bin", o.target_bin},
           {"placebos", static_cast<int>(placebo_coefs.size())},
           {"as_extreme", extreme},
           {"fisher_p", p}};
    std::ofstream jf(fs::path(o.out) / "fisher.json");
    jf << j.dump(2) << '\n';
    write_run_config(o.out, echo);
    return 0;
  }

  require_file(o.measures, "measures");
  Table table = load_measures_table(o.measures);
  std::optional<YearRange> years;
  if (!o.years.empty()) years = parse_years(o.years);

  RegressionResult reg;
  if (o.design == "spillover") {
    reg = run_spillover_design(table, corpus, receiving_fields, recv_col_for(o),
                               bins, o.cluster);
  } else if (o.design == "mechanism") {
    DesignBuilder b(table, &corpus);
    b.set_sample(scope_rows(table, receiving_fields, years));
    b.set_response(recv_col_for(o));
    b.add_flag_dummies();
    b.add_wordcount_controls();
    b.set_fe({"subject", "year"});
    b.set_cluster(o.cluster);
    BuiltDesign built = b.build();
    reg = ols_fe(built.design, SeKind::cr1);
    reg.dropped_rows = built.dropped;
  } else if (o.design == "complementarities") {
    if (o.concept_name.empty()) throw ConfigError("--concept is required for this design");
    DesignBuilder b(table, &corpus);
    b.set_sample(scope_rows(table, receiving_fields, years));
    b.set_response("innovation_ln");
    b.add_zscore_interaction(recv_col_for(o), "concept_" + o.concept_name);
    b.add_wordcount_controls();
    b.set_fe({"subject", "year"});
    b.set_cluster(o.cluster);
    BuiltDesign built = b.build();
    reg = ols_fe(built.design, SeKind::cr1);
    reg.dropped_rows = built.dropped;
  } else if (o.design == "by_industry") {
    std::vector<int> scope;
    for (size_t i = 0; i < table.rows(); ++i) {
      int di = corpus.index_of(table.id[i]);
      if (di < 0 || corpus.at(di).kind != DocKind::patent) continue;
      if (years && !years->contains(table.year[i])) continue;
      scope.push_back(static_cast<int>(i));
    }
    DesignBuilder b(table, &corpus);
    b.set_sample(scope);
    b.set_response("innovation_ln");
    b.interact_with_industry(recv_col_for(o));
    b.add_wordcount_controls();
    b.set_fe({"subject", "year"});
    b.set_cluster(o.cluster);
    BuiltDesign built = b.build();
    reg = ols_fe(built.design, SeKind::cr1);
    reg.dropped_rows = built.dropped;
  } else {
    throw ConfigError("unknown design '" + o.design + "'");
  }

  write_regression_outputs(reg, o.out, "results");
  write_run_config(o.out, echo);
  return 0;
}

// --- cluster ---------------------------------------------------------------------

struct ClusterOpts {
  std::string meta, emb, ids, out;
  std::string subject;  // empty: every field present
  ClusterParams params;
  std::string texts;  // optional CSV id,text
  bool grid = false;
  std::string grid_pca = "25,50";
  std::string grid_gamma = "0.01,0.015,0.02";
  std::string grid_reassign = "0.15";
  std::string grid_absorb = "0.4";
  bool assign = false;
  std::string model_json, model_basis;
  std::string certainty_csv;
  double min_certainty = 0.7;
};

Eigen::MatrixXd embedding_matrix(const EmbeddingSet& emb, const std::vector<int>& rows) {
  Eigen::MatrixXd x(rows.size(), emb.dim());
  for (size_t i = 0; i < rows.size(); ++i) {
    auto r = emb.row(rows[i]);
    for (int j = 0; j < emb.dim(); ++j) x(static_cast<int>(i), j) = r[j];
  }
  return x;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  for (const auto& tok : parse_field_list(csv)) out.push_back(std::stod(tok));
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_cluster(const ClusterOpts& o) {
  require_file(o.meta, "metadata");
  ensure_out_dir(o.out);
  Corpus corpus = load_metadata(o.meta);

  json echo{{"command", "cluster"},
            {"subject", o.subject},
            {"pca_components", o.params.pca_components},
            {"gamma", o.params.gamma},
            {"min_floor", o.params.min_floor},
            {"noise_reassign_threshold", o.params.noise_reassign_threshold},
            {"absorb_cosine_threshold", o.params.absorb_cosine_threshold},
            {"grid", o.grid},
            {"assign", o.assign}};

  if (o.assign) {
    require_file(o.emb, "embeddings");
    require_file(o.ids, "embedding ids");
    require_file(o.model_json, "cluster model json");
    require_file(o.model_basis, "cluster model basis");
    EmbeddingSet emb = load_embeddings(o.emb, o.ids);
    ClusterModel model = load_cluster_model(o.model_json, o.model_basis);

    std::map<std::string, double> certainty;
    if (!o.certainty_csv.empty()) {
      CsvTable ct = read_csv(o.certainty_csv);
      int idc = ct.col_required("id");
      int cc = ct.col_required("certainty");
      for (const auto& row : ct.rows) certainty[row[idc]] = std::stod(row[cc]);
    }

    std::vector<int> rows;
    std::vector<std::string> entry_ids;
    int filtered = 0;
    for (const auto& d : corpus.docs()) {
      if (d.kind != DocKind::lexicon_entry) continue;
      if (!certainty.empty()) {
        auto it = certainty.find(d.id);
        if (it != certainty.end() && it->second < o.min_certainty) {
          ++filtered;
          continue;
        }
      }
      int row = emb.row_of(d.id);
      if (row < 0) throw IntegrityError("lexicon entry '" + d.id + "' has no embedding");
      rows.push_back(row);
      entry_ids.push_back(d.id);
    }
    if (rows.empty()) throw DataError("no lexicon entries to assign");

    std::vector<std::string> ids_copy = entry_ids;
    std::vector<float> data;
    for (int r : rows) {
      auto span = emb.row(r);
      data.insert(data.end(), span.begin(), span.end());
    }
    EmbeddingSet entries(emb.dim(), std::move(ids_copy), std::move(data));
    std::vector<int> assigned = assign_external(entries, model);

    CsvWriter csv((fs::path(o.out) / "assignments.csv").string());
    csv.row({"id", "subject", "cluster_id"});
    for (size_t i = 0; i < entry_ids.size(); ++i)
      csv.row({entry_ids[i], model.subject, std::to_string(assigned[i])});
    csv.close();
    echo["entries_filtered_by_certainty"] = filtered;
    write_run_config(o.out, echo);
    return 0;
  }

  require_file(o.emb, "embeddings");
  require_file(o.ids, "embedding ids");
  EmbeddingSet emb = load_embeddings(o.emb, o.ids);

  std::map<std::string, std::string> texts;
  if (!o.texts.empty()) {
    CsvTable ct = read_csv(o.texts);
    int idc = ct.col_required("id");
    int tc = ct.col_required("text");
    for (const auto& row : ct.rows) texts[row[idc]] = row[tc];
  }

  std::vector<std::string> subjects;
  if (!o.subject.empty()) {
    subjects.push_back(o.subject);
  } else {
    for (const auto& f : corpus.fields()) subjects.push_back(f);
  }

  auto fit_subject = [&](const std::string& subject, const ClusterParams& params,
                         const std::string& suffix) {
    YearRange all{-(1 << 30), 1 << 30};
    CorpusView view =
        make_view(corpus, {subject}, all, {DocKind::title, DocKind::patent});
    if (view.size() < 2)
      throw DataError("subject '" + subject + "' has fewer than 2 documents");
    std::vector<int> rows;
    std::vector<std::string> doc_ids;
    std::vector<std::string> doc_texts;
    for (size_t i = 0; i < view.size(); ++i) {
      const Document& d = view.doc(i);
      int row = emb.row_of(d.id);
      if (row < 0) throw IntegrityError("document '" + d.id + "' has no embedding");
      rows.push_back(row);
      doc_ids.push_back(d.id);
      if (!texts.empty()) {
        auto it = texts.find(d.id);
        doc_texts.push_back(it == texts.end() ? "" : it->second);
      }
    }
    ClusterModel model = fit_cluster_model(subject, doc_ids,
                                           embedding_matrix(emb, rows), params,
                                           doc_texts);
    std::string stem = "model_" + subject + suffix;
    for (auto& c : stem)
      if (c == ' ') c = '_';
    save_cluster_model(model, (fs::path(o.out) / (stem + ".json")).string(),
                       (fs::path(o.out) / (stem + ".emb1")).string());

    std::string label_stem = "labels_" + subject + suffix;
    for (auto& c : label_stem)
      if (c == ' ') c = '_';
    CsvWriter csv((fs::path(o.out) / (label_stem + ".csv")).string());
    csv.row({"id", "subject", "cluster_id", "stage"});
    for (size_t i = 0; i < model.doc_ids.size(); ++i)
      csv.row({model.doc_ids[i], subject, std::to_string(model.labels[i]),
               stage_name(model.stages[i])});
    csv.close();
    return model;
  };

  if (o.grid) {
    CsvWriter summary((fs::path(o.out) / "grid_summary.csv").string());
    summary.row({"subject", "pca", "gamma", "reassign", "absorb", "n_clusters",
                 "n_noise"});
    for (const auto& subject : subjects) {
      for (double pca : parse_double_list(o.grid_pca))
        for (double gamma : parse_double_list(o.grid_gamma))
          for (double reassign : parse_double_list(o.grid_reassign))
            for (double absorb : parse_double_list(o.grid_absorb)) {
              ClusterParams p = o.params;
              p.pca_components = static_cast<int>(pca);
              p.gamma = gamma;
              p.noise_reassign_threshold = reassign;
              p.absorb_cosine_threshold = absorb;
              std::string suffix = "_p" + std::to_string(p.pca_components) + "_g" +
                                   fmt_double(gamma) + "_r" + fmt_double(reassign) +
                                   "_a" + fmt_double(absorb);
              ClusterModel m = fit_subject(subject, p, suffix);
              int noise = 0;
              for (int l : m.labels)
                if (l < 0) ++noise;
              summary.row({subject, std::to_string(p.pca_components),
                           fmt_double(gamma), fmt_double(reassign),
                           fmt_double(absorb), std::to_string(m.n_clusters),
                           std::to_string(noise)});
            }
    }
    summary.close();
  } else {
    for (const auto& subject : subjects) fit_subject(subject, o.params, "");
  }
  write_run_config(o.out, echo);
  return 0;
}

// --- did -------------------------------------------------------------------------

struct DidOpts {
  std::string out;
  std::string panel;  // direct panel CSV: unit,year,outcome,treatment
  // assembly inputs
  std::string measures, labels, lexicon_labels, treatment_csv, meta;
  std::string bins = "1685-1689,1690-1694,1695-1699,1700-1704,1705-1709,1710-1714";
  int ref_bin = -1;  // default: last bin before treat_start
  int treat_start = 1705;
  bool binary = false;
  bool trends = false;
  int max_lexicon_entries = 5;
  std::string drop_field;
};

int cmd_did(const DidOpts& o) {
  ensure_out_dir(o.out);
  PanelSpec panel;
  panel.bins = parse_bins(o.bins);
  panel.treat_start_year = o.treat_start;
  panel.binary_treatment = o.binary;
  panel.unit_trends = o.trends;

  json echo{{"command", "did"},
            {"bins", o.bins},
            {"treat_start", o.treat_start},
            {"binary", o.binary},
            {"trends", o.trends},
            {"max_lexicon_entries", o.max_lexicon_entries},
            {"drop_field", o.drop_field}};

  if (!o.panel.empty()) {
    require_file(o.panel, "panel");
    CsvTable csv = read_csv(o.panel);
    int uc = csv.col_required("unit");
    int yc = csv.col_required("year");
    int oc = csv.col_required("outcome");
    int tc = csv.col_required("treatment");
    std::vector<std::string> units;
    std::vector<double> outcome, treatment;
    for (const auto& row : csv.rows) {
      units.push_back(row[uc]);
      panel.year.push_back(std::stoi(row[yc]));
      outcome.push_back(std::stod(row[oc]));
      treatment.push_back(std::stod(row[tc]));
    }
    panel.unit = encode_factor(units);
    panel.outcome = Eigen::Map<Eigen::VectorXd>(outcome.data(), outcome.size());
    panel.treatment = Eigen::Map<Eigen::VectorXd>(treatment.data(), treatment.size());
  } else {
    require_file(o.measures, "measures");
    require_file(o.labels, "labels");
    require_file(o.treatment_csv, "treatment");

    Table table = load_measures_table(o.measures);

    // doc id -> sub-topic unit "subject#cluster"
    std::map<std::string, std::string> unit_of;
    {
      CsvTable lt = read_csv(o.labels);
      int idc = lt.col_required("id");
      int sc = lt.col_required("subject");
      int cc = lt.col_required("cluster_id");
      for (const auto& row : lt.rows) {
        if (row[cc] == "-1") continue;  // noise documents carry no unit
        unit_of[row[idc]] = row[sc] + "#" + row[cc];
      }
    }

    // Units covered by the lexicon beyond the threshold are excluded so the
    // control group stays clean.
    std::set<std::string> excluded_units;
    if (!o.lexicon_labels.empty()) {
      require_file(o.lexicon_labels, "lexicon labels");
      CsvTable lx = read_csv(o.lexicon_labels);
      int sc = lx.col_required("subject");
      int cc = lx.col_required("cluster_id");
      std::map<std::string, int> counts;
      for (const auto& row : lx.rows) counts[row[sc] + "#" + row[cc]]++;
      for (const auto& [unit, count] : counts)
        if (count > o.max_lexicon_entries) excluded_units.insert(unit);
    }

    std::map<std::string, double> treat_of;
    {
      CsvTable tt = read_csv(o.treatment_csv);
      int uc = tt.col_required("unit");
      int ic = tt.col_required("treatment");
      for (const auto& row : tt.rows) treat_of[row[uc]] = std::stod(row[ic]);
    }

    std::optional<Corpus> corpus;
    if (!o.drop_field.empty()) {
      require_file(o.meta, "metadata");
      corpus = load_metadata(o.meta);
    }

    // Mean raw innovation per (unit, year), then ln.
    std::map<std::pair<std::string, int>, std::pair<double, int>> cells;
    const auto& innovation = table.col("innovation_raw");
    for (size_t i = 0; i < table.rows(); ++i) {
      if (!innovation[i]) continue;
      auto it = unit_of.find(table.id[i]);
      if (it == unit_of.end()) continue;
      const std::string& unit = it->second;
      if (excluded_units.count(unit)) continue;
      if (!o.drop_field.empty() && table.field[i] == o.drop_field) continue;
      auto& cell = cells[{unit, table.year[i]}];
      cell.first += *innovation[i];
      cell.second += 1;
    }

    std::vector<std::string> units;
    std::vector<double> outcome, treatment;
    int skipped_nonpositive = 0;
    for (const auto& [key, cell] : cells) {
      double mean = cell.first / cell.second;
      if (!(mean > 0.0)) {
        ++skipped_nonpositive;
        continue;
      }
      auto tr = treat_of.find(key.first);
      if (tr == treat_of.end()) continue;
      units.push_back(key.first);
      panel.year.push_back(key.second);
      outcome.push_back(std::log(mean));
      treatment.push_back(tr->second);
    }
    if (units.empty()) throw DataError("empty panel after assembly");
    panel.unit = encode_factor(units);
    panel.outcome = Eigen::Map<Eigen::VectorXd>(outcome.data(), outcome.size());
    panel.treatment = Eigen::Map<Eigen::VectorXd>(treatment.data(), treatment.size());
    echo["cells_dropped_nonpositive_mean"] = skipped_nonpositive;
    echo["units_excluded_by_lexicon"] = static_cast<int>(excluded_units.size());
  }

  if (o.ref_bin >= 0) {
    panel.ref_bin = o.ref_bin;
  } else {
    panel.ref_bin = 0;
    for (size_t b = 0; b < panel.bins.size(); ++b)
      if (panel.bins[b].hi < o.treat_start) panel.ref_bin = static_cast<int>(b);
  }

  DidResult result = did_estimate(panel);

  CsvWriter csv((fs::path(o.out) / "event_study.csv").string());
  csv.row({"bin_lo", "bin_hi", "pre", "estimate", "se", "t", "p"});
  for (const auto& eff : result.effects) {
    csv.row({std::to_string(eff.bin.lo), std::to_string(eff.bin.hi),
             eff.is_pre ? "1" : "0", fmt_double(eff.estimate), fmt_double(eff.se),
             fmt_double(result.reg.tstat(eff.name)),
             fmt_double(result.reg.pvalue(eff.name))});
  }
  csv.close();

  json j{{"n", result.reg.n_obs},
         {"clusters", result.reg.n_clusters},
         {"r2", result.reg.r2},
         {"wald_pre", {{"f", result.wald_pre_f},
                       {"df", result.wald_pre_df},
                       {"p", result.wald_pre_p}}}};
  std::ofstream jf(fs::path(o.out) / "did.json");
  jf << j.dump(2) << '\n';

  write_run_config(o.out, echo);
  return 0;
}

// --- validate ----------------------------------------------------------------------

struct ValidateOpts {
  std::string out;
  std::string emb, ids, emb_b, ids_b, meta;
  int knn_k = 5;
  // binscatter mode
  std::string table, y_col, x_col;
  int n_bins = 20;
  // citation validation mode
  std::string citations, measures;
};

int cmd_validate(const ValidateOpts& o) {
  ensure_out_dir(o.out);
  json echo{{"command", "validate"}};

  if (!o.table.empty()) {
    require_file(o.table, "table");
    if (o.y_col.empty() || o.x_col.empty())
      throw ConfigError("binscatter needs --y and --x column names");
    CsvTable csv = read_csv(o.table);
    int yc = csv.col_required(o.y_col);
    int xc = csv.col_required(o.x_col);
    int tc = csv.col_required("year");
    std::vector<double> ys, xs;
    std::vector<std::string> years;
    for (const auto& row : csv.rows) {
      if (row[yc].empty() || row[xc].empty()) continue;
      ys.push_back(std::stod(row[yc]));
      xs.push_back(std::stod(row[xc]));
      years.push_back(row[tc]);
    }
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), ys.size());
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size());
    BinscatterResult bs =
        binscatter_residualized(y, x, {encode_factor(years)}, o.n_bins);

    CsvWriter out((fs::path(o.out) / "binscatter.csv").string());
    out.row({"bin", "x_mean", "y_mean", "count"});
    for (size_t b = 0; b < bs.bins.size(); ++b)
      out.row({std::to_string(b), fmt_double(bs.bins[b].x_mean),
               fmt_double(bs.bins[b].y_mean), std::to_string(bs.bins[b].count)});
    out.close();
    json j{{"slope", bs.slope}, {"intercept", bs.intercept},
           {"n", static_cast<int>(ys.size())}};
    std::ofstream jf(fs::path(o.out) / "binscatter.json");
    jf << j.dump(2) << '\n';
    echo["mode"] = "binscatter";
    write_run_config(o.out, echo);
    return 0;
  }

  if (!o.citations.empty()) {
    require_file(o.citations, "citations");
    require_file(o.measures, "measures");
    require_file(o.meta, "metadata");
    Corpus corpus = load_metadata(o.meta);
    Table table = load_measures_table(o.measures);
    CsvTable ct = read_csv(o.citations);
    int idc = ct.col_required("id");
    int cc = ct.col_required("citations");
    std::map<std::string, double> cites;
    for (const auto& row : ct.rows) cites[row[idc]] = std::stod(row[cc]);

    table.cols["citations"].assign(table.rows(), std::nullopt);
    for (size_t i = 0; i < table.rows(); ++i) {
      auto it = cites.find(table.id[i]);
      if (it != cites.end()) table.cols["citations"][i] = it->second;
    }

    DesignBuilder b(table, &corpus);
    b.set_response("citations");
    b.add_column("innovation_ln");
    b.add_wordcount_controls();
    b.set_fe({"year"});
    BuiltDesign built = b.build();
    RegressionResult reg = ols_fe(built.design, SeKind::hc1);
    reg.dropped_rows = built.dropped;
    write_regression_outputs(reg, o.out, "validation");
    echo["mode"] = "citations";
    write_run_config(o.out, echo);
    return 0;
  }

  require_file(o.emb, "embeddings");
  require_file(o.ids, "embedding ids");
  EmbeddingSet emb = load_embeddings(o.emb, o.ids);

  std::vector<std::string> warnings;
  CsvWriter csv((fs::path(o.out) / "diagnostics.csv").string());
  csv.row({"metric", "value"});
  csv.row({"mean_nn_cosine", fmt_double(mean_nn_cosine(emb))});
  csv.row({"pc1_variance", fmt_double(pc1_variance_fraction(emb, &warnings))});
  if (!o.emb_b.empty()) {
    require_file(o.emb_b, "second embeddings");
    require_file(o.ids_b, "second embedding ids");
    EmbeddingSet emb_b = load_embeddings(o.emb_b, o.ids_b);
    csv.row({"rank_overlap_k5", fmt_double(rank_overlap(emb, emb_b, 5))});
    csv.row({"rank_overlap_k10", fmt_double(rank_overlap(emb, emb_b, 10))});
  }
  if (!o.meta.empty()) {
    require_file(o.meta, "metadata");
    Corpus corpus = load_metadata(o.meta);
    std::vector<std::string> labels;
    for (int i = 0; i < emb.count(); ++i) {
      int di = corpus.index_of(emb.id(i));
      if (di < 0) throw IntegrityError("embedding id '" + emb.id(i) + "' not in metadata");
      labels.push_back(corpus.at(di).field);
    }
    csv.row({"knn_accuracy_k" + std::to_string(o.knn_k),
             fmt_double(knn_label_accuracy(emb, labels, o.knn_k))});
  }
  csv.close();
  if (!warnings.empty()) {
    std::ofstream wf(fs::path(o.out) / "warnings.txt");
    for (const auto& w : warnings) wf << w << '\n';
  }
  echo["mode"] = "diagnostics";
  write_run_config(o.out, echo);
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Text-embedding innovation and knowledge-spillover toolkit"};
  app.require_subcommand(1);

  SynthOpts synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "RNG seed");
  s->add_option("--omega", synth.omega, "Number of omega fields");
  s->add_option("--lambda", synth.lambda, "Number of lambda fields");
  s->add_option("--placebo", synth.placebo, "Number of placebo fields");
  s->add_option("--years", synth.years, "Year range lo-hi");
  s->add_option("--docs-per-year", synth.docs_per_year, "Documents per field-year");
  s->add_option("--dim", synth.dim, "Embedding dimension");
  s->add_option("--coupling-pre", synth.coupling_pre, "Coupling before break year");
  s->add_option("--coupling-post", synth.coupling_post, "Coupling from break year");
  s->add_option("--break-year", synth.break_year, "Coupling sign-flip year");
  s->add_option("--noise", synth.noise, "Noise norm scale");
  s->add_option("--pull-scale", synth.pull_scale, "Forward pull scale");
  s->add_option("--mix-prob", synth.mix_prob, "Share of mixed lambda docs");
  s->add_option("--drift", synth.drift, "Yearly drift rate");
  s->add_flag("--with-patents", synth.with_patents, "Add a patent field");

  MeasureOpts measure;
  auto* m = app.add_subcommand("measure", "Compute innovation and spillover indices");
  m->add_option("--meta", measure.meta, "Metadata JSONL")->required();
  m->add_option("--emb", measure.emb, "Embeddings EMB1")->required();
  m->add_option("--ids", measure.ids, "Embedding ids")->required();
  m->add_option("--out", measure.out, "Output directory")->required();
  m->add_option("--k", measure.k, "Top-k pool members");
  m->add_option("--rho", measure.rho, "Counterfactual count");
  m->add_option("--tau", measure.tau, "Window span (years)");
  m->add_option("--years", measure.years, "Receiver year range lo-hi");
  m->add_option("--omega", measure.omega, "Omega fields (comma list)");
  m->add_option("--lambda", measure.lambda, "Lambda fields (comma list)");
  m->add_option("--receiving", measure.receiving, "Receiver fields (comma list)");
  m->add_option("--created-targets", measure.created_targets,
                "Fields for created-spillover columns");
  m->add_flag("--sources-include-patents", measure.sources_include_patents,
              "Keep patents inside spillover source pools");
  m->add_option("--concepts", measure.concepts, "Concept term list JSON");
  m->add_option("--concept-emb", measure.concept_emb, "Concept term EMB1");
  m->add_option("--concept-ids", measure.concept_ids, "Concept term ids");
  m->add_option("--threads", measure.threads, "Worker threads");

  RegressOpts regress;
  auto* r = app.add_subcommand("regress", "Fixed-effects regressions and placebo sweeps");
  r->add_option("--measures", regress.measures, "Measures CSV");
  r->add_option("--meta", regress.meta, "Metadata JSONL")->required();
  r->add_option("--out", regress.out, "Output directory")->required();
  r->add_option("--design", regress.design,
                "spillover|mechanism|complementarities|by_industry");
  r->add_option("--receiving", regress.receiving, "lambda|omega receivers");
  r->add_option("--bins", regress.bins, "Period bins lo-hi,lo-hi,...");
  r->add_option("--cluster", regress.cluster, "Cluster factor: year|subject");
  r->add_option("--concept", regress.concept_name, "Concept name (complementarities)");
  r->add_option("--years", regress.years, "Sample year range lo-hi");
  r->add_flag("--placebo-sweep", regress.placebo_sweep, "Run the placebo sweep");
  r->add_option("--emb", regress.emb, "Embeddings EMB1 (placebo sweep)");
  r->add_option("--ids", regress.ids, "Embedding ids (placebo sweep)");
  r->add_option("--target-bin", regress.target_bin, "Bin whose coefficient is tested");
  r->add_option("--placebo-fields", regress.placebo_fields,
                "Placebo fields (default: all outside omega/lambda)");
  r->add_option("--k", regress.k, "Top-k (placebo sweep)");
  r->add_option("--rho", regress.rho, "Counterfactual count (placebo sweep)");
  r->add_option("--tau", regress.tau, "Window span (placebo sweep)");
  r->add_option("--threads", regress.threads, "Worker threads");

  ClusterOpts cluster;
  auto* c = app.add_subcommand("cluster", "Sub-topic discovery and external assignment");
  c->add_option("--meta", cluster.meta, "Metadata JSONL")->required();
  c->add_option("--emb", cluster.emb, "Embeddings EMB1");
  c->add_option("--ids", cluster.ids, "Embedding ids");
  c->add_option("--out", cluster.out, "Output directory")->required();
  c->add_option("--subject", cluster.subject, "Subject class (default: all)");
  c->add_option("--pca", cluster.params.pca_components, "PCA components");
  c->add_option("--gamma", cluster.params.gamma, "Adaptive size factor");
  c->add_option("--min-floor", cluster.params.min_floor, "Minimum cluster size floor");
  c->add_option("--reassign-threshold", cluster.params.noise_reassign_threshold,
                "Noise reassignment threshold");
  c->add_option("--absorb-threshold", cluster.params.absorb_cosine_threshold,
                "Centroid absorption cosine threshold");
  c->add_option("--texts", cluster.texts, "Texts CSV (id,text) for keywords");
  c->add_flag("--grid", cluster.grid, "Run the hyperparameter grid");
  c->add_option("--grid-pca", cluster.grid_pca, "Grid PCA list");
  c->add_option("--grid-gamma", cluster.grid_gamma, "Grid gamma list");
  c->add_option("--grid-reassign", cluster.grid_reassign, "Grid reassign list");
  c->add_option("--grid-absorb", cluster.grid_absorb, "Grid absorb list");
  c->add_flag("--assign", cluster.assign, "Assign lexicon entries to a model");
  c->add_option("--model-json", cluster.model_json, "Model JSON (assign mode)");
  c->add_option("--model-basis", cluster.model_basis, "Model basis EMB1 (assign mode)");
  c->add_option("--certainty-csv", cluster.certainty_csv,
                "Entry certainty CSV (id,certainty)");
  c->add_option("--min-certainty", cluster.min_certainty,
                "Minimum certainty for assignment");

  DidOpts did;
  auto* d = app.add_subcommand("did", "Difference-in-differences event study");
  d->add_option("--out", did.out, "Output directory")->required();
  d->add_option("--panel", did.panel, "Panel CSV: unit,year,outcome,treatment");
  d->add_option("--measures", did.measures, "Measures CSV (assembly mode)");
  d->add_option("--labels", did.labels, "Sub-topic labels CSV (assembly mode)");
  d->add_option("--lexicon-labels", did.lexicon_labels,
                "Lexicon assignment CSV (assembly mode)");
  d->add_option("--treatment", did.treatment_csv, "Treatment CSV: unit,treatment");
  d->add_option("--meta", did.meta, "Metadata JSONL (for --drop-field)");
  d->add_option("--bins", did.bins, "Event-time bins");
  d->add_option("--ref-bin", did.ref_bin, "Reference bin index");
  d->add_option("--treat-start", did.treat_start, "First treated year");
  d->add_flag("--binary", did.binary, "Binary treatment (ln intensity > 0)");
  d->add_flag("--trends", did.trends, "Unit-specific linear trends");
  d->add_option("--max-lexicon-entries", did.max_lexicon_entries,
                "Exclude sub-topics with more lexicon entries than this");
  d->add_option("--drop-field", did.drop_field, "Exclude one subject class");

  ValidateOpts validate;
  auto* v = app.add_subcommand("validate", "Embedding diagnostics and validation fits");
  v->add_option("--out", validate.out, "Output directory")->required();
  v->add_option("--emb", validate.emb, "Embeddings EMB1");
  v->add_option("--ids", validate.ids, "Embedding ids");
  v->add_option("--emb-b", validate.emb_b, "Second embeddings (rank overlap)");
  v->add_option("--ids-b", validate.ids_b, "Second embedding ids");
  v->add_option("--meta", validate.meta, "Metadata JSONL (labels / joins)");
  v->add_option("--knn-k", validate.knn_k, "k for label accuracy");
  v->add_option("--table", validate.table, "Binscatter input CSV");
  v->add_option("--y", validate.y_col, "Binscatter response column");
  v->add_option("--x", validate.x_col, "Binscatter regressor column");
  v->add_option("--bins", validate.n_bins, "Binscatter bin count");
  v->add_option("--citations", validate.citations, "Citations CSV (id,citations)");
  v->add_option("--measures", validate.measures, "Measures CSV (citations mode)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (s->parsed()) return cmd_synth(synth);
    if (m->parsed()) return cmd_measure(measure);
    if (r->parsed()) return cmd_regress(regress);
    if (c->parsed()) return cmd_cluster(cluster);
    if (d->parsed()) return cmd_did(did);
    if (v->parsed()) return cmd_validate(validate);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace spill::cli
