#include "spill/measures.hpp"

#include <algorithm>
#include <cmath>

#include "spill/csv.hpp"
#include "spill/errors.hpp"
#include "spill/util.hpp"

namespace spill {

double index_ratio(std::span<const float> query, const Pool& forward,
                   const Pool& backward, int k) {
  double num = topk_mean_similarity(query, forward, k);
  double den = topk_mean_similarity(query, backward, k);
  return num / den;
}

namespace {

std::span<const float> doc_vector(const Document& doc, const EmbeddingSet& emb) {
  int row = emb.row_of(doc.id);
  if (row < 0)
    throw IntegrityError("document id '" + doc.id + "' has no embedding row");
  return emb.row(row);
}

}  // namespace

double innovation_index(const Document& doc, const CorpusView& own_field_view,
                        const EmbeddingSet& emb, const MeasureParams& params) {
  WindowSpec fwd{doc.year, params.tau, WindowSpec::Direction::forward};
  WindowSpec bwd{doc.year, params.tau, WindowSpec::Direction::backward};
  Pool f = build_pool(own_field_view, fwd, emb);
  Pool b = build_pool(own_field_view, bwd, emb);
  return index_ratio(doc_vector(doc, emb), f, b, params.k);
}

double created_spillover(const Document& doc, const CorpusView& target_field_view,
                         const EmbeddingSet& emb, const MeasureParams& params) {
  WindowSpec fwd{doc.year, params.tau, WindowSpec::Direction::forward};
  WindowSpec bwd{doc.year, params.tau, WindowSpec::Direction::backward};
  Pool f = build_pool(target_field_view, fwd, emb);
  Pool b = build_pool(target_field_view, bwd, emb);
  return index_ratio(doc_vector(doc, emb), f, b, params.k);
}

ReceivedValue received_spillover(const Document& doc,
                                 const CorpusView& source_field_view,
                                 const CorpusView& own_field_view,
                                 const EmbeddingSet& emb,
                                 const MeasureParams& params) {
  std::span<const float> v = doc_vector(doc, emb);
  WindowSpec bwd{doc.year, params.tau, WindowSpec::Direction::backward};
  Pool source_past = build_pool(source_field_view, bwd, emb);
  if (source_past.empty())
    throw UndefinedMeasureError("empty source backward pool for " + doc.id);
  Pool own_past = build_pool(own_field_view, bwd, emb);

  // Candidate counterfactuals: own-field past titles ranked by closeness to
  // the document. The document itself is excluded by id even if a stale
  // timestamp placed it inside its own backward window.
  struct Cand {
    double sim;
    int pos;
  };
  std::vector<Cand> cands;
  cands.reserve(own_past.size());
  for (int p = 0; p < static_cast<int>(own_past.size()); ++p) {
    if (own_past.entries[p].id == doc.id) continue;
    cands.push_back({cosine(v, emb.row(own_past.entries[p].row)), p});
  }
  if (cands.empty())
    throw UndefinedMeasureError("no own-field counterfactuals for " + doc.id);

  int use = std::min<int>(params.rho, static_cast<int>(cands.size()));
  std::partial_sort(cands.begin(), cands.begin() + use, cands.end(),
                    [&](const Cand& a, const Cand& b) {
                      if (a.sim != b.sim) return a.sim > b.sim;
                      return own_past.entries[a.pos].id < own_past.entries[b.pos].id;
                    });

  double numerator = topk_mean_similarity(v, source_past, params.k);
  double denom = 0.0;
  for (int i = 0; i < use; ++i) {
    std::span<const float> c = emb.row(own_past.entries[cands[i].pos].row);
    denom += topk_mean_similarity(c, source_past, params.k);
  }
  denom /= use;

  ReceivedValue out;
  out.raw = numerator / denom;
  out.rho_clamped = use < params.rho;
  out.counterfactuals_used = use;
  return out;
}

AggregateValue aggregate_received(const std::vector<std::optional<double>>& per_field) {
  AggregateValue out;
  double sum = 0.0;
  for (const auto& v : per_field) {
    if (!v) continue;
    sum += *v;
    ++out.sources_used;
  }
  if (out.sources_used == 0) return out;
  out.raw = sum / out.sources_used;
  return out;
}

double concept_similarity(std::span<const float> doc_vec, const ConceptTermList& term_list) {
  if (term_list.term_vectors.count() == 0)
    throw ConfigError("concept '" + term_list.name + "' has no term vectors");
  double acc = 0.0;
  for (int i = 0; i < term_list.term_vectors.count(); ++i)
    acc += cosine(doc_vec, term_list.term_vectors.row(i));
  return acc / term_list.term_vectors.count();
}

LogPolicyResult log_policy(const std::vector<std::optional<double>>& raw) {
  LogPolicyResult out;
  out.ln.resize(raw.size());
  out.excluded.assign(raw.size(), false);
  for (size_t i = 0; i < raw.size(); ++i) {
    if (!raw[i]) continue;
    if (std::isfinite(*raw[i]) && *raw[i] > 0.0) {
      out.ln[i] = std::log(*raw[i]);
    } else {
      out.excluded[i] = true;
      ++out.n_excluded;
    }
  }
  return out;
}

// --- MeasureEngine ---------------------------------------------------------

MeasureEngine::MeasureEngine(const Corpus& corpus, const EmbeddingSet& emb,
                             Config config)
    : corpus_(corpus), emb_(emb), config_(std::move(config)) {
  config_.field_sets.validate();
  if (config_.receiver_fields.empty()) {
    config_.receiver_fields = config_.field_sets.omega;
    config_.receiver_fields.insert(config_.field_sets.lambda.begin(),
                                   config_.field_sets.lambda.end());
  }
  if (config_.source_sets.empty()) {
    config_.source_sets = {{"omega", config_.field_sets.omega},
                           {"lambda", config_.field_sets.lambda}};
  }
  if (config_.receiver_years.lo == 0 && config_.receiver_years.hi == 0) {
    // Indices need a full window on both sides, so the default sample is
    // mechanically [min+tau, max-tau].
    int lo = 1 << 30, hi = -(1 << 30);
    for (const auto& d : corpus_.docs()) {
      lo = std::min(lo, d.year);
      hi = std::max(hi, d.year);
    }
    config_.receiver_years = {lo + config_.params.tau, hi - config_.params.tau};
  }
}

const CorpusView& MeasureEngine::own_view(const std::string& field) {
  auto it = own_views_.find(field);
  if (it != own_views_.end()) return it->second;
  YearRange all{-(1 << 30), 1 << 30};
  auto view = make_view(corpus_, {field}, all, {DocKind::title, DocKind::patent});
  return own_views_.emplace(field, std::move(view)).first->second;
}

const CorpusView& MeasureEngine::source_view(const std::string& field) {
  auto it = source_views_.find(field);
  if (it != source_views_.end()) return it->second;
  YearRange all{-(1 << 30), 1 << 30};
  std::set<DocKind> kinds = {DocKind::title, DocKind::patent};
  if (config_.field_sets.spillover_source_excludes_patents)
    kinds = {DocKind::title};
  auto view = make_view(corpus_, {field}, all, kinds);
  return source_views_.emplace(field, std::move(view)).first->second;
}

std::vector<MeasureRecord> MeasureEngine::run() {
  CorpusView receivers =
      make_view(corpus_, config_.receiver_fields, config_.receiver_years,
                {DocKind::title, DocKind::patent});

  // Materialize every view before the parallel section; afterwards they are
  // only read.
  for (const auto& f : config_.receiver_fields) own_view(f);
  for (const auto& s : config_.source_sets)
    for (const auto& f : s.fields) source_view(f);
  for (const auto& f : config_.created_targets) own_view(f);

  int n = static_cast<int>(receivers.size());
  std::vector<MeasureRecord> records(n);

  parallel_for(n, config_.n_threads, [&](int i) {
    const Document& doc = receivers.doc(i);
    MeasureRecord& rec = records[i];
    rec.id = doc.id;
    rec.year = doc.year;
    rec.field = doc.field;

    try {
      double raw = innovation_index(doc, own_views_.at(doc.field), emb_,
                                    config_.params);
      if (std::isfinite(raw))
        rec.innovation = raw;
      else
        rec.flags.push_back("innovation:zero_denominator");
    } catch (const UndefinedMeasureError&) {
      rec.flags.push_back("innovation:empty_pool");
    }

    for (const auto& set : config_.source_sets) {
      std::vector<std::optional<double>> per_field;
      bool clamped = false;
      for (const auto& src : set.fields) {
        if (src == doc.field) continue;  // spillovers need A != B
        try {
          ReceivedValue rv = received_spillover(doc, source_views_.at(src),
                                                own_views_.at(doc.field), emb_,
                                                config_.params);
          if (std::isfinite(rv.raw))
            per_field.push_back(rv.raw);
          else {
            per_field.push_back(std::nullopt);
            rec.flags.push_back("recv_" + set.name + "[" + src + "]:zero_denominator");
          }
          clamped = clamped || rv.rho_clamped;
        } catch (const UndefinedMeasureError&) {
          per_field.push_back(std::nullopt);
          rec.flags.push_back("recv_" + set.name + "[" + src + "]:empty_pool");
        }
      }
      AggregateValue agg = aggregate_received(per_field);
      if (clamped) rec.flags.push_back("recv_" + set.name + ":rho_clamped");
      if (!agg.raw && !per_field.empty())
        rec.flags.push_back("recv_" + set.name + ":all_sources_undefined");
      rec.received[set.name] = {agg.raw, agg.sources_used};
    }

    for (const auto& target : config_.created_targets) {
      if (target == doc.field) continue;
      try {
        double raw = created_spillover(doc, own_views_.at(target), emb_,
                                       config_.params);
        if (std::isfinite(raw))
          rec.created[target] = raw;
        else {
          rec.created[target] = std::nullopt;
          rec.flags.push_back("created[" + target + "]:zero_denominator");
        }
      } catch (const UndefinedMeasureError&) {
        rec.created[target] = std::nullopt;
        rec.flags.push_back("created[" + target + "]:empty_pool");
      }
    }

    if (!config_.concepts.empty()) {
      std::span<const float> v = doc_vector(doc, emb_);
      for (const auto& term_list : config_.concepts)
        rec.concepts[term_list.name] = concept_similarity(v, term_list);
    }
  });

  return records;  // receivers view is already (year, id) ordered
}

// --- CSV emission ----------------------------------------------------------

namespace {

std::string opt_cell(const std::optional<double>& v) {
  return v ? fmt_double(*v) : "";
}

// ln cell under the log policy; appends a flag when the raw value is
// nonpositive.
std::string ln_cell(const std::optional<double>& raw, const std::string& what,
                    std::vector<std::string>& flags) {
  if (!raw) return "";
  if (*raw > 0.0) return fmt_double(std::log(*raw));
  flags.push_back(what + ":nonpositive");
  return "";
}

}  // namespace

void write_measure_csv(const std::vector<MeasureRecord>& records,
                       const std::vector<std::string>& received_set_names,
                       const std::vector<std::string>& created_targets,
                       const std::vector<std::string>& concept_names,
                       const std::string& path) {
  CsvWriter w(path);
  std::vector<std::string> header = {"id", "year", "field", "innovation_raw",
                                     "innovation_ln"};
  for (const auto& s : received_set_names) {
    header.push_back("recv_" + s + "_raw");
    header.push_back("recv_" + s + "_ln");
  }
  for (const auto& t : created_targets) {
    header.push_back("created_" + t + "_raw");
    header.push_back("created_" + t + "_ln");
  }
  for (const auto& c : concept_names) header.push_back("concept_" + c);
  header.push_back("excluded_flags");
  w.row(header);

  for (const auto& rec : records) {
    std::vector<std::string> flags = rec.flags;
    std::vector<std::string> row = {rec.id, std::to_string(rec.year), rec.field};
    row.push_back(opt_cell(rec.innovation));
    row.push_back(ln_cell(rec.innovation, "innovation_ln", flags));
    for (const auto& s : received_set_names) {
      auto it = rec.received.find(s);
      std::optional<double> raw =
          it == rec.received.end() ? std::nullopt : it->second.raw;
      row.push_back(opt_cell(raw));
      row.push_back(ln_cell(raw, "recv_" + s + "_ln", flags));
    }
    for (const auto& t : created_targets) {
      auto it = rec.created.find(t);
      std::optional<double> raw = it == rec.created.end() ? std::nullopt : it->second;
      row.push_back(opt_cell(raw));
      row.push_back(ln_cell(raw, "created_" + t + "_ln", flags));
    }
    for (const auto& c : concept_names) {
      auto it = rec.concepts.find(c);
      row.push_back(it == rec.concepts.end() ? "" : fmt_double(it->second));
    }
    std::string joined;
    for (size_t i = 0; i < flags.size(); ++i) {
      if (i) joined += ';';
      joined += flags[i];
    }
    row.push_back(joined);
    w.row(row);
  }
  w.close();
}

}  // namespace spill
