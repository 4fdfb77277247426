#include "spill/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "spill/csv.hpp"
#include "spill/errors.hpp"
#include "spill/util.hpp"

namespace spill {

FieldSetConfig SynthConfig::field_sets() const {
  FieldSetConfig fsc;
  fsc.omega.clear();
  fsc.lambda.clear();
  for (const auto& f : fields) {
    if (f.domain == SynthField::Domain::omega) fsc.omega.insert(f.label);
    if (f.domain == SynthField::Domain::lambda) fsc.lambda.insert(f.label);
  }
  return fsc;
}

namespace {

std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) out += (c == ' ' ? '_' : c);
  return out;
}

}  // namespace

SynthResult generate(const SynthConfig& config) {
  if (config.dim < 2) throw ConfigError("embedding dim must be >= 2");
  if (config.fields.empty()) throw ConfigError("no fields configured");
  if (config.year_lo > config.year_hi) throw ConfigError("inverted year range");
  if (config.docs_per_field_year < 1)
    throw ConfigError("docs_per_field_year must be positive");
  const int nf = static_cast<int>(config.fields.size());
  if (config.dim < 2 * nf)
    throw ConfigError("dim must be >= 2 * field count (each field needs an anchor and a drift axis)");

  const int dim = config.dim;
  Rng rng(config.seed);

  // Field f lives on the (2f, 2f+1) coordinate plane: anchor axis 2f, drift
  // axis 2f+1. Orthogonal planes keep the fields' idiosyncratic noise from
  // leaking into each other's similarity structure.
  auto field_mean = [&](int f, int year) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
    double t_mid = 0.5 * (config.year_lo + config.year_hi);
    mu(2 * f) = 1.0;
    mu(2 * f + 1) = config.drift_rate * (year - t_mid);
    mu /= mu.norm();
    return mu;
  };

  std::vector<int> omega_fields;
  for (int f = 0; f < nf; ++f)
    if (config.fields[f].domain == SynthField::Domain::omega)
      omega_fields.push_back(f);

  // Mean of the omega fields' trailing 20-year past, cached per year.
  std::map<int, Eigen::VectorXd> omega_past_cache;
  auto omega_past = [&](int year) -> const Eigen::VectorXd& {
    auto it = omega_past_cache.find(year);
    if (it != omega_past_cache.end()) return it->second;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    for (int f : omega_fields)
      for (int s = year - 20; s <= year - 1; ++s)
        acc += field_mean(f, std::max(s, config.year_lo));
    if (acc.norm() > 0.0) acc /= acc.norm();
    return omega_past_cache.emplace(year, std::move(acc)).first->second;
  };

  auto coupling = [&](int year) {
    return year < config.break_year ? config.coupling_pre : config.coupling_post;
  };

  SynthResult out;
  std::vector<std::string> ids;
  std::vector<float> data;
  RangePolicy policy;

  double noise_sd = config.noise / std::sqrt(static_cast<double>(dim));

  for (int f = 0; f < nf; ++f) {
    const SynthField& sf = config.fields[f];
    bool is_lambda = sf.domain == SynthField::Domain::lambda;
    for (int year = config.year_lo; year <= config.year_hi; ++year) {
      for (int i = 0; i < config.docs_per_field_year; ++i) {
        double w = 0.0;
        if (is_lambda && !omega_fields.empty() && rng.uniform() < config.mix_prob)
          w = rng.uniform(config.mix_lo, config.mix_hi);
        double pull = coupling(year) * w;

        Eigen::VectorXd v = (1.0 - w) * field_mean(f, year);
        if (w > 0.0) v += w * omega_past(year);
        if (pull != 0.0) {
          int ahead = std::min(year + 10, config.year_hi);
          int behind = std::max(year - 10, config.year_lo);
          Eigen::VectorXd flow = field_mean(f, ahead) - field_mean(f, behind);
          if (flow.norm() > 0.0) flow /= flow.norm();
          v += pull * config.pull_scale * flow;
        }
        for (int d = 0; d < dim; ++d) v(d) += rng.normal(0.0, noise_sd);
        v /= v.norm();

        Document doc;
        doc.id = slug(sf.label) + "_" + std::to_string(year) + "_" + std::to_string(i);
        doc.year = year;
        doc.field = sf.label;
        doc.kind = sf.kind;
        doc.word_count = rng.uniform_int(3, 40);
        if (sf.kind == DocKind::patent)
          doc.subfield = "industry_" + std::to_string(i % 5);
        for (const auto& flag : kAuthorFlagNames)
          if (rng.uniform() < 0.08) set_flag(doc.flags, flag, true);
        doc.language = "eng";
        doc.range_flagged = !policy.in_range(doc.kind, doc.year);

        out.truth.push_back({doc.id, year, sf.label, w, pull});
        ids.push_back(doc.id);
        for (int d = 0; d < dim; ++d) data.push_back(static_cast<float>(v(d)));
        out.corpus.add(std::move(doc));
      }
    }
  }

  out.embeddings = EmbeddingSet(dim, std::move(ids), std::move(data));
  out.embeddings.normalize();
  return out;
}

void write_ground_truth(const std::vector<GroundTruthRow>& truth,
                        const std::string& path) {
  CsvWriter w(path);
  w.row({"id", "year", "field", "omega_mix", "pull"});
  for (const auto& r : truth)
    w.row({r.id, std::to_string(r.year), r.field, fmt_double(r.omega_mix),
           fmt_double(r.pull)});
  w.close();
}

DidSynthResult generate_did_panel(const DidSynthConfig& config) {
  if (config.n_units < 2) throw ConfigError("need >= 2 units");
  if (config.year_lo > config.year_hi) throw ConfigError("inverted year range");
  Rng rng(config.seed);

  DidSynthResult out;
  out.treated.resize(config.n_units);
  std::vector<double> intensity(config.n_units);
  std::vector<double> unit_fe(config.n_units);
  for (int u = 0; u < config.n_units; ++u) {
    out.treated[u] = rng.uniform() < config.treated_share;
    // Raw spillover index scale: treated units sit above 1 (ln > 0).
    intensity[u] = out.treated[u] ? rng.uniform(1.05, 3.0) : rng.uniform(0.3, 0.95);
    unit_fe[u] = rng.normal(0.0, config.unit_sd);
  }
  std::map<int, double> year_fe;
  for (int t = config.year_lo; t <= config.year_hi; ++t)
    year_fe[t] = rng.normal(0.0, config.year_sd);

  PanelSpec panel;
  for (int u = 0; u < config.n_units; ++u) {
    for (int t = config.year_lo; t <= config.year_hi; ++t) {
      double y = unit_fe[u] + year_fe[t] + rng.normal(0.0, config.noise);
      if (out.treated[u] && t >= config.treat_start) y += config.delta;
      panel.unit.push_back(u);
      panel.year.push_back(t);
      panel.outcome.conservativeResize(panel.outcome.size() + 1);
      panel.outcome(panel.outcome.size() - 1) = y;
      panel.treatment.conservativeResize(panel.treatment.size() + 1);
      panel.treatment(panel.treatment.size() - 1) = std::log(intensity[u]);
    }
  }

  if (config.bins.empty()) {
    for (int lo = config.year_lo; lo <= config.year_hi; lo += 5)
      panel.bins.push_back({lo, std::min(lo + 4, config.year_hi)});
  } else {
    panel.bins = config.bins;
  }
  // Reference bin: the last fully pre-treatment bin.
  panel.ref_bin = 0;
  for (size_t b = 0; b < panel.bins.size(); ++b)
    if (panel.bins[b].hi < config.treat_start) panel.ref_bin = static_cast<int>(b);
  panel.treat_start_year = config.treat_start;
  panel.binary_treatment = true;

  out.panel = std::move(panel);
  return out;
}

// --- Oracles -------------------------------------------------------------------

namespace {

double oracle_cosine(std::span<const float> u, std::span<const float> v) {
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    uv += static_cast<double>(u[i]) * v[i];
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  double c = uv / (std::sqrt(uu) * std::sqrt(vv));
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return c;
}

}  // namespace

double oracle_topk(std::span<const float> query, const Pool& pool, int k) {
  if (pool.empty()) throw UndefinedMeasureError("empty pool");
  std::vector<std::pair<double, std::string_view>> sims;
  sims.reserve(pool.size());
  for (const auto& e : pool.entries)
    sims.emplace_back(oracle_cosine(query, pool.emb->row(e.row)), e.id);
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  int kk = std::min<int>(k, static_cast<int>(sims.size()));
  double acc = 0.0;
  for (int i = 0; i < kk; ++i) acc += sims[i].first;
  return acc / kk;
}

OracleOlsResult oracle_ols(const Design& design) {
  const int n = design.n();
  const int p = static_cast<int>(design.x.cols());

  int cols = p;
  std::vector<int> levels;
  for (const auto& f : design.fe_factors) {
    int l = *std::max_element(f.begin(), f.end()) + 1;
    levels.push_back(l);
    cols += l - 1;
  }
  bool intercept = !design.fe_factors.empty() || design.add_intercept;
  if (intercept) cols += 1;

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, cols);
  x.leftCols(p) = design.x;
  int at = p;
  if (intercept) {
    x.col(at) = Eigen::VectorXd::Ones(n);
    ++at;
  }
  for (size_t fi = 0; fi < design.fe_factors.size(); ++fi) {
    for (int lvl = 1; lvl < levels[fi]; ++lvl) {
      for (int i = 0; i < n; ++i)
        if (design.fe_factors[fi][i] == lvl) x(i, at) = 1.0;
      ++at;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  Eigen::VectorXd beta = qr.solve(design.y);
  OracleOlsResult out;
  out.beta = beta.head(p);
  out.residuals = design.y - x * beta;
  return out;
}

namespace {

// Full-scan pool for the oracle: documents of the given fields whose year
// lies in [lo, hi], with the kind filter applied, sorted (year, id).
struct OracleDoc {
  const Document* doc;
  std::span<const float> vec;
};

std::vector<OracleDoc> oracle_pool(const Corpus& corpus, const EmbeddingSet& emb,
                                   const std::set<std::string>& fields, int lo,
                                   int hi, bool titles_only) {
  std::vector<OracleDoc> pool;
  for (const auto& d : corpus.docs()) {
    if (!fields.count(d.field)) continue;
    if (d.year < lo || d.year > hi) continue;
    if (d.kind == DocKind::lexicon_entry) continue;
    if (titles_only && d.kind != DocKind::title) continue;
    if (d.range_flagged) continue;
    int row = emb.row_of(d.id);
    if (row < 0) throw IntegrityError("missing embedding for " + d.id);
    pool.push_back({&d, emb.row(row)});
  }
  std::sort(pool.begin(), pool.end(), [](const OracleDoc& a, const OracleDoc& b) {
    if (a.doc->year != b.doc->year) return a.doc->year < b.doc->year;
    return a.doc->id < b.doc->id;
  });
  return pool;
}

double oracle_topk_docs(std::span<const float> query,
                        const std::vector<OracleDoc>& pool, int k) {
  std::vector<std::pair<double, std::string>> sims;
  sims.reserve(pool.size());
  for (const auto& e : pool)
    sims.emplace_back(oracle_cosine(query, e.vec), e.doc->id);
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  int kk = std::min<int>(k, static_cast<int>(sims.size()));
  double acc = 0.0;
  for (int i = 0; i < kk; ++i) acc += sims[i].first;
  return acc / kk;
}

}  // namespace

std::vector<OracleMeasureRecord> oracle_measures(const Corpus& corpus,
                                                 const EmbeddingSet& emb,
                                                 const MeasureEngine::Config& config) {
  MeasureEngine engine(corpus, emb, config);  // only for resolved defaults
  const MeasureEngine::Config& cfg = engine.config();
  const MeasureParams& mp = cfg.params;
  bool src_titles_only = cfg.field_sets.spillover_source_excludes_patents;

  // Receivers: same filters as the engine, resorted here independently.
  std::vector<const Document*> receivers;
  for (const auto& d : corpus.docs()) {
    if (!cfg.receiver_fields.count(d.field)) continue;
    if (d.year < cfg.receiver_years.lo || d.year > cfg.receiver_years.hi) continue;
    if (d.kind == DocKind::lexicon_entry) continue;
    if (d.range_flagged) continue;
    receivers.push_back(&d);
  }
  std::sort(receivers.begin(), receivers.end(),
            [](const Document* a, const Document* b) {
              if (a->year != b->year) return a->year < b->year;
              return a->id < b->id;
            });

  std::vector<OracleMeasureRecord> out;
  for (const Document* doc : receivers) {
    OracleMeasureRecord rec;
    rec.id = doc->id;
    std::span<const float> v = emb.row(emb.row_of(doc->id));

    auto own_fwd = oracle_pool(corpus, emb, {doc->field}, doc->year + 1,
                               doc->year + mp.tau, false);
    auto own_bwd = oracle_pool(corpus, emb, {doc->field}, doc->year - mp.tau,
                               doc->year - 1, false);
    if (!own_fwd.empty() && !own_bwd.empty()) {
      double num = oracle_topk_docs(v, own_fwd, mp.k);
      double den = oracle_topk_docs(v, own_bwd, mp.k);
      double ratio = num / den;
      if (std::isfinite(ratio)) rec.innovation = ratio;
    }

    for (const auto& set : cfg.source_sets) {
      std::vector<double> defined;
      int considered = 0;
      for (const auto& src : set.fields) {
        if (src == doc->field) continue;
        ++considered;
        auto src_bwd = oracle_pool(corpus, emb, {src}, doc->year - mp.tau,
                                   doc->year - 1, src_titles_only);
        if (src_bwd.empty()) continue;

        std::vector<std::pair<double, std::string>> cands;
        for (const auto& c : own_bwd) {
          if (c.doc->id == doc->id) continue;
          cands.emplace_back(oracle_cosine(v, c.vec), c.doc->id);
        }
        if (cands.empty()) continue;
        std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
          if (a.first != b.first) return a.first > b.first;
          return a.second < b.second;
        });
        int use = std::min<int>(mp.rho, static_cast<int>(cands.size()));
        double num = oracle_topk_docs(v, src_bwd, mp.k);
        double den = 0.0;
        for (int i = 0; i < use; ++i) {
          std::span<const float> cv = emb.row(emb.row_of(cands[i].second));
          den += oracle_topk_docs(cv, src_bwd, mp.k);
        }
        den /= use;
        double ratio = num / den;
        if (std::isfinite(ratio)) defined.push_back(ratio);
      }
      (void)considered;
      if (defined.empty()) {
        rec.received[set.name] = std::nullopt;
        rec.received_sources[set.name] = 0;
      } else {
        double sum = 0.0;
        for (double d : defined) sum += d;
        rec.received[set.name] = sum / defined.size();
        rec.received_sources[set.name] = static_cast<int>(defined.size());
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace spill
