#include "uidpipe/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "uidpipe/cc_extract.hpp"
#include "uidpipe/corpus.hpp"
#include "uidpipe/design.hpp"
#include "uidpipe/error.hpp"
#include "uidpipe/glmm/glmm.hpp"
#include "uidpipe/io/csv.hpp"
#include "uidpipe/ml/cv.hpp"
#include "uidpipe/ml/lasso.hpp"
#include "uidpipe/ml/metrics.hpp"
#include "uidpipe/ml/pca.hpp"
#include "uidpipe/ml/selection.hpp"
#include "uidpipe/predictors.hpp"
#include "uidpipe/report/binned_density.hpp"

namespace uidpipe::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

const std::map<Stage, std::string>& stage_names() {
  static const std::map<Stage, std::string> names{
      {Stage::Ingest, "ingest"},   {Stage::Extract, "extract"}, {Stage::Features, "features"},
      {Stage::Train, "train"},     {Stage::Select, "select"},   {Stage::Density, "density"},
      {Stage::Fit, "fit"},         {Stage::Compare, "compare"}, {Stage::Report, "report"}};
  return names;
}

// ---------------------------------------------------------------- helpers

struct Context {
  const PipelineConfig& cfg;
  Stage stage;
  StageResult result;
  std::vector<fs::path> inputs;

  fs::path out(const std::string& name) const { return cfg.output_dir / name; }

  // Upstream artifact produced by `producer`; missing -> DependencyError.
  fs::path need(const std::string& name, Stage producer) {
    fs::path p = out(name);
    if (!fs::exists(p))
      throw DependencyError(to_string(stage), fmt::format("{} (run '{}' first)", name, to_string(producer)));
    inputs.push_back(p);
    return p;
  }

  fs::path need_source(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw ConfigError(fmt::format("{} not found: {}", what, p.string()));
    inputs.push_back(p);
    return p;
  }

  void write(const std::string& name, const std::string& contents) {
    const fs::path p = out(name);
    io::write_file_atomic(p, contents);
    result.outputs.push_back(p);
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  void warn(std::string w) { result.warnings.push_back(std::move(w)); }
};

std::string csv_string(const io::CsvTable& t) {
  std::ostringstream ss;
  io::write_csv(ss, t);
  return ss.str();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(io::read_file(p));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", p.string(), e.what()));
  }
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string relative_name(const PipelineConfig& cfg, const fs::path& p) {
  std::error_code ec;
  auto rel = fs::relative(p, cfg.output_dir, ec);
  if (!ec && !rel.empty() && rel.native().rfind("..", 0) != 0) return rel.generic_string();
  return fs::absolute(p).lexically_normal().generic_string();
}

// Hashes inputs and outputs into manifest.json. Inputs whose recorded hash
// (as some stage's output) no longer matches are reported as stale.
void check_staleness(Context& ctx) {
  const fs::path mpath = ctx.out("manifest.json");
  if (!fs::exists(mpath)) return;
  json m = read_json(mpath);
  if (!m.contains("stages")) return;
  std::map<std::string, std::pair<std::string, std::string>> produced;  // name -> (hash, stage)
  for (auto& [stage, entry] : m["stages"].items())
    if (entry.contains("outputs"))
      for (auto& [name, hash] : entry["outputs"].items()) produced[name] = {hash.get<std::string>(), stage};
  for (const auto& in : ctx.inputs) {
    const auto name = relative_name(ctx.cfg, in);
    auto it = produced.find(name);
    if (it == produced.end()) continue;
    if (sha256_file(in) != it->second.first)
      ctx.warn(fmt::format("stale input: {} changed since stage '{}' wrote it", name, it->second.second));
  }
}

void update_manifest(Context& ctx) {
  const fs::path mpath = ctx.out("manifest.json");
  json m = fs::exists(mpath) ? read_json(mpath) : json::object();
  m["tool"] = "uidpipe";
  m["version"] = kVersion;
  json entry;
  entry["timestamp"] = iso_timestamp();
  entry["seed"] = ctx.cfg.seed;
  entry["density_source"] = to_string(ctx.cfg.density_source);
  entry["verb_intercept"] = ctx.cfg.verb_intercept;
  json ins = json::object(), outs = json::object();
  std::set<fs::path> seen;
  for (const auto& p : ctx.inputs)
    if (seen.insert(p).second) ins[relative_name(ctx.cfg, p)] = sha256_file(p);
  for (const auto& p : ctx.result.outputs) outs[relative_name(ctx.cfg, p)] = sha256_file(p);
  entry["inputs"] = ins;
  entry["outputs"] = outs;
  m["stages"][to_string(ctx.stage)] = entry;
  io::write_file_atomic(mpath, m.dump(2) + "\n");
}

json audit_json(const ExclusionAudit& a) {
  json ex = json::array();
  for (const auto& [rule, n] : a.excluded) ex.push_back({{"rule", rule}, {"count", n}});
  return {{"candidates", a.candidates}, {"excluded", ex}, {"retained", a.retained}};
}

std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }
std::optional<int> parse_opt_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stoi(s);
}

Corpus load_corpus(Context& ctx) {
  const auto p = ctx.need("corpus.conllu", Stage::Ingest);
  return parse_conllu_files({p.string()});
}

// ---------------------------------------------------------------- readers

std::vector<TrainingInstance> read_training(const fs::path& p) {
  const auto t = io::read_csv(p);
  std::vector<TrainingInstance> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TrainingInstance ti;
    ti.id = {t.at(r, "conversation_id"), t.integer(r, "utterance_index"), t.integer(r, "verb_index")};
    ti.verb_lemma = t.at(r, "verb_lemma");
    ti.label = t.integer(r, "label");
    ti.matrix_subject_index = t.integer(r, "matrix_subject_index");
    out.push_back(std::move(ti));
  }
  return out;
}

CCInfo read_cc(const io::CsvTable& t, std::size_t r) {
  CCInfo cc;
  cc.cc_head_index = t.integer(r, "cc_head_index");
  cc.that_present = t.integer(r, "that_present") != 0;
  cc.complementizer_index = parse_opt_int(t.at(r, "complementizer_index"));
  cc.cc_subject_index = parse_opt_int(t.at(r, "cc_subject_index"));
  cc.onset_index = t.integer(r, "onset_index");
  return cc;
}

std::vector<std::string> cc_columns() {
  return {"that_present", "cc_head_index", "complementizer_index", "cc_subject_index", "onset_index"};
}

std::vector<std::string> cc_fields(const CCInfo& cc) {
  return {cc.that_present ? "1" : "0", std::to_string(cc.cc_head_index), opt_int(cc.complementizer_index),
          opt_int(cc.cc_subject_index), std::to_string(cc.onset_index)};
}

std::vector<ThatInstance> read_that(const fs::path& p) {
  const auto t = io::read_csv(p);
  std::vector<ThatInstance> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ThatInstance ti;
    ti.id = {t.at(r, "conversation_id"), t.integer(r, "utterance_index"), t.integer(r, "verb_index")};
    ti.verb_lemma = t.at(r, "verb_lemma");
    ti.speaker_id = t.at(r, "speaker_id");
    ti.matrix_subject_index = t.integer(r, "matrix_subject_index");
    ti.cc = read_cc(t, r);
    ti.that_present = ti.cc.that_present;
    out.push_back(std::move(ti));
  }
  return out;
}

std::map<std::string, std::vector<CCRecord>> read_history(const fs::path& p) {
  const auto t = io::read_csv(p);
  std::map<std::string, std::vector<CCRecord>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    CCRecord rec;
    rec.id = {t.at(r, "conversation_id"), t.integer(r, "utterance_index"), t.integer(r, "verb_index")};
    rec.speaker_id = t.at(r, "speaker_id");
    rec.cc = read_cc(t, r);
    out[rec.id.conversation_id].push_back(std::move(rec));
  }
  return out;
}

// A DataTable serialised with one column per term source.
io::CsvTable table_csv(const std::vector<std::string>& ids, const DataTable& data, const std::vector<TermSpec>& terms,
                       const std::vector<std::pair<std::string, std::vector<std::string>>>& extra) {
  io::CsvTable t;
  t.header.push_back("instance_id");
  for (const auto& [name, _] : extra) t.header.push_back(name);
  for (const auto& term : terms) t.header.push_back(term.source);
  for (std::size_t r = 0; r < data.rows; ++r) {
    std::vector<std::string> row{ids[r]};
    for (const auto& [_, col] : extra) row.push_back(col[r]);
    for (const auto& term : terms) {
      if (term.kind == TermKind::Continuous)
        row.push_back(io::format_double(data.numeric.at(term.source)[r]));
      else
        row.push_back(data.categorical.at(term.source)[r]);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

DataTable read_table(const io::CsvTable& t, const std::vector<TermSpec>& terms) {
  DataTable d;
  d.rows = t.rows.size();
  for (const auto& term : terms) {
    if (!t.has_column(term.source)) continue;
    if (term.kind == TermKind::Continuous) {
      std::vector<double> v;
      for (std::size_t r = 0; r < t.rows.size(); ++r) v.push_back(t.number(r, term.source));
      d.add(term.source, std::move(v));
    } else {
      std::vector<std::string> v;
      for (std::size_t r = 0; r < t.rows.size(); ++r) v.push_back(t.at(r, term.source));
      d.add(term.source, std::move(v));
    }
  }
  return d;
}

std::map<std::string, std::size_t> id_index(const io::CsvTable& t, const std::string& key = "instance_id") {
  std::map<std::string, std::size_t> m;
  const auto col = t.column(key);
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (!m.emplace(t.rows[r][col], r).second) throw DataError("duplicate instance_id " + t.rows[r][col]);
  return m;
}

// Drops terms whose coded column would be constant.
std::vector<TermSpec> usable_terms(const DataTable& data, const std::vector<TermSpec>& terms, Context& ctx) {
  std::vector<TermSpec> keep;
  for (const auto& t : terms) {
    bool constant = true;
    if (t.kind == TermKind::Continuous) {
      const auto& v = data.numeric.at(t.source);
      for (double x : v) constant &= x == v.front();
    } else {
      const auto& v = data.categorical.at(t.source);
      for (const auto& x : v) constant &= x == v.front();
    }
    if (constant)
      ctx.warn(fmt::format("term '{}' is constant in this dataset and was dropped", t.name));
    else
      keep.push_back(t);
  }
  return keep;
}

// Design columns without the intercept, for the classifier.
Eigen::MatrixXd without_intercept(const DesignMatrix& dm) { return dm.values.rightCols(dm.cols() - 1); }

// ---------------------------------------------------------------- stages

void run_ingest(Context& ctx) {
  std::vector<std::string> files;
  for (const auto& p : ctx.cfg.corpus) {
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".conllu") files.push_back(e.path().string());
    } else if (fs::exists(p)) {
      files.push_back(p.string());
    } else {
      throw ConfigError("corpus path not found: " + p.string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .conllu files in the configured corpus paths");
  for (const auto& f : files) ctx.inputs.push_back(f);
  const Corpus c = parse_conllu_files(files);
  ctx.write("corpus.conllu", to_conllu_string(c));

  json convs = json::array();
  for (const auto& [id, conv] : c.conversations) {
    std::set<std::string> speakers;
    std::size_t tokens = 0;
    for (const auto& u : conv) {
      speakers.insert(u.speaker_id);
      tokens += u.tokens.size();
    }
    convs.push_back({{"conversation_id", id}, {"utterances", conv.size()}, {"tokens", tokens},
                     {"speakers", std::vector<std::string>(speakers.begin(), speakers.end())}});
  }
  json summary{{"files", files.size()},
               {"conversations", c.conversations.size()},
               {"utterances", c.utterance_count()},
               {"tokens", c.token_count()},
               {"per_conversation", convs}};
  ctx.write_json("corpus_summary.json", summary);
}

Lexicons load_lex(Context& ctx) {
  const auto& l = ctx.cfg.lexicons;
  ctx.need_source(l.verbs, "verb list");
  ctx.need_source(l.frequency, "frequency lexicon");
  ctx.need_source(l.factivity, "factivity lexicon");
  if (!l.filled.empty()) ctx.need_source(l.filled, "filled-pause list");
  return load_lexicons(l);
}

void run_extract(Context& ctx) {
  const Corpus c = load_corpus(ctx);
  const Lexicons lex = load_lex(ctx);
  const auto ts = extract_training_instances(c, lex);
  const auto td = build_that_dataset(c, lex);

  io::CsvTable tr;
  tr.header = {"instance_id", "conversation_id", "utterance_index", "verb_index", "verb_lemma", "label",
               "matrix_subject_index"};
  for (const auto& i : ts.instances)
    tr.rows.push_back({i.id.str(), i.id.conversation_id, std::to_string(i.id.utterance_index),
                       std::to_string(i.id.verb_index), i.verb_lemma, std::to_string(i.label),
                       std::to_string(i.matrix_subject_index)});
  ctx.write("training.csv", csv_string(tr));

  io::CsvTable th;
  th.header = {"instance_id", "conversation_id", "utterance_index", "verb_index", "verb_lemma", "speaker_id",
               "matrix_subject_index"};
  for (const auto& c2 : cc_columns()) th.header.push_back(c2);
  for (const auto& i : td.instances) {
    std::vector<std::string> row{i.id.str(), i.id.conversation_id, std::to_string(i.id.utterance_index),
                                 std::to_string(i.id.verb_index), i.verb_lemma, i.speaker_id,
                                 std::to_string(i.matrix_subject_index)};
    for (auto& f : cc_fields(i.cc)) row.push_back(std::move(f));
    th.rows.push_back(std::move(row));
  }
  ctx.write("that_dataset.csv", csv_string(th));

  io::CsvTable hist;
  hist.header = {"conversation_id", "utterance_index", "verb_index", "speaker_id"};
  for (const auto& c2 : cc_columns()) hist.header.push_back(c2);
  for (const auto& [conv, recs] : td.history)
    for (const auto& r : recs) {
      std::vector<std::string> row{conv, std::to_string(r.id.utterance_index), std::to_string(r.id.verb_index),
                                   r.speaker_id};
      for (auto& f : cc_fields(r.cc)) row.push_back(std::move(f));
      hist.rows.push_back(std::move(row));
    }
  ctx.write("cc_history.csv", csv_string(hist));

  SubcatTable sub;
  std::string sub_source = "training instances";
  if (ctx.cfg.subcat_counts) {
    sub = load_subcat_counts(ctx.need_source(*ctx.cfg.subcat_counts, "subcategorization counts").string());
    sub_source = "external counts";
  } else if (!ts.instances.empty()) {
    sub = subcat_probabilities(ts.instances);
  } else {
    throw DataError("no training instances; cannot estimate subcategorization probabilities");
  }
  io::CsvTable st;
  st.header = {"verb_lemma", "total", "cc", "probability", "percent"};
  for (const auto& [lemma, e] : sub.rows)
    st.rows.push_back({lemma, std::to_string(e.total_occurrences), std::to_string(e.cc_occurrences),
                       io::format_double(e.probability), SubcatTable::percentage(e)});
  ctx.write("subcat.csv", csv_string(st));

  ctx.write_json("exclusions.json", {{"training", audit_json(ts.audit)},
                                     {"that_dataset", audit_json(td.audit)},
                                     {"subcat_source", sub_source}});
}

SubcatTable read_subcat(const fs::path& p) {
  const auto t = io::read_csv(p);
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> counts;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    counts.emplace_back(t.at(r, "verb_lemma"), static_cast<std::size_t>(t.integer(r, "total")),
                        static_cast<std::size_t>(t.integer(r, "cc")));
  return subcat_from_counts(counts);
}

std::vector<TermSpec> control_terms() {
  auto terms = that_model_terms();
  terms.erase(terms.begin());  // information density arrives later
  return terms;
}

void run_features(Context& ctx) {
  const Corpus c = load_corpus(ctx);
  const Lexicons lex = load_lex(ctx);
  const auto training = read_training(ctx.need("training.csv", Stage::Extract));
  auto that = read_that(ctx.need("that_dataset.csv", Stage::Extract));
  const auto history = read_history(ctx.need("cc_history.csv", Stage::Extract));
  const SubcatTable sub = read_subcat(ctx.need("subcat.csv", Stage::Extract));
  const FrequencyModel freq(lex, c);

  std::vector<FeatureVector> feats;
  std::vector<std::string> ids, labels, lemmas;
  std::size_t verb_fallback = 0, subject_fallback = 0;
  for (const auto& inst : training) {
    const Utterance& u = find_utterance(c, inst.id);
    feats.push_back(linguistic_features(inst, u, lex, sub, freq));
    ids.push_back(inst.id.str());
    labels.push_back(std::to_string(inst.label));
    lemmas.push_back(inst.verb_lemma);
    if (!freq.lookup(u.at(inst.id.verb_index)).from_lexicon) ++verb_fallback;
    if (!freq.lookup(u.at(inst.matrix_subject_index)).from_lexicon) ++subject_fallback;
  }
  const auto fterms = linguistic_feature_terms();
  ctx.write("features.csv", csv_string(table_csv(ids, feature_table(feats), fterms,
                                                 {{"label", labels}, {"verb_lemma", lemmas}})));

  std::vector<std::string> tids, speakers, tlemmas, outcome;
  for (auto& inst : that) {
    auto hit = c.conversations.find(inst.id.conversation_id);
    if (hit == c.conversations.end()) throw DataError("unknown conversation " + inst.id.conversation_id);
    auto h = history.find(inst.id.conversation_id);
    static const std::vector<CCRecord> none;
    inst.controls = control_variables(inst, hit->second, lex, h == history.end() ? none : h->second, freq);
    tids.push_back(inst.id.str());
    speakers.push_back(inst.speaker_id);
    tlemmas.push_back(inst.verb_lemma);
    outcome.push_back(inst.that_present ? "1" : "0");
  }
  const DataTable controls = control_table(that, std::vector<double>(that.size(), 0.0));
  const auto cterms = control_terms();
  ctx.write("controls.csv", csv_string(table_csv(tids, controls, cterms,
                                                 {{"that_present", outcome},
                                                  {"speaker_id", speakers},
                                                  {"verb_lemma", tlemmas}})));

  json dist = json::array();
  for (const auto& d : distributions(controls, cterms)) {
    json row{{"predictor", d.name}, {"type", d.type}};
    if (d.levels.empty()) {
      row["mean"] = d.mean;
      row["sd"] = d.sd;
    } else {
      json lv = json::array();
      for (const auto& l : d.levels) lv.push_back({{"level", l.level}, {"count", l.count}, {"percent", l.percent}});
      row["levels"] = lv;
    }
    dist.push_back(row);
  }
  ctx.write_json("distributions.json", {{"instances", that.size()}, {"predictors", dist}});
  ctx.write_json("features_meta.json",
                 {{"training_instances", training.size()},
                  {"frequency_fallback",
                   {{"rule", "words missing from the frequency lexicon use log10((corpus count + 1) * 1e6 / corpus tokens)"},
                    {"corpus_tokens", freq.corpus_tokens()},
                    {"verb_frequency_from_corpus", verb_fallback},
                    {"subject_frequency_from_corpus", subject_fallback}}}});
}

struct ClassifierData {
  std::vector<std::string> ids;
  std::vector<int> y;
  Eigen::MatrixXd x;
  std::vector<std::string> columns;
  json meta = json::object();
};

ClassifierData verb_classifier_data(Context& ctx) {
  const auto t = io::read_csv(ctx.need("features.csv", Stage::Features));
  const auto terms = linguistic_feature_terms();
  ClassifierData d;
  const DataTable data = read_table(t, terms);
  const auto kept = usable_terms(data, terms, ctx);
  const DesignMatrix dm = encode(data, kept);
  d.x = without_intercept(dm);
  d.columns.assign(dm.column_names.begin() + 1, dm.column_names.end());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    d.ids.push_back(t.at(r, "instance_id"));
    d.y.push_back(t.integer(r, "label"));
  }
  json names = json::array();
  for (const auto& k : kept) names.push_back(k.name);
  d.meta["features"] = names;
  return d;
}

ClassifierData embedding_classifier_data(Context& ctx) {
  if (!ctx.cfg.embeddings) throw ConfigError("density source 'embedding' needs an 'embeddings' path in the config");
  const auto training = read_training(ctx.need("training.csv", Stage::Extract));
  const auto e = io::read_csv(ctx.need_source(*ctx.cfg.embeddings, "embeddings file"));
  const auto idx = id_index(e, "id");
  const Eigen::Index dims = static_cast<Eigen::Index>(e.header.size()) - 1;
  if (dims < 1 || e.header.front() != "id") throw DataError("embeddings file needs an 'id' column followed by vector columns");
  if (idx.size() != training.size())
    throw DataError(fmt::format("embeddings have {} rows but there are {} training instances", idx.size(), training.size()));
  ClassifierData d;
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(training.size()), dims);
  for (std::size_t r = 0; r < training.size(); ++r) {
    const auto id = training[r].id.str();
    auto it = idx.find(id);
    if (it == idx.end()) throw DataError("no embedding for training instance " + id);
    for (Eigen::Index j = 0; j < dims; ++j) {
      const auto& s = e.rows[it->second][static_cast<std::size_t>(j + 1)];
      char* end = nullptr;
      raw(static_cast<Eigen::Index>(r), j) = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0') throw DataError("non-numeric embedding value for " + id);
    }
    d.ids.push_back(id);
    d.y.push_back(training[r].label);
  }
  const int k = std::min<int>(ctx.cfg.pca_components, static_cast<int>(std::min<Eigen::Index>(dims, raw.rows() - 1)));
  if (k < ctx.cfg.pca_components)
    ctx.warn(fmt::format("PCA components reduced from {} to {} by data size", ctx.cfg.pca_components, k));
  const auto pca = ml::pca_fit(raw, k);
  for (const auto& w : pca.warnings) ctx.warn(w);
  d.x = ml::pca_transform(pca, raw);
  for (int j = 0; j < pca.dims(); ++j) d.columns.push_back(fmt::format("pc{}", j + 1));
  std::vector<double> ratio(pca.explained_variance_ratio.data(),
                            pca.explained_variance_ratio.data() + pca.explained_variance_ratio.size());
  d.meta["pca"] = {{"input_dims", dims},
                   {"components", pca.dims()},
                   {"explained_variance_ratio", ratio},
                   {"retained", pca.explained_variance_ratio.sum()},
                   {"note", "PCA is fitted once on all training rows, so held-out folds share the projection"}};
  return d;
}

ClassifierData classifier_data(Context& ctx) {
  return ctx.cfg.density_source == DensitySource::Verb ? verb_classifier_data(ctx) : embedding_classifier_data(ctx);
}

json cv_json(const ml::CVResult& cv) {
  const auto ic = ml::aic_bic(cv.total_nll, cv.k, static_cast<double>(cv.n));
  return {{"n", cv.n},       {"k", cv.k},           {"total_nll", cv.total_nll}, {"aic", ic.aic},
          {"bic", ic.bic},   {"f1", cv.f1},         {"log_loss", cv.log_loss},   {"fold_f1", cv.fold_f1},
          {"fold_log_loss", cv.fold_log_loss}, {"fold_best_epoch", cv.fold_best_epoch}};
}

json train_config_json(const ml::TrainConfig& t) {
  return {{"hidden_sizes", t.hidden_sizes}, {"dropout", t.dropout},       {"learning_rate", t.learning_rate},
          {"weight_decay", t.weight_decay}, {"batch_size", t.batch_size}, {"max_epochs", t.max_epochs},
          {"patience", t.patience},         {"folds", t.folds},           {"seed", t.seed}};
}

void run_train(Context& ctx) {
  const std::string src = to_string(ctx.cfg.density_source);
  ClassifierData d = classifier_data(ctx);
  auto out = ml::train_mlp_cv(d.x, d.y, ctx.cfg.train);

  io::CsvTable oof;
  oof.header = {"instance_id", "label", "fold", "probability"};
  for (std::size_t i = 0; i < d.ids.size(); ++i)
    oof.rows.push_back({d.ids[i], std::to_string(d.y[i]), std::to_string(out.cv.fold_of[i]),
                        io::format_double(out.cv.oof(static_cast<Eigen::Index>(i)))});
  ctx.write("oof_" + src + ".csv", csv_string(oof));

  std::ostringstream bin(std::ios::binary);
  ml::save_checkpoint(*out.final_model, bin);
  ctx.write("model_" + src + ".bin", bin.str());

  json j{{"density_source", src},
         {"inputs", d.columns},
         {"train_config", train_config_json(ctx.cfg.train)},
         {"cv", cv_json(out.cv)},
         {"final_epochs", out.final_epochs},
         {"metrics_are", "pooled out-of-fold"}};
  for (auto& [k, v] : d.meta.items()) j[k] = v;
  ctx.write_json("cv_" + src + ".json", j);
}

void run_select(Context& ctx) {
  const auto t = io::read_csv(ctx.need("features.csv", Stage::Features));
  const auto terms = linguistic_feature_terms();
  const DataTable data = read_table(t, terms);
  const auto kept = usable_terms(data, terms, ctx);
  const DesignMatrix dm = encode(data, kept);
  std::vector<int> y;
  for (std::size_t r = 0; r < t.rows.size(); ++r) y.push_back(t.integer(r, "label"));

  std::vector<ml::Candidate> cands;
  for (const auto& term : kept) {
    const auto& cols = dm.term_columns.at(term.name);
    cands.push_back({term.name, dm.values(Eigen::all, cols)});
  }
  const auto rep = ml::incremental_selection(cands, y, ctx.cfg.train);

  auto step_json = [](const ml::SelectionStep& s) {
    json j{{"model", s.name},         {"accepted", s.accepted}, {"failed", s.failed}, {"inputs", s.inputs},
           {"k", s.k},                {"nll", s.nll},           {"aic", s.aic},       {"bic", s.bic},
           {"delta_aic", s.delta_aic}, {"delta_bic", s.delta_bic}, {"f1", s.f1},       {"log_loss", s.log_loss}};
    if (s.failed) j["error"] = s.error;
    if (s.delta_aic_zero_k) {
      j["delta_aic_if_no_parameter_change"] = *s.delta_aic_zero_k;
      j["delta_bic_if_no_parameter_change"] = *s.delta_bic_zero_k;
    }
    return j;
  };
  json steps = json::array();
  for (const auto& s : rep.steps) steps.push_back(step_json(s));

  const Eigen::MatrixXd x = without_intercept(dm);
  Eigen::VectorXd yv(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) yv(static_cast<Eigen::Index>(i)) = y[i];
  ml::LassoOptions lopt;
  lopt.seed = ctx.cfg.seed;
  const auto lasso = ml::lasso(x, yv, {}, lopt);
  json coefs = json::array();
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    coefs.push_back({{"column", dm.column_names[static_cast<std::size_t>(j + 1)]}, {"coefficient", lasso.coef(j)}});
  std::set<std::string> selected_terms;
  for (const auto& term : kept)
    for (int c : dm.term_columns.at(term.name))
      if (lasso.coef(c - 1) != 0.0) selected_terms.insert(term.name);
  json sel_terms = json::array();
  for (const auto& term : kept)
    if (selected_terms.count(term.name)) sel_terms.push_back(term.name);

  ctx.write_json("selection.json",
                 {{"n", rep.n},
                  {"train_config", train_config_json(ctx.cfg.train)},
                  {"parameter_convention", "k = input columns x first hidden layer width"},
                  {"baseline", step_json(rep.baseline)},
                  {"steps", steps},
                  {"accepted", rep.accepted},
                  {"lasso",
                   {{"lambda", lasso.lambda},
                    {"lambda_max", lasso.lambda_grid.front()},
                    {"intercept", lasso.intercept},
                    {"coefficients", coefs},
                    {"selected_terms", sel_terms}}}});
}

void run_density(Context& ctx) {
  const std::string src = to_string(ctx.cfg.density_source);
  const auto that = read_that(ctx.need("that_dataset.csv", Stage::Extract));
  const auto oof = io::read_csv(ctx.need("oof_" + src + ".csv", Stage::Train));
  const auto idx = id_index(oof);
  io::CsvTable out;
  out.header = {"instance_id", "probability", "density"};
  for (const auto& inst : that) {
    const auto id = inst.id.str();
    auto it = idx.find(id);
    if (it == idx.end()) throw DataError("no classifier prediction for that-instance " + id);
    const auto est = ml::make_density(id, oof.number(it->second, "probability"));
    out.rows.push_back({id, io::format_double(est.probability), io::format_double(est.density)});
  }
  ctx.write("density_" + src + ".csv", csv_string(out));
}

struct FitInputs {
  DataTable data;
  std::vector<int> y;
  std::vector<std::string> speakers, verbs, ids;
};

FitInputs fit_inputs(Context& ctx, DensitySource source) {
  const std::string src = to_string(source);
  const auto that = read_that(ctx.need("that_dataset.csv", Stage::Extract));
  const auto controls = io::read_csv(ctx.need("controls.csv", Stage::Features));
  const auto dens = io::read_csv(ctx.need("density_" + src + ".csv", Stage::Density));
  const auto cidx = id_index(controls);
  const auto didx = id_index(dens);
  if (controls.rows.size() != that.size() || dens.rows.size() != that.size())
    throw DataError("controls, density, and that-dataset row counts disagree");

  io::CsvTable ordered;
  ordered.header = controls.header;
  FitInputs f;
  std::vector<double> density;
  for (const auto& inst : that) {
    const auto id = inst.id.str();
    auto c = cidx.find(id);
    auto d = didx.find(id);
    if (c == cidx.end() || d == didx.end()) throw DataError("instance " + id + " lacks controls or density");
    ordered.rows.push_back(controls.rows[c->second]);
    density.push_back(dens.number(d->second, "density"));
    f.y.push_back(inst.that_present ? 1 : 0);
    f.speakers.push_back(inst.speaker_id);
    f.verbs.push_back(inst.verb_lemma);
    f.ids.push_back(id);
  }
  f.data = read_table(ordered, control_terms());
  f.data.add("information_density", std::move(density));
  return f;
}

json fit_json(const glmm::GLMMFit& fit, const std::vector<glmm::WaldRow>& wald,
              const std::vector<glmm::GvifRow>& gv, const DesignMatrix& dm) {
  json terms = json::array();
  for (const auto& w : wald)
    terms.push_back({{"term", w.term}, {"estimate", w.estimate}, {"se", w.se}, {"z", w.z}, {"p", w.p},
                     {"estimate_text", w.estimate_text}, {"p_text", w.p_text}});
  json theta = json::object();
  for (std::size_t g = 0; g < fit.group_names.size(); ++g) theta[fit.group_names[g]] = fit.theta(static_cast<Eigen::Index>(g));
  json gvif = json::array();
  for (const auto& g : gv)
    gvif.push_back({{"term", g.term}, {"df", g.df}, {"gvif", g.gvif}, {"gvif_adjusted", g.gvif_adjusted}});
  json coding = json::array();
  for (const auto& [term, desc] : dm.coding) coding.push_back({{"term", term}, {"coding", desc}});
  json stdz = json::object();
  for (const auto& [name, s] : dm.standardization) stdz[name] = {{"mean", s.mean}, {"sd", s.sd}};
  return {{"n", fit.n},
          {"fixed_effects", terms},
          {"random_intercept_sd", theta},
          {"loglik", fit.loglik},
          {"deviance", fit.deviance},
          {"aic", fit.aic},
          {"bic", fit.bic},
          {"parameters", static_cast<int>(fit.beta.size()) + fit.variance_parameters},
          {"variance_parameters", fit.variance_parameters},
          {"converged", fit.converged},
          {"singular", fit.singular},
          {"iterations", fit.iterations},
          {"gradient_norm", fit.gradient_norm},
          {"trace", fit.trace},
          {"gvif", gvif},
          {"coding", coding},
          {"standardization", stdz},
          {"warnings", fit.warnings}};
}

void run_fit(Context& ctx) {
  const auto source = ctx.cfg.density_source;
  FitInputs f = fit_inputs(ctx, source);
  const auto terms = usable_terms(f.data, that_model_terms(), ctx);
  const DesignMatrix dm = encode(f.data, terms);

  std::vector<glmm::GroupingFactor> groups{glmm::GroupingFactor::from_labels("speaker", f.speakers)};
  if (ctx.cfg.verb_intercept) groups.push_back(glmm::GroupingFactor::from_labels("verb", f.verbs));
  const auto fit = glmm::fit_glmm(dm.values, dm.column_names, f.y, groups);
  const auto w = glmm::wald(fit);
  const auto gv = glmm::gvif(dm);
  for (const auto& warning : fit.warnings) ctx.warn(warning);

  json j = fit_json(fit, w, gv, dm);
  json out{{"density_source", to_string(source)}, {"verb_intercept", ctx.cfg.verb_intercept}};
  for (auto& [k, v] : j.items()) out[k] = v;
  json dropped = json::array();
  for (const auto& t : that_model_terms())
    if (std::none_of(terms.begin(), terms.end(), [&](const TermSpec& k) { return k.name == t.name; }))
      dropped.push_back(t.name);
  out["dropped_terms"] = dropped;
  ctx.write_json("fit_" + fit_label(source, ctx.cfg.verb_intercept) + ".json", out);
}

std::string model_label(DensitySource s, bool verb) {
  std::string base = s == DensitySource::Verb ? "Linguistic-feature density" : "Embedding density";
  return verb ? base + " with verb random intercept" : base;
}

void run_compare(Context& ctx) {
  std::vector<std::pair<std::string, glmm::GLMMFit>> fits;
  std::vector<std::string> files;
  for (auto s : {DensitySource::Verb, DensitySource::Embedding})
    for (bool v : {false, true}) {
      const auto name = "fit_" + fit_label(s, v) + ".json";
      if (!fs::exists(ctx.out(name))) continue;
      ctx.inputs.push_back(ctx.out(name));
      const json j = read_json(ctx.out(name));
      glmm::GLMMFit f;
      f.n = j.at("n").get<std::size_t>();
      f.aic = j.at("aic").get<double>();
      f.bic = j.at("bic").get<double>();
      f.loglik = j.at("loglik").get<double>();
      f.variance_parameters = j.at("variance_parameters").get<int>();
      f.beta = Eigen::VectorXd::Zero(j.at("parameters").get<int>() - f.variance_parameters);
      fits.emplace_back(model_label(s, v), std::move(f));
      files.push_back(name);
    }
  if (fits.size() < 2) throw DependencyError("compare", "at least two fit_*.json files (run 'fit' first)");
  const auto rows = glmm::compare(fits);
  io::CsvTable t;
  t.header = {"model", "aic", "bic", "loglik", "parameters", "best_aic", "best_bic"};
  json arr = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    t.rows.push_back({r.label, fmt::format("{:.2f}", r.aic), fmt::format("{:.2f}", r.bic), fmt::format("{:.2f}", r.loglik),
                      std::to_string(r.parameters), r.best_aic ? "1" : "0", r.best_bic ? "1" : "0"});
    arr.push_back({{"model", r.label}, {"source_file", files[i]}, {"aic", r.aic}, {"bic", r.bic},
                   {"loglik", r.loglik}, {"parameters", r.parameters}, {"best_aic", r.best_aic},
                   {"best_bic", r.best_bic}});
  }
  ctx.write("comparison.csv", csv_string(t));
  ctx.write_json("comparison.json", {{"n", fits.front().second.n}, {"models", arr}});
}

// ---------------------------------------------------------------- reports

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

std::string table1_text(const json& sel) {
  std::string out = "Model                              F1      Log Loss   dAIC          dBIC          Kept\n";
  auto line = [&](const json& s, bool first) {
    std::string d_aic = first ? "" : fmt::format("{:.2f}", s["delta_aic"].get<double>());
    std::string d_bic = first ? "" : fmt::format("{:.2f}", s["delta_bic"].get<double>());
    out += pad(s["model"].get<std::string>(), 35) + pad(fmt::format("{:.3f}", s["f1"].get<double>()), 8) +
           pad(fmt::format("{:.4f}", s["log_loss"].get<double>()), 11) + pad(d_aic, 14) + pad(d_bic, 14) +
           (first ? "" : (s["failed"].get<bool>() ? "failed" : (s["accepted"].get<bool>() ? "yes" : "no"))) + "\n";
  };
  line(sel["baseline"], true);
  for (const auto& s : sel["steps"]) line(s, false);
  if (!sel["steps"].empty() && sel["steps"][0].contains("delta_aic_if_no_parameter_change")) {
    const auto& s = sel["steps"][0];
    out += fmt::format(
        "\nFirst step against the intercept-only baseline: dAIC {:.2f}, dBIC {:.2f} charging {} parameters; "
        "dAIC = dBIC = {:.2f} charging none.\n",
        s["delta_aic"].get<double>(), s["delta_bic"].get<double>(), s["k"].get<double>(),
        s["delta_aic_if_no_parameter_change"].get<double>());
  }
  const auto& l = sel["lasso"];
  out += fmt::format("\nLasso (lambda {:.4g}) selected:", l["lambda"].get<double>());
  for (const auto& t : l["selected_terms"]) out += " " + t.get<std::string>() + ";";
  out += "\n";
  return out;
}

std::string table2_text(const json& fit) {
  std::string out = fmt::format("Density source: {}{}\n", fit["density_source"].get<std::string>(),
                                fit["verb_intercept"].get<bool>() ? " (with verb random intercept)" : "");
  out += "Predictor                        Estimate   p-value\n";
  for (const auto& t : fit["fixed_effects"])
    out += pad(t["term"].get<std::string>(), 33) + pad(t["estimate_text"].get<std::string>(), 11) +
           t["p_text"].get<std::string>() + "\n";
  out += "Random intercept sd:";
  for (auto& [g, v] : fit["random_intercept_sd"].items()) out += fmt::format(" {} {:.3f};", g, v.get<double>());
  out += fmt::format("\nAIC {:.2f}  BIC {:.2f}  logLik {:.2f}  n {}\n", fit["aic"].get<double>(), fit["bic"].get<double>(),
                     fit["loglik"].get<double>(), fit["n"].get<std::size_t>());
  out += "GVIF:";
  for (const auto& g : fit["gvif"]) out += fmt::format(" {} {:.2f};", g["term"].get<std::string>(), g["gvif"].get<double>());
  out += "\n";
  return out;
}

void run_report(Context& ctx) {
  const std::string src = to_string(ctx.cfg.density_source);
  const auto that = read_that(ctx.need("that_dataset.csv", Stage::Extract));
  const auto dens = io::read_csv(ctx.need("density_" + src + ".csv", Stage::Density));
  const json excl = read_json(ctx.need("exclusions.json", Stage::Extract));
  const auto didx = id_index(dens);

  const std::size_t retained = excl["that_dataset"]["retained"].get<std::size_t>();
  if (retained != that.size())
    throw DataError(fmt::format("that-dataset has {} rows but the exclusion audit retains {}", that.size(), retained));

  std::vector<double> density;
  std::vector<int> y;
  std::vector<std::string> verbs;
  for (const auto& inst : that) {
    auto it = didx.find(inst.id.str());
    if (it == didx.end()) throw DataError("no density for " + inst.id.str());
    density.push_back(dens.number(it->second, "density"));
    y.push_back(inst.that_present ? 1 : 0);
    verbs.push_back(inst.verb_lemma);
  }
  if (that.empty()) throw DataError("that-dataset is empty; nothing to report");
  const auto rep = report::binned_density(density, y, ctx.cfg.bins, verbs);
  for (const auto& w : rep.warnings) ctx.warn(w);
  io::CsvTable bins;
  bins.header = {"bin", "density_lo", "density_hi", "midpoint", "count", "that_count", "proportion"};
  json jb = json::array();
  std::size_t total = 0;
  for (std::size_t b = 0; b < rep.bins.size(); ++b) {
    const auto& x = rep.bins[b];
    total += x.count;
    bins.rows.push_back({std::to_string(b + 1), io::format_double(x.lo), io::format_double(x.hi),
                         io::format_double(x.midpoint), std::to_string(x.count), std::to_string(x.that_count),
                         io::format_double(x.proportion)});
    jb.push_back({{"lo", x.lo}, {"hi", x.hi}, {"midpoint", x.midpoint}, {"count", x.count},
                  {"that_count", x.that_count}, {"proportion", x.proportion}});
  }
  if (total != retained) throw DataError("binned counts do not reconcile with the exclusion audit");
  json jv = json::array();
  for (const auto& v : rep.verbs)
    jv.push_back({{"verb", v.verb}, {"count", v.count}, {"mean_density", v.mean_density}, {"proportion", v.proportion}});
  ctx.write("reports/binned_density_" + src + ".csv", csv_string(bins));
  ctx.write_json("reports/binned_density_" + src + ".json",
                 {{"density_source", src},
                  {"instances", rep.total},
                  {"bins", jb},
                  {"spearman", rep.spearman ? json(*rep.spearman) : json(nullptr)},
                  {"per_verb", jv},
                  {"warnings", rep.warnings}});

  std::string summary = "uidpipe report\n\n";
  summary += fmt::format("Density source: {}\nThat-dataset instances: {} (audit retained {})\n", src, that.size(), retained);
  summary += fmt::format("Binned density: {} bins, Spearman rho {}\n", rep.bins.size(),
                         rep.spearman ? fmt::format("{:.3f}", *rep.spearman) : "n/a");

  if (fs::exists(ctx.out("subcat.csv"))) {
    const auto t = io::read_csv(ctx.need("subcat.csv", Stage::Extract));
    std::string s = "Verb             CC/Total              Probability\n";
    for (std::size_t r = 0; r < t.rows.size(); ++r)
      s += pad(t.at(r, "verb_lemma"), 17) + pad(t.at(r, "cc") + "/" + t.at(r, "total"), 22) + t.at(r, "percent") + "%\n";
    ctx.write("reports/subcat_table.txt", s);
  }
  if (fs::exists(ctx.out("selection.json")))
    ctx.write("reports/selection_table.txt", table1_text(read_json(ctx.need("selection.json", Stage::Select))));
  for (auto s : {DensitySource::Verb, DensitySource::Embedding})
    for (bool v : {false, true}) {
      const auto name = "fit_" + fit_label(s, v) + ".json";
      if (fs::exists(ctx.out(name)))
        ctx.write("reports/estimates_" + fit_label(s, v) + ".txt", table2_text(read_json(ctx.need(name, Stage::Fit))));
    }
  if (fs::exists(ctx.out("comparison.json"))) {
    const json c = read_json(ctx.need("comparison.json", Stage::Compare));
    std::string s = "Model                                                  AIC         BIC\n";
    for (const auto& m : c["models"])
      s += pad(m["model"].get<std::string>(), 55) + pad(fmt::format("{:.2f}", m["aic"].get<double>()), 12) +
           fmt::format("{:.2f}", m["bic"].get<double>()) + "\n";
    ctx.write("reports/comparison_table.txt", s);
  }
  if (fs::exists(ctx.out("distributions.json"))) {
    const json d = read_json(ctx.need("distributions.json", Stage::Features));
    std::string s = "Predictor                   Type                        Distribution\n";
    for (const auto& p : d["predictors"]) {
      std::string dist;
      if (p.contains("levels")) {
        for (const auto& l : p["levels"])
          dist += fmt::format("{} {:.2f}%; ", l["level"].get<std::string>(), l["percent"].get<double>());
      } else {
        dist = fmt::format("mean {:.2f}, sd {:.2f}", p["mean"].get<double>(), p["sd"].get<double>());
      }
      s += pad(p["predictor"].get<std::string>(), 28) + pad(p["type"].get<std::string>(), 28) + dist + "\n";
    }
    ctx.write("reports/predictor_distributions.txt", s);
  }
  ctx.write("reports/summary.txt", summary);
}

}  // namespace

// ---------------------------------------------------------------- public

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s{Stage::Ingest, Stage::Extract, Stage::Features, Stage::Train, Stage::Select,
                                    Stage::Density, Stage::Fit, Stage::Compare, Stage::Report};
  return s;
}

std::string to_string(Stage s) { return stage_names().at(s); }

Stage stage_from_string(const std::string& s) {
  for (const auto& [stage, name] : stage_names())
    if (name == s) return stage;
  throw ConfigError("unknown stage '" + s + "'");
}

std::string to_string(DensitySource s) { return s == DensitySource::Verb ? "verb" : "embedding"; }

DensitySource density_source_from_string(const std::string& s) {
  if (s == "verb" || s == "verb_subcat") return DensitySource::Verb;
  if (s == "embedding") return DensitySource::Embedding;
  throw ConfigError("unknown density source '" + s + "' (expected verb or embedding)");
}

std::string fit_label(DensitySource s, bool verb_intercept) {
  return to_string(s) + (verb_intercept ? "_verbri" : "");
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> md(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!md || EVP_DigestInit_ex(md.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 unavailable");
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(md.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(md.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

PipelineConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  auto resolve = [&](const std::string& p) { return (fs::path(p).is_absolute() ? fs::path(p) : base / p).lexically_normal(); };
  PipelineConfig c;
  try {
    if (!j.contains("corpus")) throw ConfigError("config needs 'corpus'");
    if (j["corpus"].is_string())
      c.corpus.push_back(resolve(j["corpus"].get<std::string>()));
    else
      for (const auto& p : j["corpus"]) c.corpus.push_back(resolve(p.get<std::string>()));
    const auto& lx = j.at("lexicons");
    c.lexicons.verbs = resolve(lx.at("verbs").get<std::string>()).string();
    c.lexicons.frequency = resolve(lx.at("frequency").get<std::string>()).string();
    c.lexicons.factivity = resolve(lx.at("factivity").get<std::string>()).string();
    if (lx.contains("filled_pauses")) c.lexicons.filled = resolve(lx["filled_pauses"].get<std::string>()).string();
    if (j.contains("subcat_counts") && !j["subcat_counts"].is_null())
      c.subcat_counts = resolve(j["subcat_counts"].get<std::string>());
    if (j.contains("embeddings") && !j["embeddings"].is_null()) c.embeddings = resolve(j["embeddings"].get<std::string>());
    c.output_dir = resolve(j.value("output_dir", std::string("out")));
    c.seed = j.value("seed", std::uint64_t{0});
    c.pca_components = j.value("pca_components", 50);
    c.bins = j.value("bins", 10);
    c.verb_intercept = j.value("verb_intercept", false);
    c.density_source = density_source_from_string(j.value("density_source", std::string("verb")));
    if (j.contains("train")) {
      const auto& t = j["train"];
      if (t.contains("hidden_sizes")) c.train.hidden_sizes = t["hidden_sizes"].get<std::vector<int>>();
      c.train.dropout = t.value("dropout", c.train.dropout);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
      c.train.patience = t.value("patience", c.train.patience);
      c.train.folds = t.value("folds", c.train.folds);
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  c.train.seed = c.seed;
  c.train.validate();
  if (c.bins < 1) throw ConfigError("bins must be positive");
  if (c.pca_components < 1) throw ConfigError("pca_components must be positive");
  return c;
}

StageResult run_stage(Stage stage, const PipelineConfig& cfg) {
  Context ctx{cfg, stage, {}, {}};
  fs::create_directories(cfg.output_dir);
  switch (stage) {
    case Stage::Ingest: run_ingest(ctx); break;
    case Stage::Extract: run_extract(ctx); break;
    case Stage::Features: run_features(ctx); break;
    case Stage::Train: run_train(ctx); break;
    case Stage::Select: run_select(ctx); break;
    case Stage::Density: run_density(ctx); break;
    case Stage::Fit: run_fit(ctx); break;
    case Stage::Compare: run_compare(ctx); break;
    case Stage::Report: run_report(ctx); break;
  }
  check_staleness(ctx);
  update_manifest(ctx);
  return std::move(ctx.result);
}

}  // namespace uidpipe::pipeline
