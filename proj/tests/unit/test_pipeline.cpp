#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "uidpipe/error.hpp"
#include "uidpipe/io/csv.hpp"
#include "uidpipe/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using namespace uidpipe;
using namespace uidpipe::pipeline;
using json = nlohmann::json;

namespace {

// Copy of the bundled fixture with outputs written inside the copy.
struct Workspace {
  fs::path root;
  explicit Workspace(const std::string& tag) {
    root = fs::temp_directory_path() / ("uidpipe_test_" + tag);
    fs::remove_all(root);
    fs::copy(UIDPIPE_DATA_DIR, root, fs::copy_options::recursive);
    auto cfg = json::parse(io::read_file(root / "config.json"));
    cfg["output_dir"] = "out";
    io::write_file_atomic(root / "config.json", cfg.dump(2));
  }
  ~Workspace() { fs::remove_all(root); }
  PipelineConfig config() const { return load_config(root / "config.json"); }
  fs::path out(const std::string& name) const { return root / "out" / name; }
};

std::size_t rule_count(const json& audit, const std::string& rule) {
  for (const auto& e : audit["excluded"])
    if (e["rule"] == rule) return e["count"].get<std::size_t>();
  return 0;
}

void run_all(const PipelineConfig& cfg) {
  for (Stage s : all_stages()) {
    if (s == Stage::Compare) continue;
    run_stage(s, cfg);
  }
}

std::map<std::string, std::string> hashes(const fs::path& dir) {
  std::map<std::string, std::string> h;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      h[fs::relative(e.path(), dir).string()] = sha256_file(e.path());
  return h;
}

}  // namespace

TEST_CASE("extraction counts on the fixture") {
  Workspace ws("counts");
  const auto cfg = ws.config();
  run_stage(Stage::Ingest, cfg);
  run_stage(Stage::Extract, cfg);
  const auto expected = json::parse(io::read_file(ws.root / "expected_counts.json"));
  const auto summary = json::parse(io::read_file(ws.out("corpus_summary.json")));
  CHECK(summary["utterances"] == expected["utterances"]);
  CHECK(summary["tokens"] == expected["tokens"]);
  const auto ex = json::parse(io::read_file(ws.out("exclusions.json")));
  const auto& tr = ex["training"];
  CHECK(tr["candidates"] == expected["training"]["candidates"]);
  CHECK(tr["retained"] == expected["training"]["retained"]);
  for (const char* rule : {"non_verbal_homograph", "sentence_final", "missing_matrix_subject"})
    CHECK(rule_count(tr, rule) == expected["training"][rule].get<std::size_t>());
  const auto& th = ex["that_dataset"];
  CHECK(th["candidates"] == expected["that_dataset"]["candidates"]);
  CHECK(th["retained"] == expected["that_dataset"]["retained"]);
  for (const char* rule : {"first_cc_in_conversation", "missing_subject", "additional_cc_of_verb"})
    CHECK(rule_count(th, rule) == expected["that_dataset"][rule].get<std::size_t>());

  const auto training = io::read_csv(ws.out("training.csv"));
  CHECK(training.rows.size() == expected["training"]["retained"].get<std::size_t>());
  std::size_t positive = 0;
  for (std::size_t i = 0; i < training.rows.size(); ++i) positive += training.integer(i, "label") == 1;
  CHECK(positive == expected["training"]["positive"].get<std::size_t>());
  const auto that = io::read_csv(ws.out("that_dataset.csv"));
  std::size_t present = 0;
  for (std::size_t i = 0; i < that.rows.size(); ++i) present += that.integer(i, "that_present") == 1;
  CHECK(present == expected["that_dataset"]["that_present"].get<std::size_t>());
}

TEST_CASE("stages refuse to run out of order") {
  Workspace ws("order");
  const auto cfg = ws.config();
  CHECK_THROWS_AS(run_stage(Stage::Fit, cfg), DependencyError);
  run_stage(Stage::Ingest, cfg);
  run_stage(Stage::Extract, cfg);
  run_stage(Stage::Features, cfg);
  try {
    run_stage(Stage::Fit, cfg);
    FAIL("fit ran without density");
  } catch (const DependencyError& e) {
    CHECK(e.missing().find("density_verb.csv") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(ws.out("fit_verb.json")));
  CHECK_THROWS_AS(run_stage(Stage::Compare, cfg), DependencyError);
}

TEST_CASE("repeat runs are byte-identical") {
  Workspace a("repeat_a");
  Workspace b("repeat_b");
  run_all(a.config());
  run_all(b.config());
  const auto ha = hashes(a.root / "out");
  const auto hb = hashes(b.root / "out");
  CHECK(ha.size() > 15);
  CHECK(ha == hb);
  const auto manifest = json::parse(io::read_file(a.out("manifest.json")));
  CHECK(manifest["stages"].size() == all_stages().size() - 1);
  CHECK(manifest["stages"]["train"]["seed"] == 7);
}

TEST_CASE("editing an upstream artifact is reported as stale") {
  Workspace ws("stale");
  const auto cfg = ws.config();
  run_stage(Stage::Ingest, cfg);
  auto clean = run_stage(Stage::Extract, cfg);
  CHECK(clean.warnings.empty());
  {
    std::ofstream f(ws.out("corpus.conllu"), std::ios::app);
    f << "# note = edited\n";
  }
  auto res = run_stage(Stage::Extract, cfg);
  bool stale = false;
  for (const auto& w : res.warnings) stale |= w.find("stale input: corpus.conllu") != std::string::npos;
  CHECK(stale);
}

TEST_CASE("config validation") {
  Workspace ws("config");
  auto write = [&](const std::string& text) {
    std::ofstream(ws.root / "bad.json") << text;
    return ws.root / "bad.json";
  };
  CHECK_THROWS_AS(load_config(ws.root / "missing.json"), ConfigError);
  CHECK_THROWS_AS(load_config(write("{not json")), ConfigError);
  CHECK_THROWS_AS(load_config(write(R"({"lexicons": {}})")), ConfigError);
  auto cfg = json::parse(io::read_file(ws.root / "config.json"));
  cfg["density_source"] = "tea leaves";
  CHECK_THROWS_AS(load_config(write(cfg.dump())), ConfigError);
  cfg["density_source"] = "embedding";
  cfg["train"]["dropout"] = 1.5;
  CHECK_THROWS_AS(load_config(write(cfg.dump())), ConfigError);
  CHECK_THROWS_AS(stage_from_string("bake"), ConfigError);
  CHECK(fit_label(DensitySource::Embedding, true) == "embedding_verbri");
  CHECK(ws.config().corpus.front().filename() == "corpus");
}

#ifdef UIDPIPE_CLI
TEST_CASE("command-line exit codes") {
  Workspace ws("cli");
  const std::string cli = UIDPIPE_CLI;
  const std::string cfg = (ws.root / "config.json").string();
  auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("ingest -q -c " + cfg) == 0);
  CHECK(run("fit -q -c " + cfg) == 2);
  CHECK(run("ingest -q -c " + (ws.root / "nope.json").string()) == 2);
  CHECK(run("bake -q -c " + cfg) == 2);
  {
    std::ofstream f(ws.root / "corpus" / "conv01.conllu", std::ios::app);
    f << "1\tbroken\n\n";
  }
  CHECK(run("ingest -q -c " + cfg) == 3);
}
#endif
