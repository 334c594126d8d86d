#pragma once

// Stage runner behind the command-line tool. Every stage reads its inputs
// from the output directory (or the configured sources), writes its
// artifacts atomically, and records hashes in manifest.json.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uidpipe/lexicon.hpp"
#include "uidpipe/ml/mlp.hpp"

namespace uidpipe::pipeline {

enum class Stage { Ingest, Extract, Features, Train, Select, Density, Fit, Compare, Report };

const std::vector<Stage>& all_stages();
std::string to_string(Stage s);
/// Throws ConfigError for unknown names.
Stage stage_from_string(const std::string& s);

enum class DensitySource { Verb, Embedding };
std::string to_string(DensitySource s);
DensitySource density_source_from_string(const std::string& s);

struct PipelineConfig {
  std::vector<std::filesystem::path> corpus;  // files or directories of *.conllu
  LexiconPaths lexicons;
  std::optional<std::filesystem::path> subcat_counts;  // lemma/total/cc table
  std::optional<std::filesystem::path> embeddings;     // id, e0..eN
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  ml::TrainConfig train;
  int pca_components = 50;
  DensitySource density_source = DensitySource::Verb;
  bool verb_intercept = false;
  int bins = 10;
};

/// JSON config; relative paths resolve against the config file's directory.
/// Throws ConfigError on unreadable or invalid files.
PipelineConfig load_config(const std::filesystem::path& path);

struct StageResult {
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> warnings;
};

StageResult run_stage(Stage stage, const PipelineConfig& cfg);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// File name suffix used for source-specific artifacts, e.g. "verb" or
/// "embedding_verbri" when the verb random intercept is on.
std::string fit_label(DensitySource s, bool verb_intercept);

}  // namespace uidpipe::pipeline
