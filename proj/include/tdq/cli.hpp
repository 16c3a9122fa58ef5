#pragma once

// Subcommand implementations behind the `tdq` executable. Each writes its
// outputs atomically and reports progress on the given log stream.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdq/corpus.hpp"
#include "tdq/error.hpp"
#include "tdq/evalgen.hpp"
#include "tdq/model.hpp"
#include "tdq/pmi.hpp"
#include "tdq/trainer.hpp"

namespace tdq::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int exit_code(ErrorKind kind) noexcept;

inline constexpr std::size_t kDefaultUniversalThreshold = 10;
inline constexpr std::size_t kDefaultSynthPairs = 2000;

struct LexiconPaths {
  std::string interrogatives;  // empty: builtin
  std::string content;         // empty: builtin
  std::string patterns;        // empty: builtin

  corpus::TypeLexicons lexicons() const;
  eval::PatternRules pattern_rules() const;
};

// ---------------------------------------------------------------------------
// synth / distill / pmi-build

void cmd_synth(std::uint64_t seed, std::size_t n, const std::string& out);

struct DistillStats {
  std::size_t read = 0;
  std::size_t kept = 0;
  std::size_t dropped_nonquestion = 0;
  std::size_t dropped_universal = 0;
  std::size_t skipped_lines = 0;

  std::string line() const;
};

std::vector<corpus::CorpusPair> distill(std::span<const corpus::CorpusPair> pairs,
                                        const corpus::TypeLexicons& lexicons,
                                        std::size_t threshold, DistillStats& stats);

DistillStats cmd_distill(const std::string& in, const std::string& out,
                         const corpus::TypeLexicons& lexicons,
                         std::size_t threshold = kDefaultUniversalThreshold);

pmi::PmiTable cmd_pmi_build(const std::string& corpus_path, const std::string& out,
                            std::uint64_t min_count = 1, const std::string& tsv_out = {});

// ---------------------------------------------------------------------------
// train

// Writes best.ckpt, train_report.csv and resolved_config.toml into out_dir.
train::Trained cmd_train(model::Variant variant, const std::string& corpus_path,
                         const std::string& pmi_path, train::TrainConfig config,
                         const std::string& out_dir, const corpus::TypeLexicons& lexicons,
                         std::ostream& log);

// ---------------------------------------------------------------------------
// generate / eval / repl

struct Session {
  train::Checkpoint checkpoint;
  std::optional<pmi::PmiTable> pmi;
  corpus::TypeLexicons lexicons;

  static Session open(const std::string& checkpoint_path, const std::string& pmi_path,
                      corpus::TypeLexicons lexicons);
  eval::DecodingContext context() const;
};

// Prints the question, the predicted topics and optionally the trace table.
void print_generation(std::ostream& out, const Session& s, const eval::Generation& g,
                      bool trace);

eval::Evaluation cmd_eval(const Session& session, const std::string& corpus_path,
                          const eval::PatternRules& rules, const eval::GenerateOptions& options,
                          const std::string& report_path, const std::string& details_path);

// Reads one post per line until EOF. Blank or unusable lines produce a warning
// on `err` and the loop continues. Returns the number of posts answered.
std::size_t cmd_repl(const Session& session, std::istream& in, std::ostream& out,
                     std::ostream& err, bool trace, const eval::GenerateOptions& options = {});

// ---------------------------------------------------------------------------
// pipeline

struct PipelineOptions {
  std::uint64_t seed = 7;
  std::string workdir;
  std::size_t n_pairs = kDefaultSynthPairs;
  double test_fraction = 0.1;
  std::uint64_t pmi_min_count = 1;
  std::size_t universal_threshold = kDefaultUniversalThreshold;
  train::TrainConfig train;  // seed is replaced by one derived from `seed`
  std::vector<model::Variant> variants = {model::Variant::Plain, model::Variant::Soft,
                                          model::Variant::Hard};
  LexiconPaths lexicon_paths;
};

struct PipelineVariantResult {
  model::Variant variant;
  train::TrainReport train;
  eval::MetricReport metrics;
  double ended_fraction = 0.0;
};

struct PipelineResult {
  std::vector<PipelineVariantResult> variants;
  DistillStats distill;
  std::string comparison_path;
};

// synth -> distill -> split -> pmi-build -> train each variant -> eval each
// -> comparison.md. A failing stage aborts with its name.
PipelineResult cmd_pipeline(const PipelineOptions& options, std::ostream& log);

std::string comparison_table(std::span<const PipelineVariantResult> results);

}  // namespace tdq::cli
