#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdq/corpus.hpp"
#include "tdq/model.hpp"

namespace tdq::train {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  double lambda = 0.8;
  double tau_initial = 0.6;
  double tau_final = 0.8;
  std::uint64_t tau_switch_step = 1000;  // optimizer steps
  std::uint64_t seed = 7;
  std::string checkpoint_dir;            // empty: keep the best model in memory only
  double validation_fraction = 0.1;
  std::size_t patience = 5;              // epochs without validation improvement
  std::size_t vocab_cap = 5000;
  std::size_t d_emb = 64;
  std::size_t d_hidden = 128;
  std::size_t layers = 2;

  // Throws InvalidInput when a field is out of range.
  void validate() const;
};

// tau_initial before tau_switch_step, tau_final from it onwards.
double tau_at(const TrainConfig& config, std::uint64_t step);

struct EpochRow {
  std::size_t epoch = 0;         // 1-based
  double phi = 0.0;              // mean per training pair
  double phi1 = 0.0;
  double phi2 = 0.0;
  double valid_perplexity = 0.0;
  double tau = 0.0;              // tau in force at the end of the epoch
  std::uint64_t steps = 0;       // optimizer steps so far
  double seconds = 0.0;          // wall time, excluded from the CSV
};

struct TrainReport {
  std::vector<EpochRow> epochs;
  std::size_t best_epoch = 0;
  double best_valid_perplexity = 0.0;
  std::string best_checkpoint;
  bool stopped_early = false;

  // Deterministic columns only (no wall time).
  void write_csv(std::ostream& os) const;
};

struct Trained {
  model::ModelParams params;  // best by validation perplexity
  corpus::Vocabulary vocab;
  TrainReport report;
};

using EpochLogger = std::function<void(const EpochRow&)>;

// Shuffles per epoch under the seed, pads batches, masks PAD, early-stops on
// validation perplexity and writes best.ckpt into checkpoint_dir when set.
// Throws Numeric on a non-finite loss with the offending step.
Trained train(const TrainConfig& config, model::Variant variant,
              std::span<const corpus::CorpusPair> corpus, const corpus::TypeLexicons& lexicons,
              const EpochLogger& log = {});

// Deterministic split used by train(): returns {train, validation}.
std::pair<std::vector<corpus::CorpusPair>, std::vector<corpus::CorpusPair>> split_validation(
    std::span<const corpus::CorpusPair> corpus, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (little-endian): magic "TDQCKPT\1", u32 format version, u32 variant
// tag, u64 x 5 hyperparameters (vocab, d_emb, d_hidden, layers, k), u64
// vocabulary size + length-prefixed tokens, u32 tensor count, then per tensor
// a length-prefixed name and a tensor block, then the end magic "TDQEND\0\0".

struct Checkpoint {
  model::ModelParams params;
  corpus::Vocabulary vocab;
};

void write_checkpoint(std::ostream& os, const model::ModelParams& params,
                      const corpus::Vocabulary& vocab);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, const model::ModelParams& params,
                     const corpus::Vocabulary& vocab);
Checkpoint load_checkpoint(const std::string& path);
// Also rejects a variant or hyperparameter mismatch.
Checkpoint load_checkpoint(const std::string& path, model::Variant expected,
                           const std::optional<model::Hyper>& expected_hyper = std::nullopt);

}  // namespace tdq::train
