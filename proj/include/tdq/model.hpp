#pragma once

// GRU encoder-decoder with additive attention and three output heads:
//
//   Plain  single softmax over the vocabulary (typing disabled)
//   Soft   type distribution mixing three type-specific softmaxes
//   Hard   one softmax modulated by a Gumbel-Softmax type mask over a
//          per-example partition of the vocabulary, then renormalised
//
// All computations run on a tensor::Tape with batch-major [B, d] rows, so the
// same code path serves training batches and single-post inference (B = 1).

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tdq/corpus.hpp"
#include "tdq/rng.hpp"
#include "tdq/tensor.hpp"

namespace tdq::model {

using tensor::Tape;
using tensor::Tensor;
using corpus::WordType;

inline constexpr std::size_t kNumTypes = corpus::kNumTypes;

enum class Variant : std::uint8_t { Plain = 0, Soft = 1, Hard = 2 };

// "PLAIN", "STD", "HTD"
const char* to_string(Variant v) noexcept;
// Accepts the tags above in either case, plus "plain"/"std"/"htd".
Variant parse_variant(std::string_view text);

struct Hyper {
  std::size_t vocab_size = 0;
  std::size_t d_emb = 64;
  std::size_t d_hidden = 128;
  std::size_t layers = 2;

  bool operator==(const Hyper&) const = default;
};

struct GruLayer {
  Tensor w_input;  // [in, 3h]  columns: reset | update | candidate
  Tensor u_gates;  // [h, 2h]   reset | update
  Tensor u_cand;   // [h, h]
  Tensor bias;     // [1, 3h]
};

class ModelParams {
 public:
  // All weights zero.
  ModelParams(Variant variant, Hyper hyper);

  // Uniform initialisation: embeddings in +-0.1, matrices in +-1/sqrt(fan_in),
  // biases zero.
  void init_uniform(Rng& rng);

  Variant variant() const noexcept { return variant_; }
  const Hyper& hyper() const noexcept { return hyper_; }

  // Every parameter in a fixed order, with stable names used by checkpoints.
  std::vector<std::pair<std::string, Tensor>> named() const;
  std::vector<Tensor> trainable() const;

  Tensor embedding;                 // [V, d_emb]
  std::vector<GruLayer> encoder;    // layer 0 input d_emb
  std::vector<GruLayer> decoder;    // layer 0 input d_emb + h
  Tensor attn_query;                // [h, h]   applied to s_{t-1}
  Tensor attn_key;                  // [h, h]   applied to h_i
  Tensor attn_score;                // [h, 1]
  Tensor out_w, out_b;              // Plain, Hard: [h, V], [1, V]
  Tensor type_w, type_b;            // Soft, Hard:  [h, 3], [1, 3]
  std::array<Tensor, kNumTypes> typed_w, typed_b;  // Soft: [h, V], [1, V]

 private:
  Variant variant_;
  Hyper hyper_;
};

// ---------------------------------------------------------------------------
// Encoder / attention / decoder state

// One GRU step for a batch: x [B, in], h [B, hidden] -> [B, hidden].
Tensor gru_cell(Tape& tape, const GruLayer& layer, const Tensor& x, const Tensor& h);

struct EncoderOutput {
  std::vector<Tensor> states;        // top layer per position, each [B, h]
  std::vector<Tensor> final_states;  // per layer [B, h]
  std::vector<Tensor> keys;          // attn_key projection of each state
  Tensor mask_bias;                  // [B, m] additive mask; undefined if unpadded
  std::size_t length() const noexcept { return states.size(); }
};

// Time-major ids: posts[b] is example b's post. Shorter posts are padded and
// their states held at the last real position.
EncoderOutput encode_batch(Tape& tape, const ModelParams& params,
                           std::span<const std::vector<std::size_t>> posts);
EncoderOutput encode(Tape& tape, const ModelParams& params,
                     std::span<const std::size_t> post);

struct Attention {
  Tensor context;  // [B, h]
  Tensor weights;  // [B, m]
};

Attention attend(Tape& tape, const ModelParams& params, const Tensor& s_prev,
                 const EncoderOutput& enc);

// Input to layer 0 is [e(y_prev); context]. Returns the new per-layer states.
std::vector<Tensor> decoder_step(Tape& tape, const ModelParams& params,
                                 std::span<const Tensor> s_prev,
                                 std::span<const std::size_t> y_prev,
                                 const Tensor& context);

// ---------------------------------------------------------------------------
// Output heads

Tensor type_logits(Tape& tape, const ModelParams& params, const Tensor& s);
// softmax(W s + b) over the three types. Soft and Hard variants.
Tensor type_dist(Tape& tape, const ModelParams& params, const Tensor& s);
Tensor std_type_dist(Tape& tape, const ModelParams& params, const Tensor& s);

// sum_i softmax(W_ci s + b_ci) * type_dist[:, i]
Tensor std_generation_dist(Tape& tape, const ModelParams& params, const Tensor& s,
                           const Tensor& type_distribution);
Tensor std_generation_dist(Tape& tape, const ModelParams& params, const Tensor& s);

// Plain single softmax.
Tensor plain_generation_dist(Tape& tape, const ModelParams& params, const Tensor& s);

// ---------------------------------------------------------------------------
// Hard typed decoding

struct TypePartition {
  std::vector<WordType> types;  // one per vocabulary id

  std::array<std::size_t, kNumTypes> counts() const;
  WordType type_of(std::size_t id) const { return types.at(id); }
};

// Interrogative > Topic > Ordinary on overlap. Ids must be < vocab_size.
TypePartition make_partition(std::size_t vocab_size,
                             std::span<const std::size_t> interrogative_ids,
                             std::span<const std::size_t> topic_ids);

// Vocabulary ids of every interrogative token present in the vocabulary.
std::vector<std::size_t> interrogative_ids(const corpus::Vocabulary& vocab,
                                           const corpus::TypeLexicons& lex);

// Training-time partition: topics are the reference response's Topic tokens.
TypePartition training_partition(const corpus::Vocabulary& vocab,
                                 const corpus::TypeLexicons& lex,
                                 std::span<const std::size_t> response_ids,
                                 std::span<const WordType> response_types);

// exp((log pi_i + g_i) / tau) normalised. Zero entries of pi are clamped to
// 1e-12 and counted in gumbel_clamp_count().
std::vector<double> gumbel_softmax(std::span<const double> pi, double tau,
                                   std::span<const double> noise);
std::uint64_t gumbel_clamp_count() noexcept;

enum class Mode { Train, Infer };

// One-hot masks of a batch of partitions: entry c is [B, V] with 1 where the
// word's type is c.
std::array<Tensor, kNumTypes> partition_masks(std::span<const TypePartition> partitions,
                                              std::size_t vocab_size);

struct HtdStep {
  Tensor type_dist;     // pi, [B, 3]
  Tensor log_type;      // log pi
  Tensor log_modulated; // log P' = log P + log GS(pi)_{c(y)}, [B, V]
  Tensor log_norm;      // log sum_y P'(y), [B, 1]
};

// Gumbel noise is drawn from `rng` in Train mode and is zero in Infer mode.
// Throws Underflow naming `step` when sum P' < 1e-12 for some row.
HtdStep htd_step(Tape& tape, const ModelParams& params, const Tensor& s,
                 const std::array<Tensor, kNumTypes>& masks, double tau,
                 Rng* rng, Mode mode, std::size_t step = 0);

// Final distribution P* (rows sum to 1).
Tensor htd_final_dist(Tape& tape, const HtdStep& step);

// Convenience for a single state and partition.
Tensor htd_step_dist(Tape& tape, const ModelParams& params, const Tensor& s,
                     const TypePartition& partition, double tau, Rng* rng, Mode mode,
                     std::size_t step = 0);

// ---------------------------------------------------------------------------
// Loss

struct EncodedPair {
  std::vector<std::size_t> post;
  std::vector<std::size_t> response;  // ends with EOS
  std::vector<WordType> types;        // same length as response
  TypePartition partition;            // Hard variant only
};

// Maps tokens to ids; out-of-vocabulary tokens become UNK typed Ordinary.
EncodedPair encode_pair(const corpus::CorpusPair& pair, const corpus::Vocabulary& vocab,
                        const corpus::TypeLexicons& lex, Variant variant);

struct LossOptions {
  double lambda = 0.8;
  double tau = 0.6;
  Mode mode = Mode::Train;
  Rng* rng = nullptr;  // required for Hard + Train
};

struct LossResult {
  Tensor total;        // Phi = Phi1 + lambda * Phi2, summed over the batch
  double phi1 = 0.0;
  double phi2 = 0.0;
  std::size_t tokens = 0;
};

// Teacher-forced loss over a batch; PAD positions contribute zero.
LossResult batch_loss(Tape& tape, const ModelParams& params,
                      std::span<const EncodedPair> batch, const LossOptions& options);

LossResult loss(Tape& tape, const ModelParams& params, const EncodedPair& pair,
                const LossOptions& options);

}  // namespace tdq::model
