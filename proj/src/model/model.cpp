#include "tdq/model.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>

#include "tdq/error.hpp"

namespace tdq::model {

namespace {

constexpr double kMaskedScore = -1e30;
constexpr double kUnderflowFloor = 1e-12;
constexpr double kGumbelClamp = 1e-12;

std::atomic<std::uint64_t> g_gumbel_clamps{0};

GruLayer make_layer(std::size_t in, std::size_t h) {
  return GruLayer{Tensor::zeros({in, 3 * h}, true), Tensor::zeros({h, 2 * h}, true),
                  Tensor::zeros({h, h}, true), Tensor::zeros({1, 3 * h}, true)};
}

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.mutable_values()) v = rng.uniform(-bound, bound);
}

Tensor column(std::span<const double> values) {
  return Tensor::from({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return tape.add(a, tape.scale(b, -1.0));
}

}  // namespace

const char* to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Plain: return "PLAIN";
    case Variant::Soft: return "STD";
    case Variant::Hard: return "HTD";
  }
  return "UNKNOWN";
}

Variant parse_variant(std::string_view text) {
  std::string s(text);
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (s == "PLAIN" || s == "SEQ2SEQ") return Variant::Plain;
  if (s == "STD" || s == "SOFT") return Variant::Soft;
  if (s == "HTD" || s == "HARD") return Variant::Hard;
  fail(ErrorKind::Usage, "unknown variant '" + std::string(text) + "' (expected plain, std or htd)");
}

// ---------------------------------------------------------------------------
// Parameters

ModelParams::ModelParams(Variant variant, Hyper hyper) : variant_(variant), hyper_(hyper) {
  if (hyper.vocab_size == 0 || hyper.d_emb == 0 || hyper.d_hidden == 0 ||
      hyper.layers == 0) {
    fail(ErrorKind::InvalidInput, "model dimensions must be positive");
  }
  const std::size_t v = hyper.vocab_size, e = hyper.d_emb, h = hyper.d_hidden;
  embedding = Tensor::zeros({v, e}, true);
  for (std::size_t l = 0; l < hyper.layers; ++l) {
    encoder.push_back(make_layer(l == 0 ? e : h, h));
    decoder.push_back(make_layer(l == 0 ? e + h : h, h));
  }
  attn_query = Tensor::zeros({h, h}, true);
  attn_key = Tensor::zeros({h, h}, true);
  attn_score = Tensor::zeros({h, 1}, true);
  if (variant == Variant::Plain || variant == Variant::Hard) {
    out_w = Tensor::zeros({h, v}, true);
    out_b = Tensor::zeros({1, v}, true);
  }
  if (variant == Variant::Soft || variant == Variant::Hard) {
    type_w = Tensor::zeros({h, kNumTypes}, true);
    type_b = Tensor::zeros({1, kNumTypes}, true);
  }
  if (variant == Variant::Soft) {
    for (std::size_t i = 0; i < kNumTypes; ++i) {
      typed_w[i] = Tensor::zeros({h, v}, true);
      typed_b[i] = Tensor::zeros({1, v}, true);
    }
  }
}

void ModelParams::init_uniform(Rng& rng) {
  for (auto& [name, t] : named()) {
    if (name == "embedding") {
      fill_uniform(t, 0.1, rng);
    } else if (t.rows() > 1) {
      fill_uniform(t, 1.0 / std::sqrt(static_cast<double>(t.rows())), rng);
    } else {
      std::fill(t.mutable_values().begin(), t.mutable_values().end(), 0.0);
    }
  }
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embedding", embedding);
  auto add_stack = [&](const char* prefix, const std::vector<GruLayer>& stack) {
    for (std::size_t l = 0; l < stack.size(); ++l) {
      const std::string p = std::string(prefix) + "." + std::to_string(l) + ".";
      out.emplace_back(p + "w_input", stack[l].w_input);
      out.emplace_back(p + "u_gates", stack[l].u_gates);
      out.emplace_back(p + "u_cand", stack[l].u_cand);
      out.emplace_back(p + "bias", stack[l].bias);
    }
  };
  add_stack("encoder", encoder);
  add_stack("decoder", decoder);
  out.emplace_back("attn.query", attn_query);
  out.emplace_back("attn.key", attn_key);
  out.emplace_back("attn.score", attn_score);
  if (out_w.defined()) {
    out.emplace_back("out.w", out_w);
    out.emplace_back("out.b", out_b);
  }
  if (type_w.defined()) {
    out.emplace_back("type.w", type_w);
    out.emplace_back("type.b", type_b);
  }
  for (std::size_t i = 0; i < kNumTypes; ++i) {
    if (!typed_w[i].defined()) continue;
    out.emplace_back("typed." + std::to_string(i) + ".w", typed_w[i]);
    out.emplace_back("typed." + std::to_string(i) + ".b", typed_b[i]);
  }
  return out;
}

std::vector<Tensor> ModelParams::trainable() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Recurrence

Tensor gru_cell(Tape& tape, const GruLayer& layer, const Tensor& x, const Tensor& h) {
  const std::size_t hd = layer.u_cand.rows();
  Tensor gx = tape.add_bias(tape.matmul(x, layer.w_input), layer.bias);
  Tensor gh = tape.matmul(h, layer.u_gates);
  Tensor reset = tape.sigmoid(tape.add(tape.slice_cols(gx, 0, hd), tape.slice_cols(gh, 0, hd)));
  Tensor update = tape.sigmoid(tape.add(tape.slice_cols(gx, hd, hd), tape.slice_cols(gh, hd, hd)));
  Tensor cand = tape.tanh(
      tape.add(tape.slice_cols(gx, 2 * hd, hd), tape.matmul(tape.mul(reset, h), layer.u_cand)));
  // (1 - z) * h + z * cand
  return tape.add(h, tape.mul(update, sub(tape, cand, h)));
}

EncoderOutput encode_batch(Tape& tape, const ModelParams& params,
                           std::span<const std::vector<std::size_t>> posts) {
  if (posts.empty()) fail(ErrorKind::InvalidInput, "encode: empty batch");
  const std::size_t batch = posts.size();
  const std::size_t hd = params.hyper().d_hidden;
  const std::size_t vocab = params.hyper().vocab_size;
  std::size_t longest = 0;
  for (const auto& p : posts) {
    if (p.empty()) fail(ErrorKind::InvalidInput, "encode: empty post");
    for (std::size_t id : p) {
      if (id >= vocab) fail(ErrorKind::Range, "encode: token id " + std::to_string(id) + " out of range");
    }
    longest = std::max(longest, p.size());
  }
  const bool ragged = std::any_of(posts.begin(), posts.end(),
                                  [longest](const auto& p) { return p.size() != longest; });

  EncoderOutput out;
  std::vector<Tensor> state(params.hyper().layers, Tensor::zeros({batch, hd}));
  std::vector<std::size_t> ids(batch);
  std::vector<double> valid(batch);
  for (std::size_t t = 0; t < longest; ++t) {
    bool padded = false;
    for (std::size_t b = 0; b < batch; ++b) {
      const bool real = t < posts[b].size();
      ids[b] = real ? posts[b][t] : corpus::kPadId;
      valid[b] = real ? 1.0 : 0.0;
      padded = padded || !real;
    }
    Tensor input = tape.gather_rows(params.embedding, ids);
    const Tensor keep = padded ? column(valid) : Tensor();
    for (std::size_t l = 0; l < state.size(); ++l) {
      Tensor next = gru_cell(tape, params.encoder[l], input, state[l]);
      if (padded) next = tape.add(state[l], tape.mul_col(sub(tape, next, state[l]), keep));
      state[l] = next;
      input = next;
    }
    out.states.push_back(state.back());
    out.keys.push_back(tape.matmul(state.back(), params.attn_key));
  }
  out.final_states = state;
  if (ragged) {
    std::vector<double> bias(batch * longest, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = posts[b].size(); t < longest; ++t) bias[b * longest + t] = kMaskedScore;
    }
    out.mask_bias = Tensor::from({batch, longest}, std::move(bias));
  }
  return out;
}

EncoderOutput encode(Tape& tape, const ModelParams& params, std::span<const std::size_t> post) {
  const std::vector<std::size_t> one(post.begin(), post.end());
  return encode_batch(tape, params, std::span(&one, 1));
}

Attention attend(Tape& tape, const ModelParams& params, const Tensor& s_prev,
                 const EncoderOutput& enc) {
  if (enc.length() == 0) fail(ErrorKind::InvalidInput, "attend: empty encoder output");
  const Tensor query = tape.matmul(s_prev, params.attn_query);
  std::vector<Tensor> scores;
  scores.reserve(enc.length());
  for (const Tensor& key : enc.keys) {
    scores.push_back(tape.matmul(tape.tanh(tape.add(query, key)), params.attn_score));
  }
  Tensor logits = tape.concat_cols(scores);
  if (enc.mask_bias.defined()) logits = tape.add(logits, enc.mask_bias);
  Attention out;
  out.weights = tape.softmax_rows(logits);
  for (std::size_t i = 0; i < enc.length(); ++i) {
    Tensor term = tape.mul_col(enc.states[i], tape.slice_cols(out.weights, i, 1));
    out.context = i == 0 ? term : tape.add(out.context, term);
  }
  return out;
}

std::vector<Tensor> decoder_step(Tape& tape, const ModelParams& params,
                                 std::span<const Tensor> s_prev,
                                 std::span<const std::size_t> y_prev, const Tensor& context) {
  if (s_prev.size() != params.decoder.size()) {
    fail(ErrorKind::Shape, "decoder_step: expected one state per decoder layer");
  }
  for (std::size_t id : y_prev) {
    if (id >= params.hyper().vocab_size) {
      fail(ErrorKind::Range, "decoder_step: token id " + std::to_string(id) + " out of range");
    }
  }
  const Tensor parts[] = {tape.gather_rows(params.embedding, y_prev), context};
  Tensor input = tape.concat_cols(parts);
  std::vector<Tensor> next;
  next.reserve(s_prev.size());
  for (std::size_t l = 0; l < s_prev.size(); ++l) {
    input = gru_cell(tape, params.decoder[l], input, s_prev[l]);
    next.push_back(input);
  }
  return next;
}

// ---------------------------------------------------------------------------
// Heads

Tensor type_logits(Tape& tape, const ModelParams& params, const Tensor& s) {
  if (!params.type_w.defined()) fail(ErrorKind::State, "variant has no type projection");
  return tape.add_bias(tape.matmul(s, params.type_w), params.type_b);
}

Tensor type_dist(Tape& tape, const ModelParams& params, const Tensor& s) {
  return tape.softmax_rows(type_logits(tape, params, s));
}

Tensor std_type_dist(Tape& tape, const ModelParams& params, const Tensor& s) {
  if (params.variant() != Variant::Soft) fail(ErrorKind::State, "std_type_dist needs the STD variant");
  return type_dist(tape, params, s);
}

Tensor std_generation_dist(Tape& tape, const ModelParams& params, const Tensor& s,
                           const Tensor& type_distribution) {
  if (params.variant() != Variant::Soft) {
    fail(ErrorKind::State, "std_generation_dist needs the STD variant");
  }
  Tensor mixture;
  for (std::size_t i = 0; i < kNumTypes; ++i) {
    Tensor specific = tape.softmax_rows(
        tape.add_bias(tape.matmul(s, params.typed_w[i]), params.typed_b[i]));
    Tensor term = tape.mul_col(specific, tape.slice_cols(type_distribution, i, 1));
    mixture = i == 0 ? term : tape.add(mixture, term);
  }
  return mixture;
}

Tensor std_generation_dist(Tape& tape, const ModelParams& params, const Tensor& s) {
  return std_generation_dist(tape, params, s, std_type_dist(tape, params, s));
}

Tensor plain_generation_dist(Tape& tape, const ModelParams& params, const Tensor& s) {
  if (params.variant() != Variant::Plain) fail(ErrorKind::State, "plain head needs the PLAIN variant");
  return tape.softmax_rows(tape.add_bias(tape.matmul(s, params.out_w), params.out_b));
}

// ---------------------------------------------------------------------------
// Hard typed decoding

std::array<std::size_t, kNumTypes> TypePartition::counts() const {
  std::array<std::size_t, kNumTypes> c{};
  for (WordType t : types) ++c[static_cast<std::size_t>(t)];
  return c;
}

TypePartition make_partition(std::size_t vocab_size,
                             std::span<const std::size_t> interrogative_ids,
                             std::span<const std::size_t> topic_ids) {
  TypePartition p;
  p.types.assign(vocab_size, WordType::Ordinary);
  for (std::size_t id : topic_ids) {
    if (id >= vocab_size) fail(ErrorKind::Range, "topic id outside vocabulary");
    p.types[id] = WordType::Topic;
  }
  for (std::size_t id : interrogative_ids) {
    if (id >= vocab_size) fail(ErrorKind::Range, "interrogative id outside vocabulary");
    p.types[id] = WordType::Interrogative;
  }
  return p;
}

std::vector<std::size_t> interrogative_ids(const corpus::Vocabulary& vocab,
                                           const corpus::TypeLexicons& lex) {
  std::vector<std::size_t> ids;
  for (const std::string& token : lex.interrogative_tokens()) {
    if (vocab.contains(token)) ids.push_back(vocab.id_of(token));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

TypePartition training_partition(const corpus::Vocabulary& vocab, const corpus::TypeLexicons& lex,
                                  std::span<const std::size_t> response_ids,
                                  std::span<const WordType> response_types) {
  std::vector<std::size_t> topics;
  for (std::size_t i = 0; i < response_ids.size() && i < response_types.size(); ++i) {
    if (response_types[i] == WordType::Topic && response_ids[i] >= corpus::kNumReserved) {
      topics.push_back(response_ids[i]);
    }
  }
  return make_partition(vocab.size(), interrogative_ids(vocab, lex), topics);
}

std::vector<double> gumbel_softmax(std::span<const double> pi, double tau,
                                   std::span<const double> noise) {
  if (pi.empty() || pi.size() != noise.size()) {
    fail(ErrorKind::InvalidInput, "gumbel_softmax: probability and noise sizes differ");
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::InvalidInput, "gumbel_softmax: tau must be positive");
  std::vector<double> z(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    double p = pi[i];
    if (!(p > 0.0)) {
      g_gumbel_clamps.fetch_add(1, std::memory_order_relaxed);
      p = kGumbelClamp;
    }
    z[i] = (std::log(p) + noise[i]) / tau;
  }
  return tensor::softmax(z);
}

std::uint64_t gumbel_clamp_count() noexcept { return g_gumbel_clamps.load(); }

std::array<Tensor, kNumTypes> partition_masks(std::span<const TypePartition> partitions,
                                              std::size_t vocab_size) {
  const std::size_t batch = partitions.size();
  std::array<std::vector<double>, kNumTypes> buf;
  for (auto& b : buf) b.assign(batch * vocab_size, 0.0);
  for (std::size_t r = 0; r < batch; ++r) {
    if (partitions[r].types.size() != vocab_size) {
      fail(ErrorKind::Shape, "partition does not cover the vocabulary");
    }
    for (std::size_t v = 0; v < vocab_size; ++v) {
      buf[static_cast<std::size_t>(partitions[r].types[v])][r * vocab_size + v] = 1.0;
    }
  }
  std::array<Tensor, kNumTypes> masks;
  for (std::size_t c = 0; c < kNumTypes; ++c) {
    masks[c] = Tensor::from({batch, vocab_size}, std::move(buf[c]));
  }
  return masks;
}

HtdStep htd_step(Tape& tape, const ModelParams& params, const Tensor& s,
                 const std::array<Tensor, kNumTypes>& masks, double tau, Rng* rng, Mode mode,
                 std::size_t step) {
  if (params.variant() != Variant::Hard) fail(ErrorKind::State, "htd_step needs the HTD variant");
  if (!(tau > 0.0 && tau <= 1.0)) fail(ErrorKind::InvalidInput, "htd_step: tau must lie in (0, 1]");
  const std::size_t batch = s.rows();
  HtdStep out;
  Tensor log_p =
      tape.log_softmax_rows(tape.add_bias(tape.matmul(s, params.out_w), params.out_b));
  Tensor logits = type_logits(tape, params, s);
  out.type_dist = tape.softmax_rows(logits);
  out.log_type = tape.log_softmax_rows(logits);
  Tensor perturbed = out.log_type;
  if (mode == Mode::Train) {
    if (rng == nullptr) fail(ErrorKind::InvalidInput, "htd_step: training mode needs an RNG");
    std::vector<double> noise(batch * kNumTypes);
    for (double& g : noise) g = rng->gumbel();
    perturbed = tape.add(perturbed, Tensor::from({batch, kNumTypes}, std::move(noise)));
  }
  Tensor log_gs = tape.log_softmax_rows(tape.scale(perturbed, 1.0 / tau));
  Tensor log_mask;
  for (std::size_t c = 0; c < kNumTypes; ++c) {
    Tensor term = tape.mul_col(masks[c], tape.slice_cols(log_gs, c, 1));
    log_mask = c == 0 ? term : tape.add(log_mask, term);
  }
  out.log_modulated = tape.add(log_p, log_mask);
  out.log_norm = tape.logsumexp_rows(out.log_modulated);
  for (double z : out.log_norm.values()) {
    if (z < std::log(kUnderflowFloor)) {
      fail(ErrorKind::Underflow, "typed mask removed all probability mass at decoding step " +
                                     std::to_string(step));
    }
  }
  return out;
}

Tensor htd_final_dist(Tape& tape, const HtdStep& step) {
  // softmax(log P') = P' / sum P'
  return tape.softmax_rows(step.log_modulated);
}

Tensor htd_step_dist(Tape& tape, const ModelParams& params, const Tensor& s,
                     const TypePartition& partition, double tau, Rng* rng, Mode mode,
                     std::size_t step) {
  std::vector<TypePartition> parts(s.rows(), partition);
  const auto masks = partition_masks(parts, params.hyper().vocab_size);
  return htd_final_dist(tape, htd_step(tape, params, s, masks, tau, rng, mode, step));
}

// ---------------------------------------------------------------------------
// Loss

EncodedPair encode_pair(const corpus::CorpusPair& pair, const corpus::Vocabulary& vocab,
                        const corpus::TypeLexicons& lex, Variant variant) {
  const corpus::CorpusPair typed = pair.typed() ? pair : corpus::tag_pair(pair, lex);
  EncodedPair out;
  out.post = vocab.encode(typed.post);
  out.response = vocab.encode(typed.response);
  out.types = typed.response_types;
  for (std::size_t i = 0; i < out.response.size(); ++i) {
    if (out.response[i] == corpus::kUnkId) out.types[i] = WordType::Ordinary;
  }
  if (variant == Variant::Hard) {
    out.partition = training_partition(vocab, lex, out.response, out.types);
  }
  return out;
}

LossResult batch_loss(Tape& tape, const ModelParams& params, std::span<const EncodedPair> batch,
                      const LossOptions& options) {
  if (batch.empty()) fail(ErrorKind::InvalidInput, "loss: empty batch");
  const Variant variant = params.variant();
  const std::size_t n = batch.size();
  const std::size_t vocab = params.hyper().vocab_size;

  std::vector<std::vector<std::size_t>> posts;
  std::size_t longest = 0;
  LossResult result;
  for (const EncodedPair& p : batch) {
    if (p.response.empty() || p.types.size() != p.response.size()) {
      fail(ErrorKind::InvalidInput, "loss: response and type sequences must align");
    }
    for (std::size_t id : p.response) {
      if (id >= vocab) fail(ErrorKind::Range, "loss: reference token outside the vocabulary");
    }
    posts.push_back(p.post);
    longest = std::max(longest, p.response.size());
    result.tokens += p.response.size();
  }

  std::array<Tensor, kNumTypes> masks;
  if (variant == Variant::Hard) {
    std::vector<TypePartition> parts;
    for (const EncodedPair& p : batch) parts.push_back(p.partition);
    masks = partition_masks(parts, vocab);
  }

  const EncoderOutput enc = encode_batch(tape, params, posts);
  std::vector<Tensor> state = enc.final_states;
  Tensor word_ll, type_ll;
  std::vector<std::size_t> prev(n), target(n), ty(n);
  std::vector<double> weight(n);
  for (std::size_t t = 0; t < longest; ++t) {
    bool padded = false;
    for (std::size_t b = 0; b < n; ++b) {
      const auto& resp = batch[b].response;
      const bool real = t < resp.size();
      prev[b] = t == 0 ? corpus::kBosId : (t - 1 < resp.size() ? resp[t - 1] : corpus::kPadId);
      target[b] = real ? resp[t] : corpus::kPadId;
      ty[b] = real ? static_cast<std::size_t>(batch[b].types[t])
                   : static_cast<std::size_t>(WordType::Ordinary);
      weight[b] = real ? 1.0 : 0.0;
      padded = padded || !real;
    }
    const Attention att = attend(tape, params, state.back(), enc);
    state = decoder_step(tape, params, state, prev, att.context);
    const Tensor& s = state.back();

    Tensor word, type;
    switch (variant) {
      case Variant::Plain:
        word = tape.pick(tape.log_softmax_rows(tape.add_bias(tape.matmul(s, params.out_w), params.out_b)),
                         target);
        break;
      case Variant::Soft: {
        Tensor log_pi = tape.log_softmax_rows(type_logits(tape, params, s));
        std::vector<Tensor> parts;
        for (std::size_t i = 0; i < kNumTypes; ++i) {
          Tensor lp = tape.pick(tape.log_softmax_rows(tape.add_bias(
                                    tape.matmul(s, params.typed_w[i]), params.typed_b[i])),
                                target);
          parts.push_back(tape.add(lp, tape.slice_cols(log_pi, i, 1)));
        }
        word = tape.logsumexp_rows(tape.concat_cols(parts));
        type = tape.pick(log_pi, ty);
        break;
      }
      case Variant::Hard: {
        const HtdStep step = htd_step(tape, params, s, masks, options.tau, options.rng,
                                      options.mode, t);
        word = tape.add(tape.pick(step.log_modulated, target), tape.scale(step.log_norm, -1.0));
        type = tape.pick(step.log_type, ty);
        break;
      }
    }
    if (padded) {
      const Tensor w = column(weight);
      word = tape.mul(word, w);
      if (type.defined()) type = tape.mul(type, w);
    }
    word_ll = t == 0 ? word : tape.add(word_ll, word);
    if (type.defined()) type_ll = t == 0 ? type : tape.add(type_ll, type);
  }

  Tensor phi1 = tape.scale(tape.sum(word_ll), -1.0);
  result.phi1 = phi1.item();
  if (variant == Variant::Plain) {
    result.total = phi1;
    return result;
  }
  Tensor phi2 = tape.scale(tape.sum(type_ll), -1.0);
  result.phi2 = phi2.item();
  result.total = tape.add(phi1, tape.scale(phi2, options.lambda));
  return result;
}

LossResult loss(Tape& tape, const ModelParams& params, const EncodedPair& pair,
                const LossOptions& options) {
  return batch_loss(tape, params, std::span(&pair, 1), options);
}

}  // namespace tdq::model
