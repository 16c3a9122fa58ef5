#include "tdq/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>

#include "tdq/binary_io.hpp"
#include "tdq/error.hpp"
#include "tdq/evalgen.hpp"
#include "tdq/optimizer.hpp"
#include "tdq/rng.hpp"
#include "tdq/tensor_io.hpp"

namespace tdq::train {

namespace {

constexpr char kCheckpointMagic[9] = "TDQCKPT\1";
constexpr char kCheckpointEnd[9] = "TDQEND\0\0";
constexpr std::uint32_t kCheckpointVersion = 1;

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

bool valid_tau(double t) { return std::isfinite(t) && t > 0.0 && t <= 1.0; }

model::ModelParams copy_params(const model::ModelParams& src) {
  model::ModelParams dst(src.variant(), src.hyper());
  auto from = src.named();
  auto to = dst.named();
  for (std::size_t i = 0; i < from.size(); ++i) {
    auto in = from[i].second.values();
    auto out = to[i].second.mutable_values();
    std::copy(in.begin(), in.end(), out.begin());
  }
  return dst;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) fail(ErrorKind::InvalidInput, "epochs must be positive");
  if (batch_size == 0) fail(ErrorKind::InvalidInput, "batch size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::InvalidInput, "learning rate must be a finite non-negative number");
  }
  if (!(clip_norm > 0.0)) fail(ErrorKind::InvalidInput, "clip norm must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorKind::InvalidInput, "lambda must be >= 0");
  if (!valid_tau(tau_initial) || !valid_tau(tau_final)) {
    fail(ErrorKind::InvalidInput, "tau values must lie in (0, 1]");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    fail(ErrorKind::InvalidInput, "validation fraction must lie in [0, 1)");
  }
  if (vocab_cap == 0) fail(ErrorKind::InvalidInput, "vocabulary cap must be positive");
  if (d_emb == 0 || d_hidden == 0 || layers == 0) {
    fail(ErrorKind::InvalidInput, "model dimensions must be positive");
  }
}

double tau_at(const TrainConfig& config, std::uint64_t step) {
  return step < config.tau_switch_step ? config.tau_initial : config.tau_final;
}

void TrainReport::write_csv(std::ostream& os) const {
  os << "epoch,phi,phi1,phi2,valid_perplexity,tau,steps,best\n";
  for (const EpochRow& r : epochs) {
    os << r.epoch << ',' << shortest(r.phi) << ',' << shortest(r.phi1) << ','
       << shortest(r.phi2) << ',' << shortest(r.valid_perplexity) << ',' << shortest(r.tau)
       << ',' << r.steps << ',' << (r.epoch == best_epoch ? 1 : 0) << '\n';
  }
}

std::pair<std::vector<corpus::CorpusPair>, std::vector<corpus::CorpusPair>> split_validation(
    std::span<const corpus::CorpusPair> corpus, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "validation-split"));
  shuffle(order, rng);
  std::size_t n_valid = static_cast<std::size_t>(std::floor(fraction * corpus.size()));
  if (n_valid >= corpus.size()) n_valid = corpus.size() - 1;
  std::pair<std::vector<corpus::CorpusPair>, std::vector<corpus::CorpusPair>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_valid ? out.second : out.first).push_back(corpus[order[i]]);
  }
  return out;
}

Trained train(const TrainConfig& config, model::Variant variant,
              std::span<const corpus::CorpusPair> corpus, const corpus::TypeLexicons& lexicons,
              const EpochLogger& log) {
  config.validate();
  if (corpus.empty()) fail(ErrorKind::InvalidInput, "training corpus is empty");

  std::vector<corpus::CorpusPair> typed;
  typed.reserve(corpus.size());
  for (const auto& p : corpus) typed.push_back(p.typed() ? p : corpus::tag_pair(p, lexicons));
  auto [train_pairs, valid_pairs] = split_validation(typed, config.validation_fraction, config.seed);

  corpus::Vocabulary vocab = corpus::build_vocab(train_pairs, config.vocab_cap);
  model::Hyper hyper{vocab.size(), config.d_emb, config.d_hidden, config.layers};
  model::ModelParams params(variant, hyper);
  Rng init_rng(derive_seed(config.seed, "init"));
  params.init_uniform(init_rng);

  auto encode_all = [&](const std::vector<corpus::CorpusPair>& pairs) {
    std::vector<model::EncodedPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(model::encode_pair(p, vocab, lexicons, variant));
    return out;
  };
  const std::vector<model::EncodedPair> train_set = encode_all(train_pairs);
  const std::vector<model::EncodedPair> valid_set =
      valid_pairs.empty() ? train_set : encode_all(valid_pairs);

  tensor::AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.learning_rate;
  adam_cfg.clip_norm = config.clip_norm;
  tensor::Adam optimizer(params.trainable(), adam_cfg);

  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  Rng noise_rng(derive_seed(config.seed, "gumbel"));

  Trained result{copy_params(params), vocab, {}};
  std::string best_path;
  if (!config.checkpoint_dir.empty()) {
    std::filesystem::create_directories(config.checkpoint_dir);
    best_path = (std::filesystem::path(config.checkpoint_dir) / "best.ckpt").string();
  }

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t since_best = 0;
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    shuffle(order, shuffle_rng);
    EpochRow row;
    row.epoch = epoch;
    double sum_phi = 0.0, sum_phi1 = 0.0, sum_phi2 = 0.0;
    std::vector<model::EncodedPair> batch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);

      model::LossOptions opts;
      opts.lambda = config.lambda;
      opts.tau = tau_at(config, step);
      opts.mode = model::Mode::Train;
      opts.rng = &noise_rng;
      tensor::Tape tape;
      model::LossResult loss;
      try {
        loss = model::batch_loss(tape, params, batch, opts);
        const double total = loss.total.item();
        if (!std::isfinite(total)) fail(ErrorKind::Numeric, "non-finite loss");
        tape.backward(tape.scale(loss.total, 1.0 / static_cast<double>(batch.size())));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric && e.kind() != ErrorKind::Underflow) throw;
        fail(ErrorKind::Numeric, "training aborted at epoch " + std::to_string(epoch) +
                                     ", step " + std::to_string(step) + ": " + e.what());
      }
      optimizer.step();
      ++step;
      sum_phi += loss.total.item();
      sum_phi1 += loss.phi1;
      sum_phi2 += loss.phi2;
    }
    const double n = static_cast<double>(train_set.size());
    row.phi = sum_phi / n;
    row.phi1 = sum_phi1 / n;
    row.phi2 = sum_phi2 / n;
    row.steps = step;
    row.tau = tau_at(config, step == 0 ? 0 : step - 1);
    row.valid_perplexity = eval::perplexity(params, valid_set, config.tau_final);
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.report.epochs.push_back(row);

    if (result.report.best_epoch == 0 || row.valid_perplexity < result.report.best_valid_perplexity) {
      result.report.best_epoch = epoch;
      result.report.best_valid_perplexity = row.valid_perplexity;
      result.params = copy_params(params);
      if (!best_path.empty()) save_checkpoint(best_path, params, vocab);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (log) log(row);
    if (since_best >= config.patience && epoch < config.epochs) {
      result.report.stopped_early = true;
      break;
    }
  }
  result.report.best_checkpoint = best_path;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

void write_checkpoint(std::ostream& os, const model::ModelParams& params,
                      const corpus::Vocabulary& vocab) {
  if (vocab.size() != params.hyper().vocab_size) {
    fail(ErrorKind::InvalidInput, "checkpoint: vocabulary size does not match the model");
  }
  io::write_magic(os, kCheckpointMagic);
  io::write_u32(os, kCheckpointVersion);
  io::write_u32(os, static_cast<std::uint32_t>(params.variant()));
  const model::Hyper& h = params.hyper();
  io::write_u64(os, h.vocab_size);
  io::write_u64(os, h.d_emb);
  io::write_u64(os, h.d_hidden);
  io::write_u64(os, h.layers);
  io::write_u64(os, model::kNumTypes);
  io::write_u64(os, vocab.size());
  for (const std::string& t : vocab.tokens()) io::write_string(os, t);
  const auto named = params.named();
  io::write_u32(os, static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    io::write_string(os, name);
    tensor::write_tensor(os, t);
  }
  io::write_magic(os, kCheckpointEnd);
}

Checkpoint read_checkpoint(std::istream& is) {
  io::expect_magic(is, kCheckpointMagic, "checkpoint");
  const std::uint32_t version = io::read_u32(is, "checkpoint version");
  if (version != kCheckpointVersion) {
    fail(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t tag = io::read_u32(is, "variant tag");
  if (tag > 2) fail(ErrorKind::Format, "unknown variant tag " + std::to_string(tag));
  model::Hyper h;
  h.vocab_size = io::read_u64(is, "vocabulary size");
  h.d_emb = io::read_u64(is, "embedding size");
  h.d_hidden = io::read_u64(is, "hidden size");
  h.layers = io::read_u64(is, "layer count");
  if (io::read_u64(is, "type count") != model::kNumTypes) {
    fail(ErrorKind::Format, "checkpoint type count mismatch");
  }
  constexpr std::uint64_t kLimit = 1u << 24;
  if (h.vocab_size == 0 || h.vocab_size > kLimit || h.d_emb == 0 || h.d_emb > kLimit ||
      h.d_hidden == 0 || h.d_hidden > kLimit || h.layers == 0 || h.layers > 64) {
    fail(ErrorKind::Format, "implausible checkpoint hyperparameters");
  }
  const std::uint64_t n_tokens = io::read_u64(is, "vocabulary length");
  if (n_tokens != h.vocab_size) fail(ErrorKind::Format, "checkpoint vocabulary size mismatch");
  std::vector<std::string> tokens;
  tokens.reserve(n_tokens);
  for (std::uint64_t i = 0; i < n_tokens; ++i) tokens.push_back(io::read_string(is, "vocabulary"));
  if (tokens.size() < corpus::kNumReserved || tokens[corpus::kPadId] != corpus::kPadToken ||
      tokens[corpus::kBosId] != corpus::kBosToken || tokens[corpus::kEosId] != corpus::kEosToken ||
      tokens[corpus::kUnkId] != corpus::kUnkToken) {
    fail(ErrorKind::Format, "checkpoint vocabulary lacks the reserved symbols");
  }

  model::ModelParams params(static_cast<model::Variant>(tag), h);
  auto named = params.named();
  const std::uint32_t count = io::read_u32(is, "tensor count");
  if (count != named.size()) fail(ErrorKind::Format, "checkpoint tensor count mismatch");
  for (auto& [name, t] : named) {
    const std::string stored = io::read_string(is, "tensor name");
    if (stored != name) fail(ErrorKind::Format, "expected tensor '" + name + "', found '" + stored + "'");
    const tensor::Tensor loaded = tensor::read_tensor(is);
    if (loaded.shape() != t.shape()) {
      fail(ErrorKind::Format, "tensor '" + name + "' has shape " +
                                  tensor::shape_string(loaded.shape()) + ", expected " +
                                  tensor::shape_string(t.shape()));
    }
    auto in = loaded.values();
    std::copy(in.begin(), in.end(), t.mutable_values().begin());
  }
  io::expect_magic(is, kCheckpointEnd, "complete checkpoint (missing end marker)");
  if (is.peek() != std::char_traits<char>::eof()) {
    fail(ErrorKind::Format, "trailing bytes after checkpoint");
  }
  return Checkpoint{std::move(params), corpus::Vocabulary::from_tokens(tokens)};
}

void save_checkpoint(const std::string& path, const model::ModelParams& params,
                     const corpus::Vocabulary& vocab) {
  io::write_atomically(path, [&](std::ostream& os) { write_checkpoint(os, params, vocab); });
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path);
  return read_checkpoint(in);
}

Checkpoint load_checkpoint(const std::string& path, model::Variant expected,
                           const std::optional<model::Hyper>& expected_hyper) {
  Checkpoint c = load_checkpoint(path);
  if (c.params.variant() != expected) {
    fail(ErrorKind::InvalidInput, std::string("checkpoint holds a ") + model::to_string(c.params.variant()) +
                                      " model, expected " + model::to_string(expected));
  }
  if (expected_hyper && !(c.params.hyper() == *expected_hyper)) {
    fail(ErrorKind::InvalidInput, "checkpoint hyperparameters differ from the session's");
  }
  return c;
}

}  // namespace tdq::train
