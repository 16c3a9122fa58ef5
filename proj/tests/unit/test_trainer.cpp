#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdq/error.hpp"
#include "tdq/trainer.hpp"
#include "test_support.hpp"

using namespace tdq;
using namespace tdq::train;
using model::Variant;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.d_emb = 8;
  c.d_hidden = 12;
  c.layers = 1;
  c.learning_rate = 5e-3;
  c.validation_fraction = 0.2;
  return c;
}

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

std::string csv_of(const TrainReport& r) {
  std::ostringstream os;
  r.write_csv(os);
  return os.str();
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Usage;
}

}  // namespace

TEST(TauSchedule, SwitchesAtConfiguredStep) {
  TrainConfig c;
  EXPECT_EQ(tau_at(c, 0), 0.6);
  EXPECT_EQ(tau_at(c, 999), 0.6);
  EXPECT_EQ(tau_at(c, 1000), 0.8);
  c.tau_switch_step = 0;
  EXPECT_EQ(tau_at(c, 0), 0.8);
}

TEST(TrainConfigCheck, RejectsOutOfRangeFields) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda = -1;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::InvalidInput);
  c = TrainConfig{};
  c.tau_final = 1.5;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::InvalidInput);
  c = TrainConfig{};
  c.tau_initial = 0.0;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::InvalidInput);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_EQ(kind_of([&] { c.validate(); }), ErrorKind::InvalidInput);
}

TEST(Split, DeterministicAndExhaustive) {
  const auto pairs = corpus::synth_corpus(1, 100);
  const auto [a_train, a_valid] = split_validation(pairs, 0.1, 7);
  const auto [b_train, b_valid] = split_validation(pairs, 0.1, 7);
  EXPECT_EQ(a_valid.size(), 10u);
  EXPECT_EQ(a_train.size() + a_valid.size(), pairs.size());
  for (std::size_t i = 0; i < a_valid.size(); ++i) EXPECT_EQ(a_valid[i].post, b_valid[i].post);
}

TEST(Train, ZeroLearningRateLeavesParametersAndLossFixed) {
  const auto pairs = corpus::synth_corpus(2, 1);
  TrainConfig c = tiny_config();
  c.learning_rate = 0.0;
  c.validation_fraction = 0.0;
  c.epochs = 3;
  c.patience = 10;
  for (Variant v : {Variant::Plain, Variant::Soft, Variant::Hard}) {
    const Trained base = train::train(c, v, pairs, corpus::TypeLexicons::builtin());
    ASSERT_EQ(base.report.epochs.size(), 3u);
    if (v != Variant::Hard) {
      // HTD draws fresh Gumbel noise each step, so only PLAIN and STD have a constant loss.
      EXPECT_EQ(base.report.epochs[0].phi, base.report.epochs[2].phi);
    }
    EXPECT_EQ(base.report.epochs[0].valid_perplexity, base.report.epochs[2].valid_perplexity);
    // The initial parameters are reproduced by re-initialising under the same seed.
    model::ModelParams init(v, base.params.hyper());
    Rng rng(derive_seed(c.seed, "init"));
    init.init_uniform(rng);
    const auto a = base.params.named(), b = init.named();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto va = a[i].second.values(), vb = b[i].second.values();
      EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin(), vb.end())) << a[i].first;
    }
  }
}

TEST(Train, SameSeedIsBitwiseReproducible) {
  const auto pairs = corpus::synth_corpus(3, 60);
  testutil::TempDir d1("train_a"), d2("train_b");
  TrainConfig c = tiny_config();
  c.checkpoint_dir = d1.path().string();
  const Trained a = train::train(c, Variant::Hard, pairs, corpus::TypeLexicons::builtin());
  c.checkpoint_dir = d2.path().string();
  const Trained b = train::train(c, Variant::Hard, pairs, corpus::TypeLexicons::builtin());
  EXPECT_EQ(csv_of(a.report), csv_of(b.report));
  const std::string ca = read_bytes(d1.file("best.ckpt")), cb = read_bytes(d2.file("best.ckpt"));
  EXPECT_FALSE(ca.empty());
  EXPECT_EQ(ca, cb);
  c.seed = 8;
  const Trained other = train::train(c, Variant::Hard, pairs, corpus::TypeLexicons::builtin());
  EXPECT_NE(csv_of(a.report), csv_of(other.report));
}

TEST(Train, ReportRowsMatchEpochsAndBestIsMinimum) {
  const auto pairs = corpus::synth_corpus(4, 80);
  TrainConfig c = tiny_config();
  c.epochs = 4;
  std::size_t logged = 0;
  const Trained t = train::train(c, Variant::Soft, pairs, corpus::TypeLexicons::builtin(),
                          [&](const EpochRow&) { ++logged; });
  EXPECT_EQ(t.report.epochs.size(), logged);
  double best = 1e300;
  for (const auto& row : t.report.epochs) best = std::min(best, row.valid_perplexity);
  EXPECT_EQ(t.report.best_valid_perplexity, best);
  EXPECT_EQ(t.report.epochs[t.report.best_epoch - 1].valid_perplexity, best);
  const std::string csv = csv_of(t.report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,phi,phi1,phi2,valid_perplexity,tau,steps,best");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(logged + 1));
}

TEST(Train, EarlyStoppingHonoursPatience) {
  const auto pairs = corpus::synth_corpus(5, 40);
  TrainConfig c = tiny_config();
  c.epochs = 40;
  c.patience = 1;
  c.learning_rate = 0.5;  // large enough to overshoot and stall
  const Trained t = train::train(c, Variant::Plain, pairs, corpus::TypeLexicons::builtin());
  if (t.report.stopped_early) {
    EXPECT_LT(t.report.epochs.size(), 40u);
    EXPECT_EQ(t.report.epochs.size(), t.report.best_epoch + c.patience);
  } else {
    EXPECT_EQ(t.report.epochs.size(), 40u);
  }
}

TEST(Train, FirstEpochLossIsNearUniformEntropy) {
  const auto pairs = corpus::synth_corpus(6, 200);
  const auto lex = corpus::TypeLexicons::builtin();
  TrainConfig c = tiny_config();
  c.epochs = 1;
  c.validation_fraction = 0.0;
  const Trained t = train::train(c, Variant::Plain, pairs, lex);
  double tokens = 0.0;
  for (const auto& p : pairs) tokens += corpus::tag_pair(p, lex).response.size();
  const double per_token = t.report.epochs[0].phi1 * pairs.size() / tokens;
  const double log_v = std::log(static_cast<double>(t.vocab.size()));
  EXPECT_GE(per_token, 0.5 * log_v);
  EXPECT_LE(per_token, 2.0 * log_v);
}

TEST(Train, LossFallsOnSyntheticCorpus) {
  const auto pairs = corpus::synth_corpus(7, 300);
  TrainConfig c = tiny_config();
  c.epochs = 12;
  c.d_emb = 16;
  c.d_hidden = 24;
  c.learning_rate = 1e-2;
  c.patience = 12;
  const Trained t = train::train(c, Variant::Soft, pairs, corpus::TypeLexicons::builtin());
  EXPECT_LT(t.report.epochs.back().phi1, 0.5 * t.report.epochs.front().phi1);
}

TEST(Train, EmptyCorpusRejected) {
  EXPECT_EQ(kind_of([] {
              train::train(tiny_config(), Variant::Plain, std::vector<corpus::CorpusPair>{},
                    corpus::TypeLexicons::builtin());
            }),
            ErrorKind::InvalidInput);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const auto pairs = corpus::synth_corpus(8, 20);
  const auto vocab = corpus::build_vocab(pairs, 100);
  for (Variant v : {Variant::Plain, Variant::Soft, Variant::Hard}) {
    model::ModelParams p(v, model::Hyper{vocab.size(), 5, 6, 2});
    Rng rng(9);
    p.init_uniform(rng);
    std::ostringstream os;
    write_checkpoint(os, p, vocab);
    std::istringstream is(os.str());
    const Checkpoint back = read_checkpoint(is);
    EXPECT_EQ(back.params.variant(), v);
    EXPECT_EQ(back.params.hyper(), p.hyper());
    EXPECT_EQ(back.vocab.tokens(), vocab.tokens());
    const auto a = p.named(), b = back.params.named();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].first, b[i].first);
      const auto va = a[i].second.values(), vb = b[i].second.values();
      EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
    }
  }
}

TEST(Checkpoint, TruncationAndTrailingBytesAreFormatErrors) {
  const auto vocab = corpus::build_vocab(corpus::synth_corpus(8, 5), 50);
  model::ModelParams p(Variant::Soft, model::Hyper{vocab.size(), 3, 4, 1});
  std::ostringstream os;
  write_checkpoint(os, p, vocab);
  const std::string bytes = os.str();
  std::istringstream cut(bytes.substr(0, bytes.size() - 1));
  EXPECT_EQ(kind_of([&] { read_checkpoint(cut); }), ErrorKind::Format);
  std::istringstream extra(bytes + "x");
  EXPECT_EQ(kind_of([&] { read_checkpoint(extra); }), ErrorKind::Format);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  std::istringstream ver(bad_version);
  EXPECT_EQ(kind_of([&] { read_checkpoint(ver); }), ErrorKind::Format);
}

TEST(Checkpoint, VariantAndHyperMismatchRejected) {
  testutil::TempDir dir("ckpt");
  const auto vocab = corpus::build_vocab(corpus::synth_corpus(8, 5), 50);
  model::ModelParams p(Variant::Soft, model::Hyper{vocab.size(), 3, 4, 1});
  save_checkpoint(dir.file("m.ckpt"), p, vocab);
  EXPECT_NO_THROW(load_checkpoint(dir.file("m.ckpt"), Variant::Soft));
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir.file("m.ckpt"), Variant::Hard); }),
            ErrorKind::InvalidInput);
  model::Hyper other = p.hyper();
  other.d_hidden = 8;
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir.file("m.ckpt"), Variant::Soft, other); }),
            ErrorKind::InvalidInput);
  EXPECT_EQ(kind_of([&] { load_checkpoint(dir.file("missing.ckpt")); }), ErrorKind::Io);
}
