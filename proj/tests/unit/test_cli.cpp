#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdq/cli.hpp"
#include "tdq/config.hpp"
#include "test_support.hpp"

using namespace tdq;
using namespace tdq::cli;
using model::Variant;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(const std::string& args, const testutil::TempDir& dir, const std::string& stdin_text = "") {
  const std::string in = dir.file("stdin.txt"), out = dir.file("stdout.txt"), err = dir.file("stderr.txt");
  write_file(in, stdin_text);
  const std::string cmd = std::string("\"") + TDQ_CLI_PATH + "\" " + args + " <\"" + in + "\" >\"" +
                          out + "\" 2>\"" + err + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

train::TrainConfig tiny() {
  train::TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.d_emb = 6;
  c.d_hidden = 8;
  c.layers = 1;
  return c;
}

}  // namespace

TEST(ExitCodes, KindMapping) {
  EXPECT_EQ(exit_code(ErrorKind::Usage), kExitUsage);
  EXPECT_EQ(exit_code(ErrorKind::InvalidInput), kExitUsage);
  EXPECT_EQ(exit_code(ErrorKind::Numeric), kExitNumeric);
  EXPECT_EQ(exit_code(ErrorKind::Underflow), kExitNumeric);
  EXPECT_EQ(exit_code(ErrorKind::Format), kExitData);
  EXPECT_EQ(exit_code(ErrorKind::Io), kExitData);
}

TEST(Config, TomlOverridesDefaultsAndRoundTrips) {
  train::TrainConfig c;
  config::apply_toml("epochs = 3\n[train]\nlearning_rate = 0.01\n[model]\nd_hidden = 16\n", c);
  EXPECT_EQ(c.epochs, 3u);
  EXPECT_EQ(c.learning_rate, 0.01);
  EXPECT_EQ(c.d_hidden, 16u);
  EXPECT_EQ(c.batch_size, 32u);
  train::TrainConfig back;
  config::apply_toml(config::to_toml(c), back);
  EXPECT_EQ(config::to_toml(back), config::to_toml(c));
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.tau_initial, 0.6);
}

TEST(Config, UnknownKeysAndBadTypesAreUsageErrors) {
  train::TrainConfig c;
  for (const char* doc : {"bogus = 1\n", "[extra]\nx = 1\n", "epochs = \"ten\"\n", "epochs = -2\n",
                          "this is not toml"}) {
    try {
      config::apply_toml(doc, c);
      ADD_FAILURE() << doc;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Usage) << doc;
    }
  }
}

TEST(Distill, DeclarativesAreDroppedAndOutputIsIdempotent) {
  testutil::TempDir dir("distill");
  write_file(dir.file("raw.tsv"), "a b\ti went home\nc\twhat is it ?\nd\tsure\n");
  const auto lex = corpus::TypeLexicons::builtin();
  const DistillStats s = cmd_distill(dir.file("raw.tsv"), dir.file("out.tsv"), lex);
  EXPECT_EQ(s.read, 3u);
  EXPECT_EQ(s.kept, 1u);
  EXPECT_EQ(s.dropped_nonquestion, 2u);
  const DistillStats again = cmd_distill(dir.file("out.tsv"), dir.file("out2.tsv"), lex);
  EXPECT_EQ(again.kept, 1u);
  EXPECT_EQ(slurp(dir.file("out.tsv")), slurp(dir.file("out2.tsv")));
  EXPECT_NE(s.line().find("kept=1"), std::string::npos);
}

TEST(Distill, SyntheticCorpusIsFullyKept) {
  testutil::TempDir dir("distill_synth");
  cmd_synth(7, 2000, dir.file("raw.tsv"));
  const auto lex = corpus::TypeLexicons::builtin();
  const DistillStats s = cmd_distill(dir.file("raw.tsv"), dir.file("out.tsv"), lex, 1000000);
  EXPECT_EQ(s.read, 2000u);
  EXPECT_EQ(s.kept, 2000u);
  for (const auto& p : corpus::load_pairs(dir.file("out.tsv")).pairs) {
    EXPECT_TRUE(corpus::is_question(p.response, lex));
  }
}

TEST(Distill, DeclarativeOnlyCorpusKeepsNothing) {
  testutil::TempDir dir("distill_decl");
  write_file(dir.file("raw.tsv"), "a\ti went home\nb\tit rained\n");
  const DistillStats s =
      cmd_distill(dir.file("raw.tsv"), dir.file("out.tsv"), corpus::TypeLexicons::builtin());
  EXPECT_EQ(s.kept, 0u);
  EXPECT_EQ(s.dropped_nonquestion, 2u);
}

class TrainedSession : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testutil::TempDir("session");
    cmd_synth(3, 120, dir_->file("raw.tsv"));
    cmd_pmi_build(dir_->file("raw.tsv"), dir_->file("t.pmi"));
    std::ostringstream log;
    cmd_train(Variant::Hard, dir_->file("raw.tsv"), dir_->file("t.pmi"), tiny(), dir_->file("htd"),
              corpus::TypeLexicons::builtin(), log);
  }
  static void TearDownTestSuite() { delete dir_; }
  static testutil::TempDir* dir_;
};
testutil::TempDir* TrainedSession::dir_ = nullptr;

TEST_F(TrainedSession, TrainWritesArtifacts) {
  for (const char* f : {"best.ckpt", "train_report.csv", "resolved_config.toml"}) {
    EXPECT_TRUE(std::filesystem::exists(dir_->file(std::string("htd/") + f))) << f;
  }
}

TEST_F(TrainedSession, ResolvedConfigReproducesTraining) {
  train::TrainConfig c;
  config::apply_toml_file(dir_->file("htd/resolved_config.toml"), c);
  std::ostringstream log;
  cmd_train(Variant::Hard, dir_->file("raw.tsv"), dir_->file("t.pmi"), c, dir_->file("again"),
            corpus::TypeLexicons::builtin(), log);
  EXPECT_EQ(slurp(dir_->file("htd/best.ckpt")), slurp(dir_->file("again/best.ckpt")));
  EXPECT_EQ(slurp(dir_->file("htd/train_report.csv")), slurp(dir_->file("again/train_report.csv")));
}

TEST_F(TrainedSession, HtdSessionNeedsPmi) {
  try {
    Session::open(dir_->file("htd/best.ckpt"), "", corpus::TypeLexicons::builtin());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Usage);
  }
}

TEST_F(TrainedSession, ReplHandlesEofRepeatsAndUnknownWords) {
  const Session s =
      Session::open(dir_->file("htd/best.ckpt"), dir_->file("t.pmi"), corpus::TypeLexicons::builtin());
  {
    std::istringstream in("");
    std::ostringstream out, err;
    EXPECT_EQ(cmd_repl(s, in, out, err, false), 0u);
    EXPECT_TRUE(out.str().empty());
  }
  std::istringstream in("i like tea\ni like tea\n\nqqq zzz xxy\n");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_repl(s, in, out, err, true), 3u);
  EXPECT_FALSE(err.str().empty());  // blank line warning
  std::istringstream once("i like tea\n");
  std::ostringstream out1, err1;
  cmd_repl(s, once, out1, err1, true);
  EXPECT_EQ(out.str().substr(0, out1.str().size()), out1.str());
  EXPECT_EQ(out.str().substr(out1.str().size(), out1.str().size()), out1.str());
}

TEST_F(TrainedSession, BinaryGenerateAndRepl) {
  testutil::TempDir tmp("cli_bin");
  const std::string ckpt = dir_->file("htd"), pmi = dir_->file("t.pmi");
  const CliRun g = run_cli("generate --checkpoint \"" + ckpt + "\" --pmi \"" + pmi +
                            "\" --post \"i like tea\" --trace",
                        tmp);
  EXPECT_EQ(g.code, 0) << g.err;
  EXPECT_NE(g.out.find("topics:"), std::string::npos) << g.out;
  EXPECT_NE(g.out.find("P(interrogative)"), std::string::npos) << g.out;
  const CliRun r = run_cli("repl --checkpoint \"" + ckpt + "\" --pmi \"" + pmi + "\"", tmp, "");
  EXPECT_EQ(r.code, 0) << r.err;
  const CliRun no_pmi = run_cli("generate --checkpoint \"" + ckpt + "\" --post \"i like tea\"", tmp);
  EXPECT_EQ(no_pmi.code, kExitUsage) << no_pmi.err;
  EXPECT_NE(no_pmi.err.find("error"), std::string::npos);
}

TEST(Binary, ExitCodesForUsageAndDataErrors) {
  testutil::TempDir tmp("cli_codes");
  EXPECT_EQ(run_cli("", tmp).code, kExitUsage);
  EXPECT_EQ(run_cli("frobnicate", tmp).code, kExitUsage);
  EXPECT_EQ(run_cli("synth", tmp).code, kExitUsage);  // missing --out
  EXPECT_EQ(run_cli("--help", tmp).code, kExitOk);
  EXPECT_EQ(run_cli("pmi-build --corpus /nonexistent/x.tsv --out \"" + tmp.file("t.pmi") + "\"", tmp).code,
            kExitData);
  write_file(tmp.file("bad.tsv"), "no tab\nstill none\nnope\n");
  EXPECT_EQ(run_cli("distill --in \"" + tmp.file("bad.tsv") + "\" --out \"" + tmp.file("o.tsv") + "\"", tmp).code,
            kExitData);
  EXPECT_FALSE(std::filesystem::exists(tmp.file("o.tsv")));
  write_file(tmp.file("bad.toml"), "bogus = 1\n");
  const CliRun bad_cfg = run_cli("train --variant std --corpus x --out y --config \"" + tmp.file("bad.toml") + "\"", tmp);
  EXPECT_EQ(bad_cfg.code, kExitUsage) << bad_cfg.err;
}

TEST(Binary, SynthDistillPmiChain) {
  testutil::TempDir tmp("cli_chain");
  EXPECT_EQ(run_cli("synth --seed 7 --n 50 --out \"" + tmp.file("raw.tsv") + "\"", tmp).code, 0);
  const CliRun d = run_cli("distill --in \"" + tmp.file("raw.tsv") + "\" --out \"" + tmp.file("d.tsv") + "\"", tmp);
  EXPECT_EQ(d.code, 0) << d.err;
  EXPECT_NE(d.out.find("read=50"), std::string::npos) << d.out;
  const CliRun p = run_cli("pmi-build --corpus \"" + tmp.file("d.tsv") + "\" --out \"" + tmp.file("t.pmi") +
                            "\" --tsv \"" + tmp.file("t.tsv") + "\"",
                        tmp);
  EXPECT_EQ(p.code, 0) << p.err;
  EXPECT_TRUE(std::filesystem::exists(tmp.file("t.pmi")));
  EXPECT_TRUE(std::filesystem::exists(tmp.file("t.tsv")));
}

TEST(Binary, FlagsOverrideConfigFile) {
  testutil::TempDir tmp("cli_prec");
  cmd_synth(1, 30, tmp.file("raw.tsv"));
  write_file(tmp.file("c.toml"), "[train]\nepochs = 1\nbatch_size = 4\n[model]\nd_emb = 4\nd_hidden = 4\nlayers = 1\n");
  const CliRun r = run_cli("train --variant plain --corpus \"" + tmp.file("raw.tsv") + "\" --out \"" +
                            tmp.file("m") + "\" --config \"" + tmp.file("c.toml") + "\" --batch-size 6",
                        tmp);
  ASSERT_EQ(r.code, 0) << r.err;
  train::TrainConfig c;
  config::apply_toml_file(tmp.file("m/resolved_config.toml"), c);
  EXPECT_EQ(c.epochs, 1u);
  EXPECT_EQ(c.batch_size, 6u);
  EXPECT_EQ(c.d_emb, 4u);
  EXPECT_EQ(c.learning_rate, 1e-3);
}

TEST(Pipeline, SmallRunIsDeterministicAndHasAllColumns) {
  testutil::TempDir a("pipe_a"), b("pipe_b");
  PipelineOptions opt;
  opt.n_pairs = 120;
  opt.train = tiny();
  std::ostringstream log;
  opt.workdir = a.path().string();
  const PipelineResult ra = cmd_pipeline(opt, log);
  opt.workdir = b.path().string();
  cmd_pipeline(opt, log);
  ASSERT_EQ(ra.variants.size(), 3u);
  const std::string table = slurp(a.file("comparison.md"));
  EXPECT_EQ(table, slurp(b.file("comparison.md")));
  for (const char* col : {"perplexity", "distinct-1", "distinct-2", "TRR", "pattern-KL"}) {
    EXPECT_NE(table.find(col), std::string::npos) << col;
  }
  for (const char* v : {"PLAIN", "STD", "HTD"}) EXPECT_NE(table.find(v), std::string::npos) << v;
  for (const char* sub : {"plain", "std", "htd"}) {
    EXPECT_EQ(slurp(a.file(std::string(sub) + "/report.json")), slurp(b.file(std::string(sub) + "/report.json")));
  }
}

TEST(Pipeline, FailingStageIsNamed) {
  testutil::TempDir a("pipe_fail");
  PipelineOptions opt;
  opt.n_pairs = 20;
  opt.train = tiny();
  opt.train.tau_final = 3.0;  // invalid, rejected when training starts
  opt.workdir = a.path().string();
  std::ostringstream log;
  try {
    cmd_pipeline(opt, log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("stage"), std::string::npos) << e.what();
  }
}
