// tdq: typed-decoder question generation from the command line.

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <vector>

#include "tdq/cli.hpp"
#include "tdq/config.hpp"

using namespace tdq;

namespace {

struct TrainFlags {
  std::string config_path;
  std::vector<std::function<void(train::TrainConfig&)>> overrides;

  template <typename T>
  void add(CLI::App* app, const std::string& flag, T train::TrainConfig::*field,
           const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    overrides.push_back([opt, value, field](train::TrainConfig& c) {
      if (opt->count() > 0) c.*field = *value;
    });
  }

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "TOML file with [train]/[model] settings");
    add(app, "--epochs", &train::TrainConfig::epochs, "training epochs");
    add(app, "--batch-size", &train::TrainConfig::batch_size, "mini-batch size");
    add(app, "--lr", &train::TrainConfig::learning_rate, "Adam learning rate");
    add(app, "--clip-norm", &train::TrainConfig::clip_norm, "global gradient norm clip");
    add(app, "--lambda", &train::TrainConfig::lambda, "type loss weight");
    add(app, "--tau-initial", &train::TrainConfig::tau_initial, "Gumbel temperature before the switch");
    add(app, "--tau-final", &train::TrainConfig::tau_final, "Gumbel temperature after the switch");
    add(app, "--tau-switch-step", &train::TrainConfig::tau_switch_step, "optimizer step of the switch");
    add(app, "--train-seed", &train::TrainConfig::seed, "training seed");
    add(app, "--validation-fraction", &train::TrainConfig::validation_fraction, "held-out share");
    add(app, "--patience", &train::TrainConfig::patience, "early-stopping patience in epochs");
    add(app, "--vocab-cap", &train::TrainConfig::vocab_cap, "vocabulary size cap");
    add(app, "--d-emb", &train::TrainConfig::d_emb, "embedding width");
    add(app, "--d-hidden", &train::TrainConfig::d_hidden, "GRU hidden width");
    add(app, "--layers", &train::TrainConfig::layers, "GRU layers");
  }

  // Flags override the file, which overrides the defaults.
  train::TrainConfig resolve() const {
    train::TrainConfig c;
    if (!config_path.empty()) config::apply_toml_file(config_path, c);
    for (const auto& f : overrides) f(c);
    return c;
  }
};

void add_lexicon_flags(CLI::App* app, cli::LexiconPaths& paths, bool patterns) {
  app->add_option("--interrogatives", paths.interrogatives, "interrogative lexicon file");
  app->add_option("--content", paths.content, "content-word lexicon file");
  if (patterns) app->add_option("--patterns", paths.patterns, "questioning-pattern rules file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Typed-decoder question generation"};
  app.require_subcommand(1);

  // synth
  std::uint64_t synth_seed = 7;
  std::size_t synth_n = cli::kDefaultSynthPairs;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "write a seeded synthetic post/question corpus");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--n", synth_n, "number of pairs");
  synth->add_option("--out", synth_out, "output TSV")->required();

  // distill
  std::string distill_in, distill_out;
  std::size_t threshold = cli::kDefaultUniversalThreshold;
  cli::LexiconPaths distill_lex;
  CLI::App* distill = app.add_subcommand("distill", "keep question responses, drop universal ones");
  distill->add_option("--in", distill_in, "raw pairs TSV")->required();
  distill->add_option("--out", distill_out, "distilled TSV")->required();
  distill->add_option("--threshold", threshold, "max distinct posts per response");
  add_lexicon_flags(distill, distill_lex, false);

  // pmi-build
  std::string pmi_corpus, pmi_out, pmi_tsv;
  std::uint64_t min_count = 1;
  CLI::App* pmi_build = app.add_subcommand("pmi-build", "count post/response co-occurrences");
  pmi_build->add_option("--corpus", pmi_corpus, "pairs TSV")->required();
  pmi_build->add_option("--out", pmi_out, "binary PMI table")->required();
  pmi_build->add_option("--min-count", min_count, "drop counts below this value");
  pmi_build->add_option("--tsv", pmi_tsv, "also dump the table as TSV");

  // train
  std::string variant_name, train_corpus, train_pmi, train_out;
  TrainFlags train_flags;
  cli::LexiconPaths train_lex;
  CLI::App* train_cmd = app.add_subcommand("train", "train a decoder variant");
  train_cmd->add_option("--variant", variant_name, "plain, std or htd")->required();
  train_cmd->add_option("--corpus", train_corpus, "training pairs TSV")->required();
  train_cmd->add_option("--pmi", train_pmi, "PMI table");
  train_cmd->add_option("--out", train_out, "checkpoint directory")->required();
  train_flags.attach(train_cmd);
  add_lexicon_flags(train_cmd, train_lex, false);

  // generate / eval / repl share the session flags
  std::string ckpt, session_pmi, post, report, details, eval_corpus;
  bool trace = false, sample = false;
  std::uint64_t noise_seed = 0;
  double tau = 0.8;
  cli::LexiconPaths session_lex;
  auto session_flags = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", ckpt, "checkpoint file (best.ckpt) or directory")->required();
    sub->add_option("--pmi", session_pmi, "PMI table (required for htd)");
    sub->add_option("--tau", tau, "Gumbel-Softmax temperature at inference");
    sub->add_flag("--sample", sample, "re-enable Gumbel noise in the type mask");
    sub->add_option("--noise-seed", noise_seed, "seed for --sample");
    add_lexicon_flags(sub, session_lex, true);
  };
  CLI::App* generate = app.add_subcommand("generate", "generate a question for one post");
  session_flags(generate);
  generate->add_option("--post", post, "post text")->required();
  generate->add_flag("--trace", trace, "print the per-step type table");

  CLI::App* eval_cmd = app.add_subcommand("eval", "generate for a test set and compute metrics");
  session_flags(eval_cmd);
  eval_cmd->add_option("--corpus", eval_corpus, "test pairs TSV")->required();
  eval_cmd->add_option("--report", report, "metric report JSON")->required();
  eval_cmd->add_option("--details", details, "per-post CSV");

  CLI::App* repl = app.add_subcommand("repl", "answer one post per input line");
  session_flags(repl);
  repl->add_flag("--trace", trace, "print the per-step type table");

  // pipeline
  cli::PipelineOptions pipe;
  std::vector<std::string> pipe_variants;
  TrainFlags pipe_flags;
  CLI::App* pipeline = app.add_subcommand("pipeline", "synth, distill, pmi-build, train, eval, compare");
  pipeline->add_option("--seed", pipe.seed, "root seed");
  pipeline->add_option("--workdir", pipe.workdir, "output directory")->required();
  pipeline->add_option("--n", pipe.n_pairs, "synthetic pairs");
  pipeline->add_option("--test-fraction", pipe.test_fraction, "held-out test share");
  pipeline->add_option("--min-count", pipe.pmi_min_count, "PMI min count");
  pipeline->add_option("--threshold", pipe.universal_threshold, "universal-question threshold");
  pipeline->add_option("--variants", pipe_variants, "subset of plain std htd");
  pipe_flags.attach(pipeline);
  add_lexicon_flags(pipeline, pipe.lexicon_paths, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  auto checkpoint_path = [&] {
    std::error_code ec;
    return std::filesystem::is_directory(ckpt, ec) ? (std::filesystem::path(ckpt) / "best.ckpt").string()
                                                   : ckpt;
  };
  auto gen_options = [&] {
    eval::GenerateOptions g;
    g.tau = tau;
    g.sample_noise = sample;
    g.seed = noise_seed;
    return g;
  };

  try {
    if (synth->parsed()) {
      cli::cmd_synth(synth_seed, synth_n, synth_out);
      std::cerr << "[synth] wrote " << synth_n << " pairs to " << synth_out << '\n';
    } else if (distill->parsed()) {
      const auto stats = cli::cmd_distill(distill_in, distill_out, distill_lex.lexicons(), threshold);
      std::cout << stats.line() << '\n';
    } else if (pmi_build->parsed()) {
      const auto table = cli::cmd_pmi_build(pmi_corpus, pmi_out, min_count, pmi_tsv);
      std::cerr << "[pmi-build] " << table.n_pairs() << " pairs, " << table.post_counts().size()
                << " post tokens, " << table.response_counts().size() << " response tokens, "
                << table.joint_counts().size() << " joint entries\n";
    } else if (train_cmd->parsed()) {
      cli::cmd_train(model::parse_variant(variant_name), train_corpus, train_pmi,
                     train_flags.resolve(), train_out, train_lex.lexicons(), std::cerr);
    } else if (generate->parsed()) {
      const auto s = cli::Session::open(checkpoint_path(), session_pmi, session_lex.lexicons());
      const auto tokens = corpus::split_tokens(post);
      cli::print_generation(std::cout, s, eval::generate(s.context(), tokens, gen_options()), trace);
    } else if (eval_cmd->parsed()) {
      const auto s = cli::Session::open(checkpoint_path(), session_pmi, session_lex.lexicons());
      const auto ev = cli::cmd_eval(s, eval_corpus, session_lex.pattern_rules(), gen_options(),
                                    report, details);
      std::cout << eval::to_json(ev.report);
    } else if (repl->parsed()) {
      const auto s = cli::Session::open(checkpoint_path(), session_pmi, session_lex.lexicons());
      cli::cmd_repl(s, std::cin, std::cout, std::cerr, trace, gen_options());
    } else if (pipeline->parsed()) {
      pipe.train = pipe_flags.resolve();
      if (!pipe_variants.empty()) {
        pipe.variants.clear();
        for (const auto& v : pipe_variants) pipe.variants.push_back(model::parse_variant(v));
      }
      const auto result = cli::cmd_pipeline(pipe, std::cerr);
      std::cout << cli::comparison_table(result.variants);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitData;
  }
  return cli::kExitOk;
}
