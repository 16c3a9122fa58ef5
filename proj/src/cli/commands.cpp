#include "tdq/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "tdq/binary_io.hpp"
#include "tdq/config.hpp"
#include "tdq/rng.hpp"

namespace tdq::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
  io::write_atomically(path, [&](std::ostream& os) { os << text; });
}

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

template <typename F>
auto stage(const char* name, std::ostream& log, F&& body) {
  const auto started = std::chrono::steady_clock::now();
  log << "[pipeline] stage " << name << " ...\n" << std::flush;
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      log << "[pipeline] stage " << name << " done in " << std::fixed << std::setprecision(1)
          << std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()
          << " s\n" << std::defaultfloat << std::flush;
    } else {
      auto r = body();
      log << "[pipeline] stage " << name << " done in " << std::fixed << std::setprecision(1)
          << std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()
          << " s\n" << std::defaultfloat << std::flush;
      return r;
    }
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
  }
}

std::string fmt_metric(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::InvalidInput:
      return kExitUsage;
    case ErrorKind::Numeric:
    case ErrorKind::Underflow:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

corpus::TypeLexicons LexiconPaths::lexicons() const {
  if (interrogatives.empty() != content.empty()) {
    fail(ErrorKind::Usage, "--interrogatives and --content must be given together");
  }
  if (interrogatives.empty()) return corpus::TypeLexicons::builtin();
  return corpus::TypeLexicons::load(interrogatives, content);
}

eval::PatternRules LexiconPaths::pattern_rules() const {
  return patterns.empty() ? eval::PatternRules::builtin() : eval::PatternRules::load(patterns);
}

// ---------------------------------------------------------------------------

void cmd_synth(std::uint64_t seed, std::size_t n, const std::string& out) {
  const auto pairs = corpus::synth_corpus(seed, n);
  corpus::save_pairs(out, pairs);
}

std::string DistillStats::line() const {
  std::ostringstream os;
  os << "read=" << read << " kept=" << kept << " dropped_nonquestion=" << dropped_nonquestion
     << " dropped_universal=" << dropped_universal << " skipped_lines=" << skipped_lines;
  return os.str();
}

std::vector<corpus::CorpusPair> distill(std::span<const corpus::CorpusPair> pairs,
                                        const corpus::TypeLexicons& lexicons,
                                        std::size_t threshold, DistillStats& stats) {
  std::vector<corpus::CorpusPair> questions;
  for (const auto& p : pairs) {
    if (corpus::is_question(p.response, lexicons)) questions.push_back(p);
  }
  auto kept = corpus::filter_universal(questions, threshold);
  stats.read += pairs.size();
  stats.dropped_nonquestion += pairs.size() - questions.size();
  stats.dropped_universal += questions.size() - kept.size();
  stats.kept += kept.size();
  return kept;
}

DistillStats cmd_distill(const std::string& in, const std::string& out,
                         const corpus::TypeLexicons& lexicons, std::size_t threshold) {
  const corpus::LoadResult loaded = corpus::load_pairs(in);
  DistillStats stats;
  stats.skipped_lines = loaded.report.skipped;
  const auto kept = distill(loaded.pairs, lexicons, threshold, stats);
  corpus::save_pairs(out, kept);
  return stats;
}

pmi::PmiTable cmd_pmi_build(const std::string& corpus_path, const std::string& out,
                            std::uint64_t min_count, const std::string& tsv_out) {
  const corpus::LoadResult loaded = corpus::load_pairs(corpus_path);
  pmi::PmiTable table = pmi::PmiTable::build(loaded.pairs, min_count);
  table.save(out);
  if (!tsv_out.empty()) {
    io::write_atomically(tsv_out, [&](std::ostream& os) { table.write_tsv(os); });
  }
  return table;
}

// ---------------------------------------------------------------------------

train::Trained cmd_train(model::Variant variant, const std::string& corpus_path,
                         const std::string& pmi_path, train::TrainConfig config,
                         const std::string& out_dir, const corpus::TypeLexicons& lexicons,
                         std::ostream& log) {
  config.checkpoint_dir = out_dir;
  config.validate();
  const corpus::LoadResult loaded = corpus::load_pairs(corpus_path);
  if (!pmi_path.empty()) {
    const pmi::PmiTable table = pmi::PmiTable::load(pmi_path);
    log << "[train] pmi table " << pmi_path << ": " << table.n_pairs() << " pairs\n";
  }
  const std::string resolved = config::to_toml(config);
  log << "[train] variant " << model::to_string(variant) << ", " << loaded.pairs.size()
      << " pairs from " << corpus_path << "\n[train] resolved config:\n" << resolved << std::flush;
  fs::create_directories(out_dir);
  write_text(path_in(out_dir, "resolved_config.toml"), resolved);

  train::Trained trained = train::train(
      config, variant, loaded.pairs, lexicons, [&](const train::EpochRow& r) {
        log << "[train] " << model::to_string(variant) << " epoch " << r.epoch << " phi "
            << std::fixed << std::setprecision(4) << r.phi << " phi1 " << r.phi1 << " phi2 "
            << r.phi2 << " valid_ppl " << r.valid_perplexity << " tau " << r.tau << " ("
            << std::setprecision(1) << r.seconds << " s)\n"
            << std::defaultfloat << std::flush;
      });
  std::ostringstream csv;
  trained.report.write_csv(csv);
  write_text(path_in(out_dir, "train_report.csv"), csv.str());
  log << "[train] best epoch " << trained.report.best_epoch << ", checkpoint "
      << trained.report.best_checkpoint << "\n";
  return trained;
}

// ---------------------------------------------------------------------------

Session Session::open(const std::string& checkpoint_path, const std::string& pmi_path,
                      corpus::TypeLexicons lexicons) {
  Session s{train::load_checkpoint(checkpoint_path), std::nullopt, std::move(lexicons)};
  if (!pmi_path.empty()) s.pmi = pmi::PmiTable::load(pmi_path);
  if (s.checkpoint.params.variant() == model::Variant::Hard && !s.pmi) {
    fail(ErrorKind::Usage, "the HTD model needs --pmi for topic prediction");
  }
  return s;
}

eval::DecodingContext Session::context() const {
  return eval::DecodingContext{checkpoint.params, checkpoint.vocab, lexicons,
                               pmi ? &*pmi : nullptr};
}

void print_generation(std::ostream& out, const Session& s, const eval::Generation& g, bool trace) {
  out << corpus::join_tokens(g.tokens) << '\n';
  out << "topics: " << corpus::join_tokens(g.topics.tokens()) << '\n';
  if (trace) eval::write_trace(out, g, s.checkpoint.vocab);
}

eval::Evaluation cmd_eval(const Session& session, const std::string& corpus_path,
                          const eval::PatternRules& rules, const eval::GenerateOptions& options,
                          const std::string& report_path, const std::string& details_path) {
  const corpus::LoadResult loaded = corpus::load_pairs(corpus_path);
  eval::Evaluation ev = eval::evaluate(session.context(), loaded.pairs, rules, options);
  if (!report_path.empty()) write_text(report_path, eval::to_json(ev.report));
  if (!details_path.empty()) {
    io::write_atomically(details_path,
                         [&](std::ostream& os) { eval::write_details_csv(os, ev.details); });
  }
  return ev;
}

std::size_t cmd_repl(const Session& session, std::istream& in, std::ostream& out,
                     std::ostream& err, bool trace, const eval::GenerateOptions& options) {
  std::string line;
  std::size_t answered = 0, lineno = 0;
  const eval::DecodingContext ctx = session.context();
  while (std::getline(in, line)) {
    ++lineno;
    const corpus::Tokens post = corpus::split_tokens(lower(line));
    if (post.empty()) {
      err << "warning: line " << lineno << ": empty post ignored\n";
      continue;
    }
    if (post.size() > corpus::kDefaultMaxLen) {
      err << "warning: line " << lineno << ": post longer than " << corpus::kDefaultMaxLen
          << " tokens ignored\n";
      continue;
    }
    try {
      print_generation(out, session, eval::generate(ctx, post, options), trace);
      out << std::flush;
      ++answered;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvalidInput && e.kind() != ErrorKind::Underflow) throw;
      err << "warning: line " << lineno << ": " << e.what() << '\n';
    }
  }
  return answered;
}

// ---------------------------------------------------------------------------

std::string comparison_table(std::span<const PipelineVariantResult> results) {
  std::ostringstream os;
  os << "| model | perplexity | distinct-1 | distinct-2 | TRR | pattern-KL |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& r : results) {
    os << "| " << model::to_string(r.variant) << " | " << fmt_metric(r.metrics.perplexity) << " | "
       << fmt_metric(r.metrics.distinct1) << " | " << fmt_metric(r.metrics.distinct2) << " | "
       << fmt_metric(r.metrics.trr) << " | " << fmt_metric(r.metrics.pattern_kl) << " |\n";
  }
  return os.str();
}

PipelineResult cmd_pipeline(const PipelineOptions& options, std::ostream& log) {
  if (options.workdir.empty()) fail(ErrorKind::Usage, "pipeline: workdir is required");
  if (!(options.test_fraction > 0.0 && options.test_fraction < 1.0)) {
    fail(ErrorKind::Usage, "pipeline: test fraction must lie in (0, 1)");
  }
  const std::string& dir = options.workdir;
  fs::create_directories(dir);
  const corpus::TypeLexicons lexicons = options.lexicon_paths.lexicons();
  const eval::PatternRules rules = options.lexicon_paths.pattern_rules();
  const std::string raw = path_in(dir, "raw.tsv"), distilled = path_in(dir, "distilled.tsv");
  const std::string train_tsv = path_in(dir, "train.tsv"), test_tsv = path_in(dir, "test.tsv");
  const std::string pmi_path = path_in(dir, "table.pmi");

  train::TrainConfig tcfg = options.train;
  tcfg.seed = derive_seed(options.seed, "train");
  log << "[pipeline] seed " << options.seed << ", " << options.n_pairs << " synthetic pairs, workdir "
      << dir << '\n';

  PipelineResult result;
  stage("synth", log, [&] { cmd_synth(derive_seed(options.seed, "synth"), options.n_pairs, raw); });
  result.distill = stage("distill", log, [&] {
    return cmd_distill(raw, distilled, lexicons, options.universal_threshold);
  });
  log << "[pipeline] distill: " << result.distill.line() << '\n';
  stage("split", log, [&] {
    std::vector<corpus::CorpusPair> pairs = corpus::load_pairs(distilled).pairs;
    if (pairs.size() < 2) fail(ErrorKind::InvalidInput, "too few pairs to split");
    Rng rng(derive_seed(options.seed, "test-split"));
    shuffle(pairs, rng);
    std::size_t n_test = static_cast<std::size_t>(std::floor(options.test_fraction * pairs.size()));
    n_test = std::clamp<std::size_t>(n_test, 1, pairs.size() - 1);
    const std::span<const corpus::CorpusPair> all(pairs);
    corpus::save_pairs(test_tsv, all.first(n_test));
    corpus::save_pairs(train_tsv, all.subspan(n_test));
    log << "[pipeline] split: " << pairs.size() - n_test << " train, " << n_test << " test\n";
  });
  stage("pmi-build", log, [&] { cmd_pmi_build(train_tsv, pmi_path, options.pmi_min_count); });

  for (model::Variant v : options.variants) {
    const std::string tag = lower(model::to_string(v));
    const std::string vdir = path_in(dir, tag);
    PipelineVariantResult vr{v, {}, {}, 0.0};
    const std::string train_stage = "train-" + tag;
    vr.train = stage(train_stage.c_str(), log, [&] {
      return cmd_train(v, train_tsv, pmi_path, tcfg, vdir, lexicons, log).report;
    });
    const std::string eval_stage = "eval-" + tag;
    stage(eval_stage.c_str(), log, [&] {
      const Session session = Session::open(path_in(vdir, "best.ckpt"), pmi_path, lexicons);
      eval::GenerateOptions gen;
      gen.tau = tcfg.tau_final;
      const eval::Evaluation ev = cmd_eval(session, test_tsv, rules, gen,
                                           path_in(vdir, "report.json"), path_in(vdir, "details.csv"));
      vr.metrics = ev.report;
      std::size_t ended = 0;
      for (const auto& g : ev.generations) ended += g.ended ? 1 : 0;
      vr.ended_fraction = static_cast<double>(ended) / static_cast<double>(ev.generations.size());
    });
    log << "[pipeline] " << model::to_string(v) << ": " << eval::to_json(vr.metrics);
    result.variants.push_back(std::move(vr));
  }
  result.comparison_path = path_in(dir, "comparison.md");
  const std::string table = comparison_table(result.variants);
  write_text(result.comparison_path, table);
  log << "[pipeline] comparison (" << result.comparison_path << "):\n" << table;
  return result;
}

}  // namespace tdq::cli
