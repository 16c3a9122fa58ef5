#include "tdq/evalgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tdq/error.hpp"
#include "tdq/rng.hpp"

namespace tdq::eval {

using corpus::Tokens;
using model::Variant;
using model::WordType;
using tensor::Tape;
using tensor::Tensor;

namespace {

constexpr std::size_t kTraceTop = 10;

WordType lexical_type(const std::string& token, const corpus::TypeLexicons& lex) {
  if (lex.is_interrogative_token(token)) return WordType::Interrogative;
  if (lex.is_content(token)) return WordType::Topic;
  return WordType::Ordinary;
}

std::size_t greedy_pick(std::span<const double> p) {
  std::size_t best = corpus::kEosId;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i == corpus::kPadId || i == corpus::kBosId) continue;
    if (p[i] > p[best]) best = i;
  }
  return best;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

// ---------------------------------------------------------------------------
// Generation

Generation generate(const DecodingContext& ctx, std::span<const std::string> post,
                    const GenerateOptions& options) {
  const model::ModelParams& params = ctx.params;
  const Variant variant = params.variant();
  if (post.empty()) fail(ErrorKind::InvalidInput, "generate: empty post");
  if (ctx.vocab.size() != params.hyper().vocab_size) {
    fail(ErrorKind::InvalidInput, "generate: vocabulary does not match the model");
  }
  if (variant == Variant::Hard && ctx.pmi == nullptr) {
    fail(ErrorKind::State, "generate: the HTD decoder needs a PMI table");
  }

  Generation g;
  g.topics.post.assign(post.begin(), post.end());
  if (ctx.pmi != nullptr) g.topics = ctx.pmi->predict_topics(post, ctx.lexicons, options.n_topics);

  std::array<Tensor, model::kNumTypes> masks;
  model::TypePartition partition;
  if (variant == Variant::Hard) {
    std::vector<std::size_t> topic_ids;
    for (const auto& t : g.topics.topics) {
      if (ctx.vocab.contains(t.token)) topic_ids.push_back(ctx.vocab.id_of(t.token));
    }
    partition = model::make_partition(ctx.vocab.size(),
                                      model::interrogative_ids(ctx.vocab, ctx.lexicons), topic_ids);
    masks = model::partition_masks(std::span(&partition, 1), ctx.vocab.size());
  }
  Rng noise(derive_seed(options.seed, "generate-noise"));
  const model::Mode mode = options.sample_noise ? model::Mode::Train : model::Mode::Infer;

  Tape tape(false);
  const std::vector<std::size_t> ids = ctx.vocab.encode(post);
  const model::EncoderOutput enc = model::encode(tape, params, ids);
  std::vector<Tensor> state = enc.final_states;
  std::size_t prev = corpus::kBosId;
  for (std::size_t t = 0; t < options.max_length; ++t) {
    const model::Attention att = model::attend(tape, params, state.back(), enc);
    state = model::decoder_step(tape, params, state, std::span(&prev, 1), att.context);
    const Tensor& s = state.back();
    Tensor dist, pi;
    switch (variant) {
      case Variant::Plain:
        dist = model::plain_generation_dist(tape, params, s);
        break;
      case Variant::Soft:
        pi = model::std_type_dist(tape, params, s);
        dist = model::std_generation_dist(tape, params, s, pi);
        break;
      case Variant::Hard: {
        const model::HtdStep step =
            model::htd_step(tape, params, s, masks, options.tau, &noise, mode, t + 1);
        pi = step.type_dist;
        dist = model::htd_final_dist(tape, step);
        break;
      }
    }
    const auto p = dist.values();
    TraceStep ts;
    ts.step = t + 1;
    if (pi.defined()) ts.type_dist = std::array<double, 3>{pi.at(0, 0), pi.at(0, 1), pi.at(0, 2)};
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t k = std::min(kTraceTop, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return p[a] > p[b] || (p[a] == p[b] && a < b); });
    for (std::size_t i = 0; i < k; ++i) ts.top.emplace_back(order[i], p[order[i]]);
    ts.token = greedy_pick(p);
    ts.token_type = variant == Variant::Hard ? partition.type_of(ts.token)
                                             : lexical_type(ctx.vocab.token_of(ts.token), ctx.lexicons);
    g.trace.push_back(std::move(ts));
    prev = g.trace.back().token;
    if (prev == corpus::kEosId) {
      g.ended = true;
      break;
    }
    g.tokens.push_back(ctx.vocab.token_of(prev));
  }
  return g;
}

void write_trace(std::ostream& os, const Generation& g, const corpus::Vocabulary& vocab) {
  os << "step\tP(interrogative)\tP(topic)\tP(ordinary)\ttoken\ttype\n";
  std::ostringstream line;
  line << std::fixed << std::setprecision(4);
  for (const TraceStep& s : g.trace) {
    line.str("");
    line << s.step;
    for (std::size_t c = 0; c < 3; ++c) {
      line << '\t';
      if (s.type_dist) line << (*s.type_dist)[c];
      else line << '-';
    }
    line << '\t' << vocab.token_of(s.token) << '\t' << corpus::to_string(s.token_type) << '\n';
    os << line.str();
  }
}

// ---------------------------------------------------------------------------
// Metrics

double perplexity_from_log_probs(std::span<const double> log_probs) {
  if (log_probs.empty()) fail(ErrorKind::InvalidInput, "perplexity: no tokens");
  double nll = 0.0;
  for (double lp : log_probs) {
    if (lp > 0.0 || std::isnan(lp)) fail(ErrorKind::InvalidInput, "perplexity: log-probability must be <= 0");
    nll -= lp;
  }
  return std::exp(nll / static_cast<double>(log_probs.size()));
}

double perplexity(const model::ModelParams& params, std::span<const model::EncodedPair> pairs,
                  double tau, std::size_t batch_size) {
  if (pairs.empty()) fail(ErrorKind::InvalidInput, "perplexity: no pairs");
  if (batch_size == 0) fail(ErrorKind::InvalidInput, "perplexity: batch size must be positive");
  double nll = 0.0;
  std::size_t tokens = 0;
  model::LossOptions opts;
  opts.tau = tau;
  opts.mode = model::Mode::Infer;
  for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, pairs.size() - start);
    Tape tape(false);
    const model::LossResult r = model::batch_loss(tape, params, pairs.subspan(start, n), opts);
    nll += r.phi1;
    tokens += r.tokens;
  }
  return std::max(1.0, std::exp(nll / static_cast<double>(tokens)));
}

double distinct_n(std::span<const Tokens> responses, std::size_t n, DistinctDenominator denominator) {
  if (n == 0) fail(ErrorKind::InvalidInput, "distinct_n: n must be positive");
  if (responses.empty()) fail(ErrorKind::InvalidInput, "distinct_n: no responses");
  std::set<std::vector<std::string>> grams;
  std::size_t tokens = 0, total_grams = 0;
  for (const Tokens& r : responses) {
    tokens += r.size();
    for (std::size_t i = 0; i + n <= r.size(); ++i) {
      grams.emplace(r.begin() + static_cast<std::ptrdiff_t>(i),
                    r.begin() + static_cast<std::ptrdiff_t>(i + n));
      ++total_grams;
    }
  }
  const std::size_t denom = denominator == DistinctDenominator::Tokens ? tokens : total_grams;
  if (denom == 0) return 0.0;
  return static_cast<double>(grams.size()) / static_cast<double>(denom);
}

double trr(std::span<const Tokens> responses, std::span<const std::vector<std::string>> topics) {
  if (responses.size() != topics.size()) {
    fail(ErrorKind::InvalidInput, "trr: responses and topic lists must align");
  }
  if (responses.empty()) fail(ErrorKind::InvalidInput, "trr: no responses");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const std::set<std::string> words(responses[i].begin(), responses[i].end());
    if (std::any_of(topics[i].begin(), topics[i].end(),
                    [&](const std::string& t) { return words.count(t) > 0; })) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(responses.size());
}

namespace {

constexpr std::array<const char*, kNumPatterns> kPatternNames = {
    "Yes-No", "How", "Why", "What", "When", "Who", "Where", "Which", "How-many", "Alternative", "Other"};

constexpr const char* kBuiltinRules =
    "How-many\tany\thow many\n"
    "How-many\tany\thow much\n"
    "Alternative\tany\tor\n"
    "Why\tany\twhy\n"
    "How\tany\thow\n"
    "What\tany\twhat\n"
    "When\tany\twhen\n"
    "Where\tany\twhere\n"
    "Who\tany\twho\n"
    "Who\tany\twhom\n"
    "Who\tany\twhose\n"
    "Which\tany\twhich\n"
    "Yes-No\tlead\tdid\n"
    "Yes-No\tlead\tdo\n"
    "Yes-No\tlead\tdoes\n"
    "Yes-No\tlead\tcan\n"
    "Yes-No\tlead\tcould\n"
    "Yes-No\tlead\twould\n"
    "Yes-No\tlead\tis\n"
    "Yes-No\tlead\tare\n";

bool matches_at(std::span<const std::string> q, std::size_t pos, const Tokens& form) {
  if (pos + form.size() > q.size()) return false;
  return std::equal(form.begin(), form.end(), q.begin() + static_cast<std::ptrdiff_t>(pos));
}

}  // namespace

const char* to_string(PatternClass c) noexcept {
  const auto i = static_cast<std::size_t>(c);
  return i < kNumPatterns ? kPatternNames[i] : "Other";
}

PatternClass parse_pattern(std::string_view name) {
  for (std::size_t i = 0; i < kNumPatterns; ++i) {
    if (name == kPatternNames[i]) return static_cast<PatternClass>(i);
  }
  fail(ErrorKind::Format, "unknown pattern class '" + std::string(name) + "'");
}

PatternRules PatternRules::builtin() {
  std::istringstream in(kBuiltinRules);
  return parse(in);
}

PatternRules PatternRules::parse(std::istream& is) {
  PatternRules rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      fail(ErrorKind::Format, "pattern rules line " + std::to_string(lineno) +
                                  ": expected class<TAB>lead|any<TAB>form");
    }
    Rule r;
    r.cls = parse_pattern(line.substr(0, t1));
    const std::string scope = line.substr(t1 + 1, t2 - t1 - 1);
    if (scope != "lead" && scope != "any") {
      fail(ErrorKind::Format, "pattern rules line " + std::to_string(lineno) + ": scope must be lead or any");
    }
    r.lead_only = scope == "lead";
    r.form = corpus::split_tokens(line.substr(t2 + 1));
    if (r.form.empty()) fail(ErrorKind::Format, "pattern rules line " + std::to_string(lineno) + ": empty form");
    rules.rules_.push_back(std::move(r));
  }
  return rules;
}

PatternRules PatternRules::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open pattern rules " + path);
  return parse(in);
}

void PatternRules::write(std::ostream& os) const {
  for (const Rule& r : rules_) {
    os << to_string(r.cls) << '\t' << (r.lead_only ? "lead" : "any") << '\t'
       << corpus::join_tokens(r.form) << '\n';
  }
}

PatternClass PatternRules::classify(std::span<const std::string> question,
                                    const corpus::TypeLexicons& lexicons) const {
  if (!question.empty() && question.back() == corpus::kEosToken) question = question.first(question.size() - 1);
  if (question.empty()) return PatternClass::Other;
  for (const Rule& r : rules_) {
    if (r.lead_only) {
      if (matches_at(question, 0, r.form)) return r.cls;
      continue;
    }
    for (std::size_t i = 0; i < question.size(); ++i) {
      if (matches_at(question, i, r.form)) return r.cls;
    }
  }
  return corpus::is_question(question, lexicons) ? PatternClass::YesNo : PatternClass::Other;
}

PatternHistogram pattern_histogram(std::span<const Tokens> questions, const PatternRules& rules,
                                   const corpus::TypeLexicons& lexicons) {
  PatternHistogram h{};
  for (const Tokens& q : questions) h[static_cast<std::size_t>(rules.classify(q, lexicons))] += 1.0;
  return h;
}

double pattern_kl(std::span<const double> model_counts, std::span<const double> reference_counts) {
  if (model_counts.size() != kNumPatterns || reference_counts.size() != kNumPatterns) {
    fail(ErrorKind::InvalidInput, "pattern_kl: histograms must have 11 classes");
  }
  double zm = 0.0, zr = 0.0;
  for (std::size_t i = 0; i < kNumPatterns; ++i) {
    if (!(model_counts[i] >= 0.0) || !(reference_counts[i] >= 0.0)) {
      fail(ErrorKind::InvalidInput, "pattern_kl: counts must be non-negative");
    }
    zm += model_counts[i] + 1.0;
    zr += reference_counts[i] + 1.0;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < kNumPatterns; ++i) {
    const double r = (reference_counts[i] + 1.0) / zr;
    const double m = (model_counts[i] + 1.0) / zm;
    kl += r * std::log(r / m);
  }
  return std::max(0.0, kl);
}

std::string to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["variant"] = r.variant;
  j["n_posts"] = r.n_posts;
  j["perplexity"] = r.perplexity;
  j["distinct1"] = r.distinct1;
  j["distinct2"] = r.distinct2;
  j["trr"] = r.trr;
  j["pattern_kl"] = r.pattern_kl;
  return j.dump(2) + "\n";
}

Evaluation evaluate(const DecodingContext& ctx, std::span<const corpus::CorpusPair> test,
                    const PatternRules& rules, const GenerateOptions& options) {
  if (test.empty()) fail(ErrorKind::InvalidInput, "evaluate: empty test set");
  Evaluation ev;
  std::vector<Tokens> generated, references;
  std::vector<std::vector<std::string>> topics;
  std::vector<model::EncodedPair> encoded;
  for (const corpus::CorpusPair& pair : test) {
    Generation g = generate(ctx, pair.post, options);
    const auto ref = corpus::strip_eos(pair.response);
    PostDetail d;
    d.post = corpus::join_tokens(pair.post);
    d.reference = corpus::join_tokens(ref);
    d.generated = corpus::join_tokens(g.tokens);
    const auto topic_list = g.topics.tokens();
    d.topics = corpus::join_tokens(topic_list);
    d.topical = trr(std::span(&g.tokens, 1), std::span(&topic_list, 1)) > 0.0;
    d.ended = g.ended;
    d.pattern = to_string(rules.classify(g.tokens, ctx.lexicons));
    ev.details.push_back(std::move(d));
    generated.push_back(g.tokens);
    references.emplace_back(ref.begin(), ref.end());
    topics.push_back(topic_list);
    encoded.push_back(model::encode_pair(pair, ctx.vocab, ctx.lexicons, ctx.params.variant()));
    ev.generations.push_back(std::move(g));
  }
  MetricReport& r = ev.report;
  r.variant = model::to_string(ctx.params.variant());
  r.n_posts = test.size();
  r.perplexity = perplexity(ctx.params, encoded, options.tau);
  r.distinct1 = distinct_n(generated, 1);
  r.distinct2 = distinct_n(generated, 2);
  r.trr = trr(generated, topics);
  const PatternHistogram model_hist = pattern_histogram(generated, rules, ctx.lexicons);
  const PatternHistogram ref_hist = pattern_histogram(references, rules, ctx.lexicons);
  r.pattern_kl = pattern_kl(model_hist, ref_hist);
  return ev;
}

void write_details_csv(std::ostream& os, std::span<const PostDetail> details) {
  os << "post,reference,generated,topics,topical,ended,pattern\n";
  for (const PostDetail& d : details) {
    os << csv_field(d.post) << ',' << csv_field(d.reference) << ',' << csv_field(d.generated) << ','
       << csv_field(d.topics) << ',' << (d.topical ? 1 : 0) << ',' << (d.ended ? 1 : 0) << ','
       << d.pattern << '\n';
  }
}

}  // namespace tdq::eval
