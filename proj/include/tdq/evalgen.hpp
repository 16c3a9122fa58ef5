#pragma once

// Greedy generation with per-step type traces, and the automatic metrics:
// perplexity, distinct-n, topical response ratio and questioning-pattern KL.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdq/corpus.hpp"
#include "tdq/model.hpp"
#include "tdq/pmi.hpp"

namespace tdq::eval {

inline constexpr std::size_t kMaxGenerationLength = 30;

struct TraceStep {
  std::size_t step = 0;                       // 1-based
  std::optional<std::array<double, 3>> type_dist;  // absent for the plain decoder
  std::vector<std::pair<std::size_t, double>> top;  // up to 10 (id, prob)
  std::size_t token = 0;
  model::WordType token_type = model::WordType::Ordinary;
};

struct Generation {
  corpus::Tokens tokens;  // without the end marker
  bool ended = false;     // emitted EOS before the length cap
  std::vector<TraceStep> trace;
  pmi::TopicPrediction topics;
};

struct GenerateOptions {
  std::size_t max_length = kMaxGenerationLength;
  double tau = 0.8;              // HTD Gumbel-Softmax temperature at inference
  bool sample_noise = false;     // re-enable Gumbel noise for HTD
  std::uint64_t seed = 0;        // noise seed when sample_noise is set
  std::size_t n_topics = pmi::kDefaultTopics;
};

struct DecodingContext {
  const model::ModelParams& params;
  const corpus::Vocabulary& vocab;
  const corpus::TypeLexicons& lexicons;
  const pmi::PmiTable* pmi = nullptr;  // required for HTD; used for topic lists otherwise
};

// Greedy decoding; PAD and BOS are never emitted. For HTD the vocabulary is
// partitioned with the interrogative dictionary and the post's PMI topics.
Generation generate(const DecodingContext& ctx, std::span<const std::string> post,
                    const GenerateOptions& options = {});

// "step\tP(interrogative)\tP(topic)\tP(ordinary)\ttoken\ttype" per line.
void write_trace(std::ostream& os, const Generation& g, const corpus::Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Metrics

// exp(mean negative log-likelihood).
double perplexity_from_log_probs(std::span<const double> log_probs);

// Teacher-forced perplexity; HTD uses P* over each reference's own partition
// with noiseless Gumbel-Softmax at temperature `tau`.
double perplexity(const model::ModelParams& params, std::span<const model::EncodedPair> pairs,
                  double tau = 0.8, std::size_t batch_size = 64);

enum class DistinctDenominator { Tokens, NGrams };

// Distinct n-grams across all responses over total generated tokens (or over
// total n-grams).
double distinct_n(std::span<const corpus::Tokens> responses, std::size_t n,
                  DistinctDenominator denominator = DistinctDenominator::Tokens);

// Fraction of responses sharing at least one token with their post's topics.
double trr(std::span<const corpus::Tokens> responses,
           std::span<const std::vector<std::string>> topics);

enum class PatternClass {
  YesNo,
  How,
  Why,
  What,
  When,
  Who,
  Where,
  Which,
  HowMany,
  Alternative,
  Other,
};
inline constexpr std::size_t kNumPatterns = 11;

const char* to_string(PatternClass c) noexcept;
PatternClass parse_pattern(std::string_view name);

// First-match cascade over surface forms. Lines: "Class<TAB>lead|any<TAB>form".
class PatternRules {
 public:
  static PatternRules builtin();
  static PatternRules parse(std::istream& is);
  static PatternRules load(const std::string& path);

  // Questions that match no rule are Yes-No when they pass is_question,
  // otherwise Other.
  PatternClass classify(std::span<const std::string> question,
                        const corpus::TypeLexicons& lexicons) const;

  void write(std::ostream& os) const;

 private:
  struct Rule {
    PatternClass cls;
    bool lead_only;
    corpus::Tokens form;
  };
  std::vector<Rule> rules_;
};

using PatternHistogram = std::array<double, kNumPatterns>;

PatternHistogram pattern_histogram(std::span<const corpus::Tokens> questions,
                                   const PatternRules& rules,
                                   const corpus::TypeLexicons& lexicons);

// KL(reference || model) after add-one smoothing of both count vectors.
double pattern_kl(std::span<const double> model_counts, std::span<const double> reference_counts);

struct MetricReport {
  double perplexity = 0.0;
  double distinct1 = 0.0;
  double distinct2 = 0.0;
  double trr = 0.0;
  double pattern_kl = 0.0;
  std::size_t n_posts = 0;
  std::string variant;
};

std::string to_json(const MetricReport& r);

struct PostDetail {
  std::string post;
  std::string reference;
  std::string generated;
  std::string topics;  // space-separated PMI topics
  bool topical = false;
  bool ended = false;
  std::string pattern;
};

struct Evaluation {
  MetricReport report;
  std::vector<PostDetail> details;
  std::vector<Generation> generations;
};

Evaluation evaluate(const DecodingContext& ctx, std::span<const corpus::CorpusPair> test,
                    const PatternRules& rules, const GenerateOptions& options = {});

void write_details_csv(std::ostream& os, std::span<const PostDetail> details);

}  // namespace tdq::eval
