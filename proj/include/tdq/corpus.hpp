#pragma once

// Post/question pairs: loading, question distillation, word-type tagging,
// vocabulary construction, and a seeded synthetic corpus.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tdq::corpus {

enum class WordType : std::uint8_t { Interrogative = 0, Topic = 1, Ordinary = 2 };
inline constexpr std::size_t kNumTypes = 3;

const char* to_string(WordType t) noexcept;

using Tokens = std::vector<std::string>;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kBosId = 1;
inline constexpr std::size_t kEosId = 2;
inline constexpr std::size_t kUnkId = 3;
inline constexpr std::size_t kNumReserved = 4;

inline constexpr std::size_t kDefaultMaxLen = 30;

struct CorpusPair {
  Tokens post;
  // After tagging, the response ends with kEosToken.
  Tokens response;
  // Empty until tag_pair() runs; then one entry per response token.
  std::vector<WordType> response_types;

  bool typed() const noexcept { return !response_types.empty(); }
};

Tokens split_tokens(std::string_view text);
std::string join_tokens(std::span<const std::string> tokens);
// Response without a trailing end marker.
std::span<const std::string> strip_eos(const Tokens& response);

// ---------------------------------------------------------------------------
// Lexicons

struct ContentFlags {
  bool noun = false;
  bool verb = false;
};

class TypeLexicons {
 public:
  // Lexicons shipped with the project (also under data/).
  static TypeLexicons builtin();
  static TypeLexicons load(const std::string& interrogatives_path,
                           const std::string& content_path);
  static TypeLexicons parse(std::istream& interrogatives, std::istream& content);

  // Surface form, possibly several space-separated tokens.
  void add_interrogative(std::string_view surface);
  void add_content(const std::string& token, ContentFlags flags);

  // True for every token that occurs in some interrogative surface form.
  bool is_interrogative_token(std::string_view token) const;
  // Length in tokens of the longest interrogative form starting at `pos`.
  std::size_t match_interrogative(std::span<const std::string> tokens,
                                  std::size_t pos) const;
  bool is_content(std::string_view token) const;
  ContentFlags content_flags(std::string_view token) const;

  const std::vector<Tokens>& interrogative_forms() const noexcept { return forms_; }
  const std::set<std::string, std::less<>>& interrogative_tokens() const noexcept {
    return interrogative_tokens_;
  }
  const std::map<std::string, ContentFlags, std::less<>>& content() const noexcept {
    return content_;
  }

  void write_interrogatives(std::ostream& os) const;
  void write_content(std::ostream& os) const;

 private:
  std::vector<Tokens> forms_;
  std::set<std::string, std::less<>> interrogative_tokens_;
  std::map<std::string, ContentFlags, std::less<>> content_;
};

// ---------------------------------------------------------------------------
// Loading and distillation

struct LoadReport {
  std::size_t lines = 0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
  std::vector<std::size_t> skipped_lines;  // 1-based
};

struct LoadResult {
  std::vector<CorpusPair> pairs;
  LoadReport report;
};

// Untyped pairs in file order. Blank and malformed lines (no tab, empty side,
// longer than max_len) are skipped and counted; more than 10% malformed
// non-blank lines is a Format error.
LoadResult load_pairs(const std::string& path, std::size_t max_len = kDefaultMaxLen);
LoadResult parse_pairs(std::istream& is, std::size_t max_len = kDefaultMaxLen);

// One "post TAB response" line per pair; the end marker is not written.
void write_pairs(std::ostream& os, std::span<const CorpusPair> pairs);
void save_pairs(const std::string& path, std::span<const CorpusPair> pairs);

bool is_question(std::span<const std::string> response, const TypeLexicons& lex);

// Drops pairs whose exact response string is paired with more than
// `threshold` distinct post strings.
std::vector<CorpusPair> filter_universal(std::span<const CorpusPair> pairs,
                                         std::size_t threshold);

// Interrogative > Topic (noun/verb) > Ordinary; the end marker is Ordinary.
std::vector<WordType> tag_types(std::span<const std::string> response,
                                const TypeLexicons& lex);

// Appends the end marker (if missing) and fills response_types.
CorpusPair tag_pair(CorpusPair pair, const TypeLexicons& lex);

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary from_tokens(std::span<const std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  // Unknown tokens map to kUnkId.
  std::size_t id_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  // Throws Range on an invalid id.
  const std::string& token_of(std::size_t id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;

 private:
  void append(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// The `cap` most frequent post and response tokens (ties broken
// lexicographically) after the four reserved symbols.
Vocabulary build_vocab(std::span<const CorpusPair> pairs, std::size_t cap);

// ---------------------------------------------------------------------------
// Synthetic corpus

// Deterministic templated scene corpus; responses are typed.
std::vector<CorpusPair> synth_corpus(std::uint64_t seed, std::size_t n);

}  // namespace tdq::corpus
