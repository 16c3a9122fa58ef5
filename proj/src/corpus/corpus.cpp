#include "tdq/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "scenes.hpp"
#include "tdq/binary_io.hpp"
#include "tdq/error.hpp"
#include "tdq/rng.hpp"

namespace tdq::corpus {

const char* to_string(WordType t) noexcept {
  switch (t) {
    case WordType::Interrogative: return "interrogative";
    case WordType::Topic: return "topic";
    case WordType::Ordinary: return "ordinary";
  }
  return "unknown";
}

Tokens split_tokens(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\r' || text[i] == '\n')) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\r' && text[j] != '\n') ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::span<const std::string> strip_eos(const Tokens& response) {
  std::span<const std::string> view(response);
  if (!view.empty() && view.back() == kEosToken) view = view.first(view.size() - 1);
  return view;
}

// ---------------------------------------------------------------------------
// TypeLexicons

TypeLexicons TypeLexicons::builtin() {
  TypeLexicons lex;
  for (std::string_view form : detail::default_interrogatives()) lex.add_interrogative(form);
  for (const detail::Scene& scene : detail::scenes()) {
    for (std::string_view v : scene.verbs) lex.add_content(std::string(v), {false, true});
    for (std::string_view o : scene.objects) lex.add_content(std::string(o), {true, false});
    for (std::string_view r : scene.related) lex.add_content(std::string(r), {true, false});
  }
  for (std::string_view g : detail::generic_topics()) lex.add_content(std::string(g), {true, false});
  return lex;
}

TypeLexicons TypeLexicons::load(const std::string& interrogatives_path,
                                const std::string& content_path) {
  std::ifstream interrogatives(interrogatives_path);
  if (!interrogatives) fail(ErrorKind::Io, "cannot read " + interrogatives_path);
  std::ifstream content(content_path);
  if (!content) fail(ErrorKind::Io, "cannot read " + content_path);
  return parse(interrogatives, content);
}

TypeLexicons TypeLexicons::parse(std::istream& interrogatives, std::istream& content) {
  TypeLexicons lex;
  std::string line;
  while (std::getline(interrogatives, line)) {
    if (!split_tokens(line).empty() && line.front() != '#') lex.add_interrogative(line);
  }
  std::size_t lineno = 0;
  while (std::getline(content, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(ErrorKind::Format, "content lexicon line " + std::to_string(lineno) + ": missing tab");
    }
    const std::string token = line.substr(0, tab);
    const std::string flags = line.substr(tab + 1);
    ContentFlags f;
    if (flags == "n") {
      f.noun = true;
    } else if (flags == "v") {
      f.verb = true;
    } else if (flags == "nv" || flags == "vn") {
      f.noun = f.verb = true;
    } else {
      fail(ErrorKind::Format, "content lexicon line " + std::to_string(lineno) +
                                  ": flags must be n, v or nv");
    }
    lex.add_content(token, f);
  }
  return lex;
}

void TypeLexicons::add_interrogative(std::string_view surface) {
  Tokens form = split_tokens(surface);
  if (form.empty()) return;
  if (std::find(forms_.begin(), forms_.end(), form) != forms_.end()) return;
  for (const std::string& t : form) interrogative_tokens_.insert(t);
  forms_.push_back(std::move(form));
}

void TypeLexicons::add_content(const std::string& token, ContentFlags flags) {
  ContentFlags& slot = content_[token];
  slot.noun = slot.noun || flags.noun;
  slot.verb = slot.verb || flags.verb;
}

bool TypeLexicons::is_interrogative_token(std::string_view token) const {
  return interrogative_tokens_.find(token) != interrogative_tokens_.end();
}

std::size_t TypeLexicons::match_interrogative(std::span<const std::string> tokens,
                                              std::size_t pos) const {
  std::size_t best = 0;
  for (const Tokens& form : forms_) {
    if (form.size() <= best || pos + form.size() > tokens.size()) continue;
    if (std::equal(form.begin(), form.end(), tokens.begin() + pos)) best = form.size();
  }
  return best;
}

bool TypeLexicons::is_content(std::string_view token) const {
  auto it = content_.find(token);
  return it != content_.end() && (it->second.noun || it->second.verb);
}

ContentFlags TypeLexicons::content_flags(std::string_view token) const {
  auto it = content_.find(token);
  return it == content_.end() ? ContentFlags{} : it->second;
}

void TypeLexicons::write_interrogatives(std::ostream& os) const {
  for (const Tokens& form : forms_) os << join_tokens(form) << '\n';
}

void TypeLexicons::write_content(std::ostream& os) const {
  for (const auto& [token, flags] : content_) {
    os << token << '\t' << (flags.noun ? "n" : "") << (flags.verb ? "v" : "") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Loading

LoadResult parse_pairs(std::istream& is, std::size_t max_len) {
  LoadResult result;
  std::size_t nonblank = 0;
  std::size_t malformed = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++result.report.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = split_tokens(line).empty() && line.find('\t') == std::string::npos;
    if (blank) {
      ++result.report.skipped;
      result.report.skipped_lines.push_back(result.report.lines);
      continue;
    }
    ++nonblank;
    const auto tab = line.find('\t');
    bool ok = tab != std::string::npos && line.find('\t', tab + 1) == std::string::npos;
    CorpusPair pair;
    if (ok) {
      pair.post = split_tokens(std::string_view(line).substr(0, tab));
      pair.response = split_tokens(std::string_view(line).substr(tab + 1));
      ok = !pair.post.empty() && !pair.response.empty() &&
           pair.post.size() <= max_len && pair.response.size() <= max_len;
    }
    if (!ok) {
      ++malformed;
      ++result.report.skipped;
      result.report.skipped_lines.push_back(result.report.lines);
      continue;
    }
    result.pairs.push_back(std::move(pair));
  }
  if (is.bad()) fail(ErrorKind::Io, "read error while loading pairs");
  if (nonblank > 0 && malformed * 10 > nonblank) {
    fail(ErrorKind::Format, std::to_string(malformed) + " of " + std::to_string(nonblank) +
                                " lines are malformed (more than 10%)");
  }
  result.report.pairs = result.pairs.size();
  return result;
}

LoadResult load_pairs(const std::string& path, std::size_t max_len) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot read corpus " + path);
  return parse_pairs(is, max_len);
}

void write_pairs(std::ostream& os, std::span<const CorpusPair> pairs) {
  for (const CorpusPair& p : pairs) {
    os << join_tokens(p.post) << '\t' << join_tokens(strip_eos(p.response)) << '\n';
  }
}

void save_pairs(const std::string& path, std::span<const CorpusPair> pairs) {
  io::write_atomically(path, [&](std::ostream& os) { write_pairs(os, pairs); });
}

// ---------------------------------------------------------------------------
// Distillation and tagging

bool is_question(std::span<const std::string> response, const TypeLexicons& lex) {
  if (!response.empty() && response.back() == kEosToken) {
    response = response.first(response.size() - 1);
  }
  if (response.empty()) return false;
  if (response.back() == "?") return true;
  const std::size_t lead = lex.match_interrogative(response, 0);
  return lead > 0 && response.front() != "?";
}

std::vector<CorpusPair> filter_universal(std::span<const CorpusPair> pairs,
                                         std::size_t threshold) {
  std::unordered_map<std::string, std::unordered_set<std::string>> posts_per_response;
  std::vector<std::string> keys;
  keys.reserve(pairs.size());
  for (const CorpusPair& p : pairs) {
    keys.push_back(join_tokens(strip_eos(p.response)));
    posts_per_response[keys.back()].insert(join_tokens(p.post));
  }
  std::vector<CorpusPair> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (posts_per_response[keys[i]].size() <= threshold) kept.push_back(pairs[i]);
  }
  return kept;
}

std::vector<WordType> tag_types(std::span<const std::string> response,
                                const TypeLexicons& lex) {
  std::vector<WordType> types;
  types.reserve(response.size());
  for (const std::string& token : response) {
    if (token == kEosToken) {
      types.push_back(WordType::Ordinary);
    } else if (lex.is_interrogative_token(token)) {
      types.push_back(WordType::Interrogative);
    } else if (lex.is_content(token)) {
      types.push_back(WordType::Topic);
    } else {
      types.push_back(WordType::Ordinary);
    }
  }
  return types;
}

CorpusPair tag_pair(CorpusPair pair, const TypeLexicons& lex) {
  if (pair.response.empty() || pair.response.back() != kEosToken) {
    pair.response.emplace_back(kEosToken);
  }
  pair.response_types = tag_types(pair.response, lex);
  return pair;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  append(std::string(kPadToken));
  append(std::string(kBosToken));
  append(std::string(kEosToken));
  append(std::string(kUnkToken));
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  if (tokens.size() < kNumReserved || tokens[kPadId] != kPadToken ||
      tokens[kBosId] != kBosToken || tokens[kEosId] != kEosToken ||
      tokens[kUnkId] != kUnkToken) {
    fail(ErrorKind::Format, "vocabulary must start with the four reserved symbols");
  }
  Vocabulary v;
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) {
    if (v.ids_.count(tokens[i])) fail(ErrorKind::Format, "duplicate vocabulary entry " + tokens[i]);
    v.append(tokens[i]);
  }
  return v;
}

void Vocabulary::append(std::string token) {
  ids_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
}

std::size_t Vocabulary::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token_of(std::size_t id) const {
  if (id >= tokens_.size()) {
    fail(ErrorKind::Range, "token id " + std::to_string(id) + " outside vocabulary of " +
                               std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

std::vector<std::size_t> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(id_of(t));
  return ids;
}

Vocabulary build_vocab(std::span<const CorpusPair> pairs, std::size_t cap) {
  std::unordered_map<std::string, std::size_t> counts;
  auto count = [&](std::span<const std::string> tokens) {
    for (const std::string& t : tokens) {
      if (t == kPadToken || t == kBosToken || t == kEosToken || t == kUnkToken) continue;
      ++counts[t];
    }
  };
  for (const CorpusPair& p : pairs) {
    count(p.post);
    count(p.response);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > cap) ranked.resize(cap);
  std::vector<std::string> tokens = {std::string(kPadToken), std::string(kBosToken),
                                     std::string(kEosToken), std::string(kUnkToken)};
  for (auto& [token, n] : ranked) tokens.push_back(token);
  return Vocabulary::from_tokens(tokens);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

// Share of questions whose topic slot holds a scene-independent noun.
constexpr double kGenericShare = 0.4;

Tokens fill_template(std::string_view text, std::string_view topic) {
  Tokens out;
  for (std::string& t : split_tokens(text)) {
    out.push_back(t == "{}" ? std::string(topic) : std::move(t));
  }
  return out;
}

}  // namespace

std::vector<CorpusPair> synth_corpus(std::uint64_t seed, std::size_t n) {
  if (n == 0) fail(ErrorKind::InvalidInput, "synth_corpus needs n >= 1");
  const TypeLexicons lex = TypeLexicons::builtin();
  const auto scenes = detail::scenes();
  const auto templates = detail::templates();
  const auto generic = detail::generic_topics();
  const auto tails = detail::post_tails();

  Rng rng(seed);
  std::vector<CorpusPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const detail::Scene& scene = scenes[rng.below(scenes.size())];
    CorpusPair pair;
    pair.post = {"i", std::string(scene.verbs[rng.below(scene.verbs.size())]),
                 std::string(scene.objects[rng.below(scene.objects.size())])};
    for (std::string& t : split_tokens(tails[rng.below(tails.size())])) {
      pair.post.push_back(std::move(t));
    }
    std::string_view topic;
    if (rng.uniform() < kGenericShare) {
      topic = generic[rng.below(generic.size())];
    } else {
      topic = scene.related[rng.below(scene.related.size())];
    }
    const detail::Template& tmpl = templates[rng.below(templates.size())];
    pair.response = fill_template(tmpl.text, topic);
    out.push_back(tag_pair(std::move(pair), lex));
  }
  return out;
}

}  // namespace tdq::corpus
