#pragma once

// Post/response co-occurrence statistics and PMI-based topic prediction.
//
// Counts use document frequency: a token counts once per post (or response)
// however often it repeats there, and a (post token, response token) pair
// counts once per corpus pair.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tdq/corpus.hpp"

namespace tdq::pmi {

inline constexpr std::size_t kDefaultTopics = 20;

struct ScoredTopic {
  std::string token;
  double rel = 0.0;
};

struct TopicPrediction {
  corpus::Tokens post;
  // Sorted by rel descending, ties by token.
  std::vector<ScoredTopic> topics;

  std::vector<std::string> tokens() const;
};

class PmiTable {
 public:
  using Counts = std::map<std::string, std::uint64_t, std::less<>>;
  using JointCounts = std::map<std::pair<std::string, std::string>, std::uint64_t>;

  // Throws InvalidInput on an empty corpus or min_count == 0. Entries whose
  // count is below min_count are dropped from all three sections.
  static PmiTable build(std::span<const corpus::CorpusPair> pairs, std::uint64_t min_count = 1);

  std::uint64_t n_pairs() const noexcept { return n_pairs_; }
  std::uint64_t min_count() const noexcept { return min_count_; }

  std::uint64_t post_count(const std::string& token) const;
  std::uint64_t response_count(const std::string& token) const;
  std::uint64_t joint_count(const std::string& post_token, const std::string& response_token) const;

  const Counts& post_counts() const noexcept { return post_; }
  const Counts& response_counts() const noexcept { return response_; }
  const JointCounts& joint_counts() const noexcept { return joint_; }

  // Natural-log PMI. Throws UndefinedPair when either marginal or the joint
  // count is zero.
  double pmi(const std::string& post_token, const std::string& response_token) const;
  std::optional<double> try_pmi(const std::string& post_token,
                                const std::string& response_token) const;

  // Sum over distinct post tokens of e^PMI(w, candidate); undefined pairs
  // contribute nothing.
  double rel(const std::string& candidate, std::span<const std::string> post) const;

  // Response-side tokens flagged noun or verb, top-n by rel with rel > 0.
  TopicPrediction predict_topics(std::span<const std::string> post,
                                 const corpus::TypeLexicons& lexicons,
                                 std::size_t n = kDefaultTopics) const;

  void write(std::ostream& os) const;
  static PmiTable read(std::istream& is);
  void save(const std::string& path) const;
  static PmiTable load(const std::string& path);
  void write_tsv(std::ostream& os) const;

  bool operator==(const PmiTable&) const = default;

 private:
  double ratio(const std::string& post_token, const std::string& response_token) const;

  std::uint64_t n_pairs_ = 0;
  std::uint64_t min_count_ = 1;
  Counts post_;
  Counts response_;
  JointCounts joint_;
};

}  // namespace tdq::pmi
