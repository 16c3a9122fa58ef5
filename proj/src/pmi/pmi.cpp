#include "tdq/pmi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "tdq/binary_io.hpp"
#include "tdq/error.hpp"

namespace tdq::pmi {

namespace {

constexpr char kMagic[9] = "TDQPMI\0\1";
constexpr std::uint32_t kVersion = 1;

std::set<std::string> distinct(std::span<const std::string> tokens) {
  std::set<std::string> out;
  for (const std::string& t : tokens) {
    if (t != corpus::kEosToken) out.insert(t);
  }
  return out;
}

template <typename Map>
void drop_below(Map& m, std::uint64_t min_count) {
  std::erase_if(m, [min_count](const auto& kv) { return kv.second < min_count; });
}

}  // namespace

std::vector<std::string> TopicPrediction::tokens() const {
  std::vector<std::string> out;
  out.reserve(topics.size());
  for (const ScoredTopic& t : topics) out.push_back(t.token);
  return out;
}

PmiTable PmiTable::build(std::span<const corpus::CorpusPair> pairs, std::uint64_t min_count) {
  if (pairs.empty()) fail(ErrorKind::InvalidInput, "PMI table needs at least one pair");
  if (min_count == 0) fail(ErrorKind::InvalidInput, "min_count must be at least 1");
  PmiTable table;
  table.n_pairs_ = pairs.size();
  table.min_count_ = min_count;
  for (const corpus::CorpusPair& p : pairs) {
    const auto post = distinct(p.post);
    const auto response = distinct(p.response);
    for (const std::string& x : post) ++table.post_[x];
    for (const std::string& y : response) ++table.response_[y];
    for (const std::string& x : post) {
      for (const std::string& y : response) ++table.joint_[{x, y}];
    }
  }
  drop_below(table.post_, min_count);
  drop_below(table.response_, min_count);
  drop_below(table.joint_, min_count);
  return table;
}

std::uint64_t PmiTable::post_count(const std::string& token) const {
  auto it = post_.find(token);
  return it == post_.end() ? 0 : it->second;
}

std::uint64_t PmiTable::response_count(const std::string& token) const {
  auto it = response_.find(token);
  return it == response_.end() ? 0 : it->second;
}

std::uint64_t PmiTable::joint_count(const std::string& post_token,
                                    const std::string& response_token) const {
  auto it = joint_.find({post_token, response_token});
  return it == joint_.end() ? 0 : it->second;
}

// p(x,y) / (p1(x) p2(y)) = joint * n / (post * response); 0 when undefined.
double PmiTable::ratio(const std::string& post_token, const std::string& response_token) const {
  const std::uint64_t joint = joint_count(post_token, response_token);
  if (joint == 0) return 0.0;
  const std::uint64_t px = post_count(post_token);
  const std::uint64_t py = response_count(response_token);
  if (px == 0 || py == 0) return 0.0;
  return (static_cast<double>(joint) * static_cast<double>(n_pairs_)) /
         (static_cast<double>(px) * static_cast<double>(py));
}

std::optional<double> PmiTable::try_pmi(const std::string& post_token,
                                        const std::string& response_token) const {
  const double r = ratio(post_token, response_token);
  if (r == 0.0) return std::nullopt;
  return std::log(r);
}

double PmiTable::pmi(const std::string& post_token, const std::string& response_token) const {
  auto v = try_pmi(post_token, response_token);
  if (!v) {
    fail(ErrorKind::UndefinedPair,
         "PMI(" + post_token + ", " + response_token + ") is undefined (zero count)");
  }
  return *v;
}

double PmiTable::rel(const std::string& candidate, std::span<const std::string> post) const {
  double total = 0.0;
  for (const std::string& x : distinct(post)) total += ratio(x, candidate);
  return total;
}

TopicPrediction PmiTable::predict_topics(std::span<const std::string> post,
                                         const corpus::TypeLexicons& lexicons,
                                         std::size_t n) const {
  if (n == 0) fail(ErrorKind::InvalidInput, "predict_topics needs n >= 1");
  TopicPrediction out;
  out.post.assign(post.begin(), post.end());
  for (const auto& [token, count] : response_) {
    if (!lexicons.is_content(token)) continue;
    const double r = rel(token, post);
    if (r > 0.0) out.topics.push_back({token, r});
  }
  std::stable_sort(out.topics.begin(), out.topics.end(),
                   [](const ScoredTopic& a, const ScoredTopic& b) {
                     if (a.rel != b.rel) return a.rel > b.rel;
                     return a.token < b.token;
                   });
  if (out.topics.size() > n) out.topics.resize(n);
  return out;
}

void PmiTable::write(std::ostream& os) const {
  io::write_magic(os, kMagic);
  io::write_u32(os, kVersion);
  io::write_u64(os, n_pairs_);
  io::write_u64(os, min_count_);
  io::write_u64(os, post_.size());
  for (const auto& [t, c] : post_) {
    io::write_string(os, t);
    io::write_u64(os, c);
  }
  io::write_u64(os, response_.size());
  for (const auto& [t, c] : response_) {
    io::write_string(os, t);
    io::write_u64(os, c);
  }
  io::write_u64(os, joint_.size());
  for (const auto& [k, c] : joint_) {
    io::write_string(os, k.first);
    io::write_string(os, k.second);
    io::write_u64(os, c);
  }
}

PmiTable PmiTable::read(std::istream& is) {
  io::expect_magic(is, kMagic, "PMI table");
  const std::uint32_t version = io::read_u32(is, "PMI version");
  if (version != kVersion) {
    fail(ErrorKind::Format, "unsupported PMI table version " + std::to_string(version));
  }
  PmiTable table;
  table.n_pairs_ = io::read_u64(is, "PMI header");
  table.min_count_ = io::read_u64(is, "PMI header");
  if (table.n_pairs_ == 0 || table.min_count_ == 0) fail(ErrorKind::Format, "invalid PMI header");
  auto read_counts = [&](Counts& out, const char* what) {
    const std::uint64_t n = io::read_u64(is, what);
    std::string prev;
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string t = io::read_string(is, what);
      const std::uint64_t c = io::read_u64(is, what);
      if (c > table.n_pairs_) fail(ErrorKind::Format, std::string("count exceeds n_pairs in ") + what);
      if (i > 0 && !(prev < t)) fail(ErrorKind::Format, std::string("unsorted section ") + what);
      prev = t;
      out.emplace_hint(out.end(), std::move(t), c);
    }
  };
  read_counts(table.post_, "post counts");
  read_counts(table.response_, "response counts");
  const std::uint64_t nj = io::read_u64(is, "joint counts");
  for (std::uint64_t i = 0; i < nj; ++i) {
    std::string x = io::read_string(is, "joint counts");
    std::string y = io::read_string(is, "joint counts");
    const std::uint64_t c = io::read_u64(is, "joint counts");
    if (c > table.n_pairs_) fail(ErrorKind::Format, "joint count exceeds n_pairs");
    table.joint_.emplace_hint(table.joint_.end(), std::make_pair(std::move(x), std::move(y)), c);
  }
  if (table.joint_.size() != nj) fail(ErrorKind::Format, "duplicate joint entries");
  return table;
}

void PmiTable::save(const std::string& path) const {
  io::write_atomically(path, [this](std::ostream& os) { write(os); });
}

PmiTable PmiTable::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot read PMI table " + path);
  return read(is);
}

void PmiTable::write_tsv(std::ostream& os) const {
  os << "#n_pairs\t" << n_pairs_ << "\n#min_count\t" << min_count_ << '\n';
  for (const auto& [t, c] : post_) os << "post\t" << t << "\t\t" << c << '\n';
  for (const auto& [t, c] : response_) os << "response\t" << t << "\t\t" << c << '\n';
  for (const auto& [k, c] : joint_) os << "joint\t" << k.first << '\t' << k.second << '\t' << c << '\n';
}

}  // namespace tdq::pmi
