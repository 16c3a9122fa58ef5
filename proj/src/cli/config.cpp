#include "tdq/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "tdq/error.hpp"

namespace tdq::config {

namespace {

[[noreturn]] void bad(std::string_view source, const std::string& key, const std::string& why) {
  fail(ErrorKind::Usage, std::string(source) + ": " + key + ": " + why);
}

double as_real(const toml::node& n, std::string_view source, const std::string& key) {
  if (auto v = n.value_exact<double>()) return *v;
  if (auto v = n.value_exact<std::int64_t>()) return static_cast<double>(*v);
  bad(source, key, "expected a number");
}

std::uint64_t as_count(const toml::node& n, std::string_view source, const std::string& key) {
  auto v = n.value_exact<std::int64_t>();
  if (!v) bad(source, key, "expected an integer");
  if (*v < 0) bad(source, key, "must not be negative");
  return static_cast<std::uint64_t>(*v);
}

void apply_key(const std::string& key, const toml::node& n, train::TrainConfig& c,
               std::string_view source) {
  if (key == "epochs") c.epochs = as_count(n, source, key);
  else if (key == "batch_size") c.batch_size = as_count(n, source, key);
  else if (key == "learning_rate") c.learning_rate = as_real(n, source, key);
  else if (key == "clip_norm") c.clip_norm = as_real(n, source, key);
  else if (key == "lambda") c.lambda = as_real(n, source, key);
  else if (key == "tau_initial") c.tau_initial = as_real(n, source, key);
  else if (key == "tau_final") c.tau_final = as_real(n, source, key);
  else if (key == "tau_switch_step") c.tau_switch_step = as_count(n, source, key);
  else if (key == "seed") c.seed = as_count(n, source, key);
  else if (key == "validation_fraction") c.validation_fraction = as_real(n, source, key);
  else if (key == "patience") c.patience = as_count(n, source, key);
  else if (key == "vocab_cap") c.vocab_cap = as_count(n, source, key);
  else if (key == "d_emb") c.d_emb = as_count(n, source, key);
  else if (key == "d_hidden") c.d_hidden = as_count(n, source, key);
  else if (key == "layers") c.layers = as_count(n, source, key);
  else bad(source, key, "unknown key");
}

}  // namespace

void apply_toml(std::string_view document, train::TrainConfig& config, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(document, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ": " << e.description();
    fail(ErrorKind::Usage, msg.str());
  }
  train::TrainConfig out = config;
  for (const auto& [k, node] : root) {
    const std::string key(k.str());
    if (const toml::table* section = node.as_table()) {
      if (key != "train" && key != "model") bad(source, key, "unknown section");
      for (const auto& [sk, sn] : *section) apply_key(std::string(sk.str()), sn, out, source);
    } else {
      apply_key(key, node, out, source);
    }
  }
  config = out;
}

void apply_toml_file(const std::string& path, train::TrainConfig& config) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config " + path);
  std::ostringstream body;
  body << in.rdbuf();
  apply_toml(body.str(), config, path);
}

std::string to_toml(const train::TrainConfig& c) {
  std::ostringstream os;
  auto real = [&](const char* k, double v) {
    char buf[32];
    std::string s(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    os << k << " = " << s << '\n';
  };
  os << "[train]\n";
  os << "epochs = " << c.epochs << '\n';
  os << "batch_size = " << c.batch_size << '\n';
  real("learning_rate", c.learning_rate);
  real("clip_norm", c.clip_norm);
  real("lambda", c.lambda);
  real("tau_initial", c.tau_initial);
  real("tau_final", c.tau_final);
  os << "tau_switch_step = " << c.tau_switch_step << '\n';
  os << "seed = " << c.seed << '\n';
  real("validation_fraction", c.validation_fraction);
  os << "patience = " << c.patience << '\n';
  os << "vocab_cap = " << c.vocab_cap << '\n';
  os << "\n[model]\n";
  os << "d_emb = " << c.d_emb << '\n';
  os << "d_hidden = " << c.d_hidden << '\n';
  os << "layers = " << c.layers << '\n';
  return os.str();
}

}  // namespace tdq::config
