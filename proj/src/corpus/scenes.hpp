#pragma once

// Bundled tables behind the synthetic corpus and the default lexicons.

#include <array>
#include <span>
#include <string_view>

namespace tdq::corpus::detail {

struct Scene {
  std::string_view name;
  std::array<std::string_view, 2> verbs;
  std::array<std::string_view, 3> objects;
  std::array<std::string_view, 24> related;
};

struct Template {
  std::string_view pattern;  // questioning pattern the template realises
  std::string_view text;     // "{}" marks the topic slot
};

std::span<const Scene> scenes();
std::span<const Template> templates();
std::span<const std::string_view> generic_topics();
std::span<const std::string_view> post_tails();
std::span<const std::string_view> default_interrogatives();

}  // namespace tdq::corpus::detail
