#pragma once

#include <cctype>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coref {

// Malformed input data: CoNLL-U syntax, entity brackets, markup, config.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Non-fatal notes collected while processing (dropped mentions, retries,
// chain breaks). Never alter outputs.
using Diagnostics = std::vector<std::string>;

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

inline std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Count of whitespace-separated tokens; the default length function for
// frame/tuple budgets.
inline long whitespace_token_count(std::string_view text) {
  long count = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_ascii_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

inline long byte_count(std::string_view text) { return static_cast<long>(text.size()); }

}  // namespace coref
