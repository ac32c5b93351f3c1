#include "clb/tokenize.hpp"

#include <cctype>

namespace clb {
namespace {

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return std::islower(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

void emit(std::string_view word, std::vector<std::string>& out) {
  if (word.size() < 2) return;
  std::string t(word);
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  out.push_back(std::move(t));
}

void split_identifier(std::string_view w, std::vector<std::string>& out) {
  std::size_t start = 0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    const char prev = w[i - 1];
    const char cur = w[i];
    const bool next_lower = i + 1 < w.size() && is_lower(w[i + 1]);
    const bool boundary = (is_lower(prev) && is_upper(cur)) ||
                          (is_upper(prev) && is_upper(cur) && next_lower) ||
                          (is_digit(prev) != is_digit(cur));
    if (boundary) {
      emit(w.substr(start, i - start), out);
      start = i;
    }
  }
  emit(w.substr(start), out);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_alnum(text[i])) ++i;
    const auto start = i;
    while (i < text.size() && is_alnum(text[i])) ++i;
    if (i > start) split_identifier(text.substr(start, i - start), out);
  }
  return out;
}

}  // namespace clb
