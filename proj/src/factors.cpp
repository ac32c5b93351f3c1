#include "clb/factors.hpp"

#include <cctype>
#include <string>

#include <spdlog/spdlog.h>

#include "clb/diff.hpp"
#include "clb/error.hpp"

namespace clb {

double FactorVector::get(std::string_view name) const {
  if (name == "LOC") return loc;
  if (name == "MLOC") return mloc;
  if (name == "VG") return vg;
  if (name == "PRE") return pre;
  if (name == "Churn") return churn;
  throw ValidationError("unknown factor '" + std::string(name) + "'");
}

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

int count_branches(const std::string& code) {
  int n = 0;
  std::size_t i = 0;
  while (i < code.size()) {
    const char c = code[i];
    if (ident_char(c)) {
      auto start = i;
      while (i < code.size() && ident_char(code[i])) ++i;
      const std::string_view word(code.data() + start, i - start);
      if (word == "if" || word == "for" || word == "while" || word == "case" || word == "catch") {
        ++n;
      }
      continue;
    }
    if ((c == '&' || c == '|') && i + 1 < code.size() && code[i + 1] == c) {
      ++n;
      i += 2;
      continue;
    }
    if (c == '?') ++n;
    ++i;
  }
  return n;
}

}  // namespace

SourceMetrics source_metrics(std::string_view content) {
  enum class State { code, line_comment, block_comment, string };
  State state = State::code;
  char quote = 0;
  SourceMetrics m;
  std::string code;  // comments removed, literals blanked
  bool line_has_text = false;
  bool line_has_code = false;
  int branches = 0;

  auto end_line = [&] {
    if (line_has_text) ++m.loc;
    if (line_has_code) ++m.mloc;
    line_has_text = line_has_code = false;
    branches += count_branches(code);
    code.clear();
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    const char next = i + 1 < content.size() ? content[i + 1] : '\0';
    if (c == '\n') {
      if (state == State::line_comment || state == State::string) state = State::code;
      end_line();
      continue;
    }
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space) line_has_text = true;
    switch (state) {
      case State::code:
        if (c == '/' && next == '/') {
          state = State::line_comment;
          ++i;
        } else if (c == '/' && next == '*') {
          state = State::block_comment;
          ++i;
        } else if (c == '#') {
          state = State::line_comment;
        } else if (c == '"' || c == '\'') {
          state = State::string;
          quote = c;
          line_has_code = true;
          code.push_back(' ');
        } else {
          if (!space) line_has_code = true;
          code.push_back(c);
        }
        break;
      case State::line_comment:
        break;
      case State::block_comment:
        if (c == '*' && next == '/') {
          state = State::code;
          ++i;
        }
        break;
      case State::string:
        if (c == '\\') {
          ++i;
        } else if (c == quote) {
          state = State::code;
        }
        code.push_back(' ');
        break;
    }
  }
  end_line();
  m.vg = 1 + branches;
  return m;
}

namespace {

std::string strip_diff_markers(std::string_view body) {
  std::string out;
  out.reserve(body.size());
  bool at_line_start = true;
  for (char c : body) {
    if (at_line_start) {
      at_line_start = false;
      if (c == '+' || c == '-' || c == ' ') continue;
    }
    out.push_back(c);
    if (c == '\n') at_line_start = true;
  }
  return out;
}

}  // namespace

FactorVector compute_factors(const CodeUnit& unit, const Corpus& corpus) {
  FactorVector f;
  SourceMetrics m;
  if (unit.granularity == Granularity::hunk) {
    m = source_metrics(strip_diff_markers(unit.content));
    int churn = 0;
    bool at_line_start = true;
    for (char c : unit.content) {
      if (at_line_start && (c == '+' || c == '-')) ++churn;
      at_line_start = c == '\n';
    }
    f.churn = churn;
  } else {
    m = source_metrics(unit.content);
    if (unit.diff) {
      f.churn = diff_churn(*unit.diff);
    } else {
      spdlog::debug("unit '{}' has no recorded diff; churn = 0", unit.id);
    }
  }
  f.loc = m.loc;
  f.mloc = m.mloc;
  f.vg = m.vg;
  int pre = 0;
  for (const auto& b : corpus.bug_reports) {
    if (b.fix_date < unit.commit_date && b.ground_truth_paths.count(unit.path)) ++pre;
  }
  f.pre = pre;
  return f;
}

}  // namespace clb
