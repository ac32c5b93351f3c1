#include "clb/diff.hpp"

#include <charconv>

#include "clb/error.hpp"

namespace clb {
namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

// "a/src/x.java" -> "src/x.java"; "/dev/null" stays as is.
std::string strip_prefix(std::string_view p) {
  if (auto tab = p.find('\t'); tab != std::string_view::npos) p = p.substr(0, tab);
  if (p.size() >= 2 && p[0] == '"' && p.back() == '"') p = p.substr(1, p.size() - 2);
  if (p.starts_with("a/") || p.starts_with("b/")) p.remove_prefix(2);
  return std::string(p);
}

bool parse_range(std::string_view s, int& start, int& count) {
  auto comma = s.find(',');
  auto num = s.substr(0, comma);
  auto r = std::from_chars(num.data(), num.data() + num.size(), start);
  if (r.ec != std::errc{} || r.ptr != num.data() + num.size()) return false;
  count = 1;
  if (comma != std::string_view::npos) {
    auto cnt = s.substr(comma + 1);
    r = std::from_chars(cnt.data(), cnt.data() + cnt.size(), count);
    if (r.ec != std::errc{} || r.ptr != cnt.data() + cnt.size()) return false;
  }
  return start >= 0 && count >= 0;
}

// "@@ -a,b +c,d @@ ..." 
bool parse_header(std::string_view line, DiffHunk& h) {
  if (!line.starts_with("@@ -")) return false;
  auto close = line.find(" @@", 3);
  if (close == std::string_view::npos) return false;
  auto ranges = line.substr(4, close - 4);  // "a,b +c,d"
  auto space = ranges.find(" +");
  if (space == std::string_view::npos) return false;
  return parse_range(ranges.substr(0, space), h.old_start, h.old_count) &&
         parse_range(ranges.substr(space + 2), h.new_start, h.new_count);
}

}  // namespace

std::vector<DiffHunk> extract_hunks(std::string_view unified_diff) {
  std::vector<DiffHunk> hunks;
  const auto lines = split_lines(unified_diff);
  std::string old_path, new_path;

  std::size_t i = 0;
  while (i < lines.size()) {
    const auto line = lines[i];
    if (line.starts_with("diff --git ")) {
      old_path.clear();
      new_path.clear();
      ++i;
      continue;
    }
    if (line.starts_with("--- ")) {
      old_path = strip_prefix(line.substr(4));
      ++i;
      continue;
    }
    if (line.starts_with("+++ ")) {
      new_path = strip_prefix(line.substr(4));
      ++i;
      continue;
    }
    if (!line.starts_with("@@")) {
      ++i;
      continue;
    }

    DiffHunk h;
    if (!parse_header(line, h)) {
      throw ParseError("malformed hunk header at line " + std::to_string(i + 1) + ": " +
                       std::string(line));
    }
    h.header = std::string(line);
    h.path = (new_path.empty() || new_path == "/dev/null") ? old_path : new_path;
    int old_left = h.old_count;
    int new_left = h.new_count;
    ++i;
    while (i < lines.size() && (old_left > 0 || new_left > 0)) {
      const auto body = lines[i];
      if (body.starts_with("\\")) {  // "\ No newline at end of file"
        ++i;
        continue;
      }
      char kind = body.empty() ? ' ' : body[0];
      if (kind == '+') {
        ++h.added;
        --new_left;
      } else if (kind == '-') {
        ++h.removed;
        --old_left;
      } else if (kind == ' ') {
        ++h.context;
        --old_left;
        --new_left;
      } else {
        break;
      }
      h.body.append(body.empty() ? std::string_view{" "} : body);
      h.body.push_back('\n');
      ++i;
    }
    if (old_left < 0 || new_left < 0 || old_left > 0 || new_left > 0) {
      throw ParseError("hunk at line " + std::to_string(i) + " does not match its header counts");
    }
    while (i < lines.size() && lines[i].starts_with("\\")) ++i;
    hunks.push_back(std::move(h));
  }
  return hunks;
}

int diff_churn(std::string_view unified_diff) {
  int churn = 0;
  for (const auto& h : extract_hunks(unified_diff)) churn += h.added + h.removed;
  return churn;
}

}  // namespace clb
