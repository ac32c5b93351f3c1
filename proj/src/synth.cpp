#include "clb/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "clb/diff.hpp"
#include "clb/error.hpp"
#include "clb/rng.hpp"

namespace clb {
namespace {

enum class LineKind { call, cond, loop, comment, decl };

struct Line {
  LineKind kind = LineKind::call;
  std::vector<std::string> words;  // always 4
};

struct FileModel {
  std::string path;
  std::string class_name;
  std::vector<std::string> topic;
  std::vector<Line> lines;
  bool hot = false;
};

const std::vector<std::string> kFiller{"error",  "exception", "when",   "fails", "null",
                                       "crash",  "value",     "wrong",  "after", "update",
                                       "should", "returns",   "broken", "state", "missing"};

std::string capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

std::string render(const Line& l) {
  const auto& w = l.words;
  switch (l.kind) {
    case LineKind::call:
      return "    " + w[0] + capitalize(w[1]) + "." + w[2] + "(" + w[3] + ");";
    case LineKind::cond:
      return "    if (" + w[0] + " > " + w[1] + ") { " + w[2] + capitalize(w[3]) + "(); }";
    case LineKind::loop:
      return "    for (" + w[0] + " : " + w[1] + capitalize(w[2]) + ") " + w[3] + "();";
    case LineKind::comment:
      return "    // " + w[0] + " " + w[1] + " " + w[2] + " " + w[3];
    case LineKind::decl:
      return "    int " + w[0] + capitalize(w[1]) + " = " + w[2] + "." + w[3] + ";";
  }
  return {};
}

std::string render_file(const FileModel& f, const std::vector<Line>& lines) {
  std::string out = "package org.synth;\n\npublic class " + f.class_name + " {\n";
  for (const auto& l : lines) out += render(l) + "\n";
  out += "}\n";
  return out;
}

class Generator {
 public:
  Generator(const SynthConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {}

  Corpus run();

 private:
  std::string word() { return vocab_[rng_.below(vocab_.size())]; }

  std::string sha() {
    static constexpr char hex[] = "0123456789abcdef";
    std::string s(40, '0');
    for (auto& c : s) c = hex[rng_.below(16)];
    return s;
  }

  Line random_line(const std::vector<std::string>& topic) {
    static constexpr LineKind kinds[] = {LineKind::call, LineKind::call, LineKind::cond,
                                         LineKind::loop, LineKind::comment, LineKind::decl};
    Line l;
    l.kind = kinds[rng_.below(std::size(kinds))];
    for (int i = 0; i < 4; ++i) {
      if (l.kind == LineKind::comment && i == 3) {
        l.words.push_back(kFiller[rng_.below(kFiller.size())]);
      } else {
        l.words.push_back(rng_.bernoulli(0.8) ? topic[rng_.below(topic.size())] : word());
      }
    }
    return l;
  }

  Line planted_line(const std::string& token, const std::vector<std::string>& topic) {
    Line l;
    l.kind = rng_.bernoulli(0.5) ? LineKind::call : LineKind::cond;
    l.words = {token, topic[rng_.below(topic.size())], token, topic[rng_.below(topic.size())]};
    return l;
  }

  std::vector<Line> drifted(const std::vector<Line>& lines, double rate, int& changed) {
    std::vector<Line> out = lines;
    changed = 0;
    for (auto& l : out) {
      bool touched = false;
      for (auto& w : l.words) {
        if (rng_.bernoulli(rate)) {
          w = word();
          touched = true;
        }
      }
      changed += touched ? 1 : 0;
    }
    return out;
  }

  // A one-hunk diff whose new side is `lines[first, first+added)` of the
  // rendered file, replacing `removed` fabricated lines.
  std::string make_diff(const FileModel& f, const std::vector<Line>& lines, std::size_t first,
                        std::size_t added, int removed) {
    const int header_lines = 3;  // package, blank, class
    std::string body;
    const bool has_before = first > 0;
    const bool has_after = first + added < lines.size();
    if (has_before) body += " " + render(lines[first - 1]) + "\n";
    for (int r = 0; r < removed; ++r) body += "-" + render(random_line(f.topic)) + "\n";
    for (std::size_t a = 0; a < added; ++a) body += "+" + render(lines[first + a]) + "\n";
    if (has_after) body += " " + render(lines[first + added]) + "\n";
    const int ctx = (has_before ? 1 : 0) + (has_after ? 1 : 0);
    const int start = header_lines + static_cast<int>(first) + (has_before ? 0 : 1);
    return "diff --git a/" + f.path + " b/" + f.path + "\n--- a/" + f.path + "\n+++ b/" + f.path +
           "\n@@ -" + std::to_string(start) + "," + std::to_string(ctx + removed) + " +" +
           std::to_string(start) + "," + std::to_string(ctx + static_cast<int>(added)) + " @@\n" +
           body;
  }

  void add_unit(Corpus& c, std::vector<std::string>& link, CodeUnit file) {
    const auto hunks = extract_hunks(*file.diff);
    link.push_back(file.id);
    for (std::size_t h = 0; h < hunks.size(); ++h) {
      CodeUnit hu;
      hu.id = file.id + "#" + std::to_string(h);
      hu.path = file.path;
      hu.content = hunks[h].body;
      hu.granularity = Granularity::hunk;
      hu.commit = file.commit;
      hu.commit_date = file.commit_date;
      hu.regime = file.regime;
      hu.parent_file_id = file.id;
      link.push_back(hu.id);
      c.code_units.push_back(std::move(hu));
    }
    c.code_units.push_back(std::move(file));
  }

  const SynthConfig& cfg_;
  Rng rng_;
  std::vector<std::string> vocab_;
};

Corpus Generator::run() {
  static const char* consonants = "bcdfghklmnprstvz";
  static const char* vowels = "aeiou";
  std::set<std::string> seen(kFiller.begin(), kFiller.end());
  for (const char* kw : {"if", "for", "while", "case", "catch", "int", "public", "class",
                         "package", "org", "synth", "null"}) {
    seen.insert(kw);
  }
  while (static_cast<int>(vocab_.size()) < cfg_.vocab_size) {
    std::string w;
    const auto syllables = 2 + rng_.below(2);
    for (std::uint64_t s = 0; s < syllables; ++s) {
      w.push_back(consonants[rng_.below(16)]);
      w.push_back(vowels[rng_.below(5)]);
    }
    if (seen.insert(w).second) vocab_.push_back(w);
  }

  std::vector<FileModel> files(static_cast<std::size_t>(cfg_.n_files));
  std::vector<std::size_t> hot, cold;
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto& f = files[i];
    f.class_name = capitalize(word()) + capitalize(word());
    f.path = "src/main/java/org/synth/" + f.class_name + std::to_string(i) + ".java";
    for (int t = 0; t < 10; ++t) f.topic.push_back(word());
    for (int l = 0; l < cfg_.lines_per_file; ++l) f.lines.push_back(random_line(f.topic));
    f.hot = rng_.bernoulli(cfg_.hot_fraction);
    (f.hot ? hot : cold).push_back(i);
  }
  if (hot.empty()) {
    hot.push_back(cold.back());
    cold.pop_back();
  }

  Corpus c;
  const Timestamp start = parse_timestamp("2015-01-05T09:00:00Z");
  Timestamp clock = start;
  for (int b = 0; b < cfg_.n_bugs; ++b) {
    BugReport bug;
    bug.id = "BUG-" + std::to_string(1000 + b);
    clock += std::chrono::seconds(86400 * 3 + static_cast<long>(rng_.below(86400 * 2)));
    bug.report_date = clock;
    bug.fix_date = clock + std::chrono::seconds(86400 * 2 + static_cast<long>(rng_.below(86400 * 4)));
    bug.fix_commit = sha();

    // Ground truth: one or two files, mostly hot ones.
    std::vector<std::size_t> gt;
    const int n_gt = rng_.bernoulli(0.6) ? 1 : 2;
    while (static_cast<int>(gt.size()) < n_gt) {
      const auto& pool = (rng_.bernoulli(0.8) || cold.empty()) ? hot : cold;
      const auto pick = pool[rng_.below(pool.size())];
      if (std::find(gt.begin(), gt.end(), pick) == gt.end()) gt.push_back(pick);
    }
    for (auto g : gt) bug.ground_truth_paths.insert(files[g].path);

    std::vector<std::string> planted;
    while (static_cast<int>(planted.size()) < cfg_.planted_tokens) {
      auto w = word();
      if (std::find(planted.begin(), planted.end(), w) == planted.end()) planted.push_back(w);
    }
    std::vector<std::string> desc_words = planted;
    for (int i = 0; i < 6; ++i) desc_words.push_back(kFiller[rng_.below(kFiller.size())]);
    rng_.shuffle(desc_words);
    bug.title = capitalize(planted[0]) + " " + kFiller[rng_.below(kFiller.size())];
    for (const auto& w : desc_words) {
      if (!bug.description.empty()) bug.description += ' ';
      bug.description += w;
    }
    const auto n_present = static_cast<std::size_t>(
        std::lround(cfg_.signal * static_cast<double>(cfg_.planted_tokens)));
    std::vector<std::string> present = planted;
    rng_.shuffle(present);
    present.resize(n_present);
    const double noise_rate = (1.0 - cfg_.signal) * 0.5;

    auto& link = c.links[bug.id];
    const std::string tag = bug.id + ":";

    auto with_noise = [&](const FileModel& f, std::size_t& first, std::size_t& added) {
      std::vector<Line> lines = f.lines;
      std::vector<Line> extra;
      for (const auto& w : planted) {
        if (rng_.bernoulli(noise_rate)) extra.push_back(planted_line(w, f.topic));
      }
      const auto edits = 1 + rng_.below(2);
      for (std::uint64_t e = 0; e < edits; ++e) extra.push_back(random_line(f.topic));
      first = rng_.below(lines.size() + 1);
      added = extra.size();
      lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(first), extra.begin(), extra.end());
      return lines;
    };

    // Stationary: every file as of the fix commit.
    std::vector<std::vector<Line>> gt_lines(gt.size());
    for (std::size_t fi = 0; fi < files.size(); ++fi) {
      const auto& f = files[fi];
      const auto gpos = std::find(gt.begin(), gt.end(), fi);
      std::vector<Line> lines;
      std::size_t first = 0, added = 0;
      int removed = 0;
      if (gpos != gt.end()) {
        lines = f.lines;
        std::vector<Line> block;
        for (const auto& w : present) block.push_back(planted_line(w, f.topic));
        const auto extra = 1 + rng_.below(3);
        for (std::uint64_t e = 0; e < extra; ++e) block.push_back(random_line(f.topic));
        rng_.shuffle(block);
        first = rng_.below(lines.size() + 1);
        added = block.size();
        lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(first), block.begin(), block.end());
        removed = 1 + static_cast<int>(rng_.below(4));
        gt_lines[static_cast<std::size_t>(gpos - gt.begin())] = lines;
      } else {
        lines = with_noise(f, first, added);
        removed = static_cast<int>(rng_.below(2));
      }
      CodeUnit u;
      u.id = tag + "st:" + f.class_name + std::to_string(fi);
      u.path = f.path;
      u.content = render_file(f, lines);
      u.commit = bug.fix_commit;
      u.commit_date = bug.fix_date;
      u.regime = Regime::stationary;
      u.diff = make_diff(f, lines, first, added, removed);
      add_unit(c, link, std::move(u));
    }

    // Non-stationary: drifted versions inside the (report, fix) window.
    const auto window = to_unix(bug.fix_date) - to_unix(bug.report_date);
    auto window_time = [&] {
      return bug.report_date +
             std::chrono::seconds(3600 + static_cast<long>(rng_.below(
                                             static_cast<std::uint64_t>(window - 7200))));
    };
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const auto& f = files[gt[g]];
      const int versions = rng_.bernoulli(0.5) ? 1 : 2;
      for (int v = 0; v < versions; ++v) {
        int changed = 0;
        auto lines = drifted(gt_lines[g], cfg_.drift, changed);
        const std::size_t first = rng_.below(lines.size());
        const std::size_t added =
            std::max<std::size_t>(1, std::min(lines.size() - first, static_cast<std::size_t>(changed)));
        CodeUnit u;
        u.commit = sha();
        u.id = tag + "ns:" + f.class_name + std::to_string(gt[g]) + "@" + u.commit.substr(0, 8);
        u.path = f.path;
        u.content = render_file(f, lines);
        u.commit_date = window_time();
        u.regime = Regime::non_stationary;
        u.diff = make_diff(f, lines, first, added, static_cast<int>(added));
        add_unit(c, link, std::move(u));
      }
    }
    std::vector<std::size_t> others;
    for (std::size_t fi = 0; fi < files.size(); ++fi) {
      if (std::find(gt.begin(), gt.end(), fi) == gt.end()) others.push_back(fi);
    }
    rng_.shuffle(others);
    // Echoes: diagnostic edits to unrelated files that repeat the report's
    // vocabulary more densely than the eventual fix location.
    for (int e = 0; e < cfg_.ns_echoes && e < static_cast<int>(others.size()); ++e) {
      const auto fi = others[static_cast<std::size_t>(e)];
      const auto& f = files[fi];
      std::vector<Line> lines = f.lines;
      std::vector<Line> block;
      for (int rep = 0; rep < 2; ++rep)
        for (const auto& w : planted) block.push_back(planted_line(w, f.topic));
      rng_.shuffle(block);
      const std::size_t first = rng_.below(lines.size() + 1);
      lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(first), block.begin(), block.end());
      int changed = 0;
      lines = drifted(lines, cfg_.drift * 0.5, changed);
      CodeUnit u;
      u.commit = sha();
      u.id = tag + "ns:" + f.class_name + std::to_string(fi) + "@" + u.commit.substr(0, 8);
      u.path = f.path;
      u.content = render_file(f, lines);
      u.commit_date = window_time();
      u.regime = Regime::non_stationary;
      u.diff = make_diff(f, lines, first, block.size(), static_cast<int>(rng_.below(2)));
      add_unit(c, link, std::move(u));
    }
    if (static_cast<int>(others.size()) > cfg_.ns_distractors) {
      others.resize(static_cast<std::size_t>(cfg_.ns_distractors));
    }
    std::sort(others.begin(), others.end());
    for (auto fi : others) {
      const auto& f = files[fi];
      std::size_t first = 0, added = 0;
      auto noisy = with_noise(f, first, added);
      int changed = 0;
      auto lines = drifted(noisy, cfg_.drift * 0.5, changed);
      CodeUnit u;
      u.commit = sha();
      u.id = tag + "ns:" + f.class_name + std::to_string(fi) + "@" + u.commit.substr(0, 8);
      u.path = f.path;
      u.content = render_file(f, lines);
      u.commit_date = window_time();
      u.regime = Regime::non_stationary;
      u.diff = make_diff(f, lines, first, added, static_cast<int>(rng_.below(2)));
      add_unit(c, link, std::move(u));
    }
    c.bug_reports.push_back(std::move(bug));
  }
  c.validate();
  return c;
}

}  // namespace

Corpus generate_synthetic_corpus(const SynthConfig& cfg, std::uint64_t seed) {
  if (!(cfg.signal >= 0.0 && cfg.signal <= 1.0)) {
    throw ValidationError("synthetic corpus: signal must lie in [0, 1]");
  }
  if (!(cfg.drift >= 0.0 && cfg.drift <= 1.0)) {
    throw ValidationError("synthetic corpus: drift must lie in [0, 1]");
  }
  if (cfg.n_bugs < 1 || cfg.n_files < 2 || cfg.vocab_size < 50 || cfg.planted_tokens < 1 ||
      cfg.lines_per_file < 1 || cfg.ns_distractors < 0 || cfg.ns_echoes < 0) {
    throw ValidationError("synthetic corpus: sizes out of range");
  }
  return Generator(cfg, seed).run();
}

}  // namespace clb
