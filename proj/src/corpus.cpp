#include "clb/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "clb/error.hpp"

namespace clb {

using nlohmann::json;

std::string_view to_string(Regime r) {
  return r == Regime::stationary ? "stationary" : "non_stationary";
}

std::string_view to_string(Granularity g) {
  return g == Granularity::changeset_file ? "changeset_file" : "hunk";
}

Regime parse_regime(std::string_view s) {
  if (s == "stationary") return Regime::stationary;
  if (s == "non_stationary" || s == "non-stationary") return Regime::non_stationary;
  throw ParseError("unknown regime '" + std::string(s) + "'");
}

Granularity parse_granularity(std::string_view s) {
  if (s == "changeset_file" || s == "file") return Granularity::changeset_file;
  if (s == "hunk") return Granularity::hunk;
  throw ParseError("unknown granularity '" + std::string(s) + "'");
}

std::string TaskSpec::name() const {
  return std::string(to_string(regime)) + "/" + std::string(to_string(granularity));
}

void Corpus::reindex() {
  bug_index_.clear();
  unit_index_.clear();
  for (std::size_t i = 0; i < bug_reports.size(); ++i) {
    if (!bug_index_.emplace(bug_reports[i].id, i).second) {
      throw ValidationError("duplicate bug id '" + bug_reports[i].id + "'");
    }
  }
  for (std::size_t i = 0; i < code_units.size(); ++i) {
    if (!unit_index_.emplace(code_units[i].id, i).second) {
      throw ValidationError("duplicate code unit id '" + code_units[i].id + "'");
    }
  }
}

const BugReport* Corpus::find_bug(std::string_view id) const {
  auto it = bug_index_.find(std::string(id));
  return it == bug_index_.end() ? nullptr : &bug_reports[it->second];
}

const CodeUnit* Corpus::find_unit(std::string_view id) const {
  auto it = unit_index_.find(std::string(id));
  return it == unit_index_.end() ? nullptr : &code_units[it->second];
}

const BugReport& Corpus::bug(std::string_view id) const {
  if (auto* b = find_bug(id)) return *b;
  throw ValidationError("unknown bug id '" + std::string(id) + "'");
}

const CodeUnit& Corpus::unit(std::string_view id) const {
  if (auto* u = find_unit(id)) return *u;
  throw ValidationError("unknown code unit id '" + std::string(id) + "'");
}

std::vector<const CodeUnit*> Corpus::candidates(std::string_view bug_id, Regime regime,
                                                Granularity granularity) const {
  std::vector<const CodeUnit*> out;
  auto it = links.find(std::string(bug_id));
  if (it == links.end()) return out;
  for (const auto& uid : it->second) {
    const CodeUnit& u = unit(uid);
    if (u.regime == regime && u.granularity == granularity) out.push_back(&u);
  }
  return out;
}

void Corpus::validate() {
  reindex();

  for (const auto& b : bug_reports) {
    if (b.ground_truth_paths.empty()) {
      throw ValidationError("bug '" + b.id + "' has no ground-truth paths");
    }
    if (!(b.report_date < b.fix_date)) {
      throw ValidationError("bug '" + b.id + "': report_date must precede the fix commit date");
    }
  }
  for (const auto& u : code_units) {
    if (u.granularity == Granularity::hunk && !u.parent_file_id) {
      throw ValidationError("hunk '" + u.id + "' has no parent_file_id");
    }
    if (u.granularity == Granularity::changeset_file && u.parent_file_id) {
      throw ValidationError("changeset file '" + u.id + "' must not have a parent_file_id");
    }
    if (u.parent_file_id && !find_unit(*u.parent_file_id)) {
      throw ValidationError("hunk '" + u.id + "' has dangling parent '" + *u.parent_file_id + "'");
    }
  }

  std::vector<std::string> dangling;
  for (const auto& [bug_id, unit_ids] : links) {
    if (!find_bug(bug_id)) dangling.push_back(bug_id + "→(unknown bug)");
    for (const auto& uid : unit_ids) {
      if (!find_unit(uid)) dangling.push_back(bug_id + "→" + uid);
    }
  }
  if (!dangling.empty()) {
    std::string msg = "dangling links:";
    for (const auto& d : dangling) msg += " " + d;
    throw ValidationError(msg);
  }

  // Drop bugs whose candidates never touch the ground truth.
  std::vector<BugReport> kept;
  kept.reserve(bug_reports.size());
  std::size_t dropped = 0;
  for (auto& b : bug_reports) {
    bool hit = false;
    if (auto it = links.find(b.id); it != links.end()) {
      for (const auto& uid : it->second) {
        if (b.ground_truth_paths.count(unit(uid).path)) {
          hit = true;
          break;
        }
      }
    }
    if (hit) {
      kept.push_back(std::move(b));
    } else {
      spdlog::warn("dropping bug '{}': no linked unit touches its ground truth", b.id);
      links.erase(b.id);
      ++dropped;
    }
  }
  bug_reports = std::move(kept);
  dropped_bugs += dropped;
  reindex();
}

namespace {

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + "." + key + ": missing field");
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

Timestamp ts_field(const json& obj, const char* key, const std::string& where) {
  const auto text = field<std::string>(obj, key, where);
  try {
    return parse_timestamp(text);
  } catch (const ParseError& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

BugReport bug_from_json(const json& jb, const std::string& where, bool with_fix_date) {
  if (!jb.is_object()) throw ParseError(where + ": expected object");
  BugReport b;
  b.id = field<std::string>(jb, "id", where);
  b.title = jb.value("title", std::string{});
  b.description = field<std::string>(jb, "description", where);
  b.report_date = ts_field(jb, "report_date", where);
  b.fix_commit = field<std::string>(jb, "fix_commit", where);
  if (with_fix_date) b.fix_date = ts_field(jb, "fix_date", where);
  for (const auto& p : field<std::vector<std::string>>(jb, "ground_truth_paths", where)) {
    b.ground_truth_paths.insert(p);
  }
  return b;
}

}  // namespace

std::vector<BugReport> bug_metadata_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("bug metadata: expected an array of bug reports");
  std::vector<BugReport> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(bug_from_json(j[i], "bugs[" + std::to_string(i) + "]", false));
  return out;
}

json corpus_to_json(const Corpus& corpus) {
  json bugs = json::array();
  for (const auto& b : corpus.bug_reports) {
    bugs.push_back({{"id", b.id},
                    {"title", b.title},
                    {"description", b.description},
                    {"report_date", format_timestamp(b.report_date)},
                    {"fix_commit", b.fix_commit},
                    {"fix_date", format_timestamp(b.fix_date)},
                    {"ground_truth_paths", b.ground_truth_paths}});
  }
  json units = json::array();
  for (const auto& u : corpus.code_units) {
    json ju = {{"id", u.id},
               {"path", u.path},
               {"content", u.content},
               {"granularity", to_string(u.granularity)},
               {"commit", u.commit},
               {"commit_date", format_timestamp(u.commit_date)},
               {"regime", to_string(u.regime)}};
    if (u.parent_file_id) ju["parent_file_id"] = *u.parent_file_id;
    if (u.diff) ju["diff"] = *u.diff;
    units.push_back(std::move(ju));
  }
  json links = json::object();
  for (const auto& [bug_id, ids] : corpus.links) links[bug_id] = ids;
  return {{"bug_reports", std::move(bugs)},
          {"code_units", std::move(units)},
          {"links", std::move(links)}};
}

Corpus corpus_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("corpus: top level must be an object");
  Corpus c;
  const auto bugs = field<json>(j, "bug_reports", "corpus");
  const auto units = field<json>(j, "code_units", "corpus");
  const auto links = field<json>(j, "links", "corpus");
  if (!bugs.is_array()) throw ParseError("corpus.bug_reports: expected array");
  if (!units.is_array()) throw ParseError("corpus.code_units: expected array");
  if (!links.is_object()) throw ParseError("corpus.links: expected object");

  for (std::size_t i = 0; i < bugs.size(); ++i) {
    c.bug_reports.push_back(
        bug_from_json(bugs[i], "bug_reports[" + std::to_string(i) + "]", true));
  }
  for (std::size_t i = 0; i < units.size(); ++i) {
    const std::string where = "code_units[" + std::to_string(i) + "]";
    const auto& ju = units[i];
    CodeUnit u;
    u.id = field<std::string>(ju, "id", where);
    u.path = field<std::string>(ju, "path", where);
    u.content = field<std::string>(ju, "content", where);
    try {
      u.granularity = parse_granularity(field<std::string>(ju, "granularity", where));
      u.regime = parse_regime(field<std::string>(ju, "regime", where));
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
    u.commit = field<std::string>(ju, "commit", where);
    u.commit_date = ts_field(ju, "commit_date", where);
    if (auto it = ju.find("parent_file_id"); it != ju.end() && !it->is_null()) {
      u.parent_file_id = field<std::string>(ju, "parent_file_id", where);
    }
    if (auto it = ju.find("diff"); it != ju.end() && !it->is_null()) {
      u.diff = field<std::string>(ju, "diff", where);
    }
    c.code_units.push_back(std::move(u));
  }
  for (const auto& [bug_id, ids] : links.items()) {
    c.links[bug_id] = field<std::vector<std::string>>(links, bug_id.c_str(), "corpus.links");
  }
  return c;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read corpus file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
  Corpus c = corpus_from_json(j);
  c.validate();
  return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write corpus file '" + path.string() + "'");
  out << corpus_to_json(corpus).dump(1) << '\n';
}

TrainTestSplit split_train_test(const Corpus& corpus) {
  const auto n = corpus.bug_reports.size();
  if (n < 2) throw ValidationError("train/test split needs at least 2 bug reports");
  std::vector<const BugReport*> order;
  for (const auto& b : corpus.bug_reports) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(), [](const BugReport* a, const BugReport* b) {
    if (a->report_date != b->report_date) return a->report_date < b->report_date;
    return a->id < b->id;
  });
  const auto n_train = static_cast<std::size_t>((6 * n + 9) / 10);  // ceil(0.6 n)
  TrainTestSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? split.train : split.test).push_back(order[i]->id);
  }
  return split;
}

TaskSpec make_task(const Corpus& corpus, Regime regime, Granularity granularity,
                   const std::vector<std::string>& bug_ids) {
  TaskSpec task{regime, granularity, {}};
  std::vector<const BugReport*> bugs;
  for (const auto& id : bug_ids) {
    if (!corpus.candidates(id, regime, granularity).empty()) bugs.push_back(&corpus.bug(id));
  }
  std::stable_sort(bugs.begin(), bugs.end(), [](const BugReport* a, const BugReport* b) {
    if (a->report_date != b->report_date) return a->report_date < b->report_date;
    return a->id < b->id;
  });
  for (const auto* b : bugs) task.bug_ids.push_back(b->id);
  return task;
}

}  // namespace clb
