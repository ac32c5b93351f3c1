#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "clb/timestamp.hpp"

namespace clb {

enum class Regime { stationary, non_stationary };
enum class Granularity { changeset_file, hunk };

std::string_view to_string(Regime r);
std::string_view to_string(Granularity g);
Regime parse_regime(std::string_view s);
// Accepts "changeset_file"/"file" and "hunk".
Granularity parse_granularity(std::string_view s);

struct BugReport {
  std::string id;
  std::string title;
  std::string description;
  Timestamp report_date{};
  std::string fix_commit;
  Timestamp fix_date{};
  std::set<std::string> ground_truth_paths;

  bool operator==(const BugReport&) const = default;
};

struct CodeUnit {
  std::string id;
  std::string path;
  std::string content;
  Granularity granularity = Granularity::changeset_file;
  std::string commit;
  Timestamp commit_date{};
  Regime regime = Regime::stationary;
  std::optional<std::string> parent_file_id;  // set for hunks only
  std::optional<std::string> diff;            // unified diff of the change, if recorded

  bool operator==(const CodeUnit&) const = default;
};

// Bug reports, code units and the candidate links between them. Immutable
// once loaded; lookups go through the id maps built by reindex().
class Corpus {
 public:
  std::vector<BugReport> bug_reports;
  std::vector<CodeUnit> code_units;
  std::map<std::string, std::vector<std::string>> links;

  // Number of bugs removed by validate() because none of their linked units
  // touches a ground-truth path.
  std::size_t dropped_bugs = 0;

  void reindex();
  const BugReport* find_bug(std::string_view id) const;
  const CodeUnit* find_unit(std::string_view id) const;
  const BugReport& bug(std::string_view id) const;
  const CodeUnit& unit(std::string_view id) const;

  // Linked units of a bug restricted to one regime and granularity, in link order.
  std::vector<const CodeUnit*> candidates(std::string_view bug_id, Regime regime,
                                          Granularity granularity) const;

  // Checks every invariant, drops bugs without any ground-truth candidate and
  // rebuilds the indexes. Throws ValidationError on dangling links or broken
  // record invariants.
  void validate();

  bool operator==(const Corpus& other) const {
    return bug_reports == other.bug_reports && code_units == other.code_units &&
           links == other.links;
  }

 private:
  std::unordered_map<std::string, std::size_t> bug_index_;
  std::unordered_map<std::string, std::size_t> unit_index_;
};

nlohmann::json corpus_to_json(const Corpus& corpus);
// Throws ParseError naming the offending field.
Corpus corpus_from_json(const nlohmann::json& j);

// Bug metadata for mining: an array of bug objects; fix_date is not needed.
std::vector<BugReport> bug_metadata_from_json(const nlohmann::json& j);

// Reads and validates a corpus file. Parse errors name the line (syntax) or
// the field (schema); dangling links raise ValidationError listing "bug→unit".
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct TaskSpec {
  Regime regime = Regime::stationary;
  Granularity granularity = Granularity::changeset_file;
  std::vector<std::string> bug_ids;  // ascending by report date

  std::string name() const;
};

struct TrainTestSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Orders bugs by (report_date, id) and puts the first ceil(0.6 n) in train.
TrainTestSplit split_train_test(const Corpus& corpus);

// Restricts bug_ids to bugs with at least one candidate of the given regime
// and granularity, keeping report-date order.
TaskSpec make_task(const Corpus& corpus, Regime regime, Granularity granularity,
                   const std::vector<std::string>& bug_ids);

}  // namespace clb
