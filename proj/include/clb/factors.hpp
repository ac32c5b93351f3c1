#pragma once

#include <array>
#include <string_view>

#include "clb/corpus.hpp"

namespace clb {

// Bug-inducing factor metrics of one code unit.
struct FactorVector {
  double loc = 0;    // non-blank lines
  double mloc = 0;   // non-blank, non-comment lines
  double vg = 1;     // 1 + branching tokens
  double pre = 0;    // earlier fixes of the same path by other bugs
  double churn = 0;  // added + removed lines

  static constexpr std::array<std::string_view, 5> names{"LOC", "MLOC", "VG", "PRE", "Churn"};

  // Value by name from `names`; throws ValidationError for anything else.
  double get(std::string_view name) const;
  bool operator==(const FactorVector&) const = default;
};

struct SourceMetrics {
  int loc = 0;
  int mloc = 0;
  int vg = 1;
};

// LOC / MLOC / VG of raw text. Comments are //, /* */ (not nested) and #
// line comments; branching tokens are if, for, while, case, catch, &&, ||
// and ?, counted outside comments and string literals.
SourceMetrics source_metrics(std::string_view content);

// For hunks the leading diff marker of every line is dropped before the
// source metrics are taken, and churn is the hunk's own +/- count. For files
// churn comes from the recorded diff; without one it is 0.
FactorVector compute_factors(const CodeUnit& unit, const Corpus& corpus);

}  // namespace clb
