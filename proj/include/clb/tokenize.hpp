#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace clb {

// Splits on non-alphanumerics, then splits camelCase / PascalCase / acronym
// boundaries ("HTTPServerError" -> http, server, error), lowercases, and drops
// tokens of length 1. snake_case falls out of the non-alphanumeric split.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace clb
