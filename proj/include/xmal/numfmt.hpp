#pragma once

#include <string>
#include <string_view>

namespace xmal {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Strict parse of a whole field as a double; throws DataError mentioning `what`.
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

}  // namespace xmal
