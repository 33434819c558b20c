#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tpb::csv {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Parses the whole field as a double (accepts "nan"/"inf"); throws std::invalid_argument.
double parse_double(std::string_view field);

/// Quotes the field when it contains a delimiter, quote or line break.
std::string escape(std::string_view field);

/// Splits one CSV record, honouring double-quoted fields. Throws std::invalid_argument
/// on an unterminated quote.
std::vector<std::string> split(std::string_view line);

}  // namespace tpb::csv
