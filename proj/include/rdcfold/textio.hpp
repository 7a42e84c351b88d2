#pragma once

#include <string>

namespace rdcfold {

/// Shortest-of-9-significant-digits text form ("%.9g"), the interchange
/// precision of angle-list and beam files.
std::string format_g9(double v);

/// Full-precision text form ("%.17g"); strtod of the result returns the
/// exact same double.
std::string format_g17(double v);

/// Collapses v onto the 9-significant-digit text grid: the double that
/// parsing format_g9(v) yields. Idempotent.
double quantize_g9(double v);

/// strtod wrapper that rejects trailing garbage and empty tokens; throws
/// std::invalid_argument with `context` in the message.
double parse_double(const std::string& token, const std::string& context);

/// strtol wrapper with the same error contract.
long parse_long(const std::string& token, const std::string& context);

}  // namespace rdcfold
