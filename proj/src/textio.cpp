#include "rdcfold/textio.hpp"

#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace rdcfold {

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double quantize_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

double parse_double(const std::string& token, const std::string& context) {
  if (token.empty()) throw std::invalid_argument(context + ": empty numeric field");
  const char* begin = token.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + token.size())
    throw std::invalid_argument(context + ": bad number '" + token + "'");
  return v;
}

long parse_long(const std::string& token, const std::string& context) {
  if (token.empty()) throw std::invalid_argument(context + ": empty integer field");
  const char* begin = token.c_str();
  char* end = nullptr;
  long v = std::strtol(begin, &end, 10);
  if (end != begin + token.size())
    throw std::invalid_argument(context + ": bad integer '" + token + "'");
  return v;
}

}  // namespace rdcfold
