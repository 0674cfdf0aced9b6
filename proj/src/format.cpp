#include "latticomp/format.hpp"

#include <array>
#include <charconv>
#include <stdexcept>

namespace latticomp {

std::string format_double(double value) {
  if (value == 0.0) return "0";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || begin == end) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return value;
}

}  // namespace latticomp
