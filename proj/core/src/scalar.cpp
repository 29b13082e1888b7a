#include "hybridrt/scalar.hpp"

#include <fmt/format.h>

namespace hybridrt {

std::string to_string(const Scalar& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else {
          return fmt::format("{}", v);
        }
      },
      value);
}

std::optional<std::int64_t> as_int(const Scalar& value) {
  if (auto* i = std::get_if<std::int64_t>(&value)) return *i;
  if (auto* s = std::get_if<std::string>(&value)) {
    try {
      std::size_t used = 0;
      auto parsed = std::stoll(*s, &used);
      if (used == s->size()) return parsed;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

std::optional<double> as_double(const Scalar& value) {
  if (auto* d = std::get_if<double>(&value)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (auto* s = std::get_if<std::string>(&value)) {
    try {
      std::size_t used = 0;
      auto parsed = std::stod(*s, &used);
      if (used == s->size()) return parsed;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

std::optional<std::string> as_string(const Scalar& value) {
  if (auto* s = std::get_if<std::string>(&value)) return *s;
  return std::nullopt;
}

std::optional<bool> as_bool(const Scalar& value) {
  if (auto* b = std::get_if<bool>(&value)) return *b;
  if (auto* s = std::get_if<std::string>(&value)) {
    if (*s == "true") return true;
    if (*s == "false") return false;
  }
  return std::nullopt;
}

}  // namespace hybridrt
