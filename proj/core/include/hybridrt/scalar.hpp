#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>

namespace hybridrt {

/// Property and event values are restricted to portable scalars.
using Scalar = std::variant<bool, std::int64_t, double, std::string>;
using PropertyMap = std::map<std::string, Scalar>;

std::string to_string(const Scalar& value);

std::optional<std::int64_t> as_int(const Scalar& value);
std::optional<double> as_double(const Scalar& value);
std::optional<std::string> as_string(const Scalar& value);
std::optional<bool> as_bool(const Scalar& value);

}  // namespace hybridrt
