#pragma once

#include <stdexcept>
#include <string>

namespace picm {

enum class Errc {
  ok = 0,
  io,
  bad_magic,
  bad_version,
  dim_overflow,
  truncated_payload,
  non_finite_value,
  out_of_range_coeff,
  bad_argument,
  schema,
  order_unavailable,
};

struct Error : std::runtime_error {
  Errc code;
  Error(Errc c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

[[noreturn]] inline void fail(Errc c, const std::string& msg) { throw Error(c, msg); }

}  // namespace picm
