#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace f2kv {

enum class Status : uint8_t {
  Ok,
  NotFound,
  Pending,
  Aborted,
  // Address fell below the log's BEGIN (truncated while the caller held it).
  StaleAddress,
  IoError,
};

constexpr std::string_view to_string(Status s) {
  switch (s) {
    case Status::Ok: return "OK";
    case Status::NotFound: return "NOT_FOUND";
    case Status::Pending: return "PENDING";
    case Status::Aborted: return "ABORTED";
    case Status::StaleAddress: return "STALE_ADDRESS";
    case Status::IoError: return "IO_ERROR";
  }
  return "?";
}

/// Thrown when a fixed-capacity structure (epoch table, index, overflow pool) is full.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace f2kv
