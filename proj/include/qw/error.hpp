#pragma once

#include <stdexcept>
#include <string>

namespace qw {

/// Broad failure classes. The CLI maps validation-type kinds to exit code 1
/// and numeric-type kinds to exit code 2.
enum class ErrorKind {
  validation,
  shape_mismatch,
  degenerate_grid,
  empty_mask,
  non_finite,
  divergence,
  bad_magic,
  dim_mismatch,
  truncated,
  bad_date,
  io,
  missing_data,
  checkpoint_mismatch,
  tape_state,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  bool is_numeric() const noexcept {
    return kind_ == ErrorKind::non_finite || kind_ == ErrorKind::divergence;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace qw
