#pragma once

#include <stdexcept>
#include <string>

namespace rbc {

struct GridTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotSymmetric : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Blowup : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RankZero : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadLength : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadSplit : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadSequence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroReference : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rbc
