#pragma once

#include <stdexcept>
#include <string>

namespace placekit {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyClip : Error {
  using Error::Error;
};
struct DegenerateHeatmap : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct DimMismatch : Error {
  using Error::Error;
};
struct BadDim : Error {
  using Error::Error;
};
struct BadInputSize : Error {
  using Error::Error;
};
struct EmptyImage : Error {
  using Error::Error;
};
struct IndexOutOfRange : Error {
  using Error::Error;
};
struct OracleInfeasible : Error {
  using Error::Error;
};
struct CorruptDataset : Error {
  using Error::Error;
};
struct CorruptCheckpoint : Error {
  using Error::Error;
};
struct NonFiniteLoss : Error {
  using Error::Error;
};
struct NonFiniteValue : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};

}  // namespace placekit
