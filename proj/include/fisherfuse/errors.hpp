#pragma once

#include <stdexcept>
#include <string>

namespace ff {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateBasisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SymmetryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParameterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LexicalError : std::runtime_error {
  int line, col;
  LexicalError(const std::string& msg, int line_, int col_)
      : std::runtime_error(msg), line(line_), col(col_) {}
};

struct SyntaxError : std::runtime_error {
  int line;
  SyntaxError(const std::string& msg, int line_)
      : std::runtime_error(msg), line(line_) {}
};

struct UnsupportedAblationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EncodingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NormalizationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UndefinedSimilarityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EstimatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UndefinedRatioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyAuxiliaryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ff
