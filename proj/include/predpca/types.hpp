#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace predpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Malformed file container (bad magic, bad header, short payload).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Content is structurally fine but unusable (NaN/Inf entries, bad values).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or sizes do not line up.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed an out-of-range or inconsistent parameter.
class ParameterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Computation failed numerically (divergence, singularity, non-convergence).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failure while reading or writing.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using WarningHandler = std::function<void(const std::string&)>;

/// Replace the process-wide warning sink (default writes to stderr).
/// Returns the previous handler so tests can restore it.
WarningHandler set_warning_handler(WarningHandler handler);

/// Emit a non-fatal diagnostic through the current warning handler.
void warn(const std::string& message);

}  // namespace predpca
