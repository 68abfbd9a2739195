#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssllab {

/// Bad inputs: malformed graphs, invalid configs, dimension mismatches.
/// The CLI maps these to exit code 2.
class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Vertices with zero marginal probability; carries the offending indices.
class unreachable_vertex_error : public validation_error {
 public:
  unreachable_vertex_error(std::string msg, std::vector<int> idx)
      : validation_error(std::move(msg)), indices(std::move(idx)) {}
  std::vector<int> indices;
};

/// Numeric failures during computation (divergence, singular systems).
/// The CLI maps these to exit code 3.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integrator abort: some |W| entry crossed the divergence limit.
class divergence_error : public numeric_error {
 public:
  divergence_error(std::string msg, std::int64_t at_step)
      : numeric_error(std::move(msg)), step(at_step) {}
  std::int64_t step;
};

}  // namespace ssllab
