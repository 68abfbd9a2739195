#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ssllab/graph.hpp"

namespace ssllab {

/// Line-oriented text format for augmentation graphs; see write_graph for
/// the layout.  Numbers round-trip exactly (17 significant digits).
AugmentationGraph read_graph(const std::string& path);
void write_graph(const AugmentationGraph& g, const std::string& path);

/// Shortest-exact decimal rendering used in every artifact (%.17g keeps
/// doubles bit-stable across write/read).
std::string format_number(double v);

/// Streaming CSV writer: header on construction, one flushed line per row,
/// so an aborted run leaves a valid prefix on disk.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);

  void write_row(const std::vector<std::string>& fields);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t n_columns_;
};

/// Metadata sidecar for every artifact directory.  Written with
/// complete = false when a run starts and rewritten with complete = true
/// at the end, so interrupted runs are detectable.
struct Manifest {
  std::string experiment;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string code_version;
  std::uint64_t config_hash = 0;
  bool complete = false;
};

void write_manifest(const Manifest& m, const std::string& path);
Manifest read_manifest(const std::string& path);

/// FNV-1a over a canonical (sorted-key, fixed-precision) rendering of the
/// config JSON, so semantically identical configs hash identically.
std::uint64_t hash_config(const std::string& canonical_json);

}  // namespace ssllab
