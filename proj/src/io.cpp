#include "ssllab/io.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ssllab/errors.hpp"
#include "ssllab/types.hpp"

namespace ssllab {

namespace {

constexpr const char* kGraphHeader = "augmentation_graph v1";

std::vector<double> parse_numbers(const std::string& line, int expect,
                                  const std::string& what) {
  std::istringstream in(line);
  std::vector<double> out;
  double v = 0.0;
  while (in >> v) out.push_back(v);
  if (static_cast<int>(out.size()) != expect) {
    throw validation_error("graph file: " + what + " expects " +
                           std::to_string(expect) + " numbers, got " +
                           std::to_string(out.size()));
  }
  return out;
}

std::string next_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) {
    throw validation_error("graph file: unexpected end of file before " + what);
  }
  return line;
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

AugmentationGraph read_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw validation_error("cannot open graph file: " + path);
  }
  if (next_line(in, "header") != kGraphHeader) {
    throw validation_error("graph file " + path + ": missing '" +
                           std::string(kGraphHeader) + "' header");
  }
  const auto dims = parse_numbers(next_line(in, "dimensions"), 2, "dimensions");
  const int n_images = static_cast<int>(dims[0]);
  const int n_views = static_cast<int>(dims[1]);
  if (n_images < 1 || n_views < 1) {
    throw validation_error("graph file " + path + ": bad dimensions");
  }

  AugmentationGraph g;
  const auto prior = parse_numbers(next_line(in, "prior"), n_images, "prior");
  g.image_prior = Eigen::Map<const Vector>(prior.data(), n_images);
  g.cond.resize(n_images, n_views);
  for (int i = 0; i < n_images; ++i) {
    const auto row = parse_numbers(next_line(in, "cond row"), n_views,
                                   "conditional row");
    g.cond.row(i) = Eigen::Map<const Vector>(row.data(), n_views).transpose();
  }
  for (auto* field : {&g.labels, &g.groups}) {
    const auto vals = parse_numbers(
        next_line(in, field == &g.labels ? "labels" : "groups"), n_views,
        "annotation row");
    field->resize(static_cast<std::size_t>(n_views));
    for (int x = 0; x < n_views; ++x) (*field)[x] = static_cast<int>(vals[x]);
  }
  g.validate();
  return g;
}

void write_graph(const AugmentationGraph& g, const std::string& path) {
  g.validate();
  std::ofstream out(path);
  if (!out) {
    throw validation_error("cannot write graph file: " + path);
  }
  out << kGraphHeader << "\n";
  out << g.n_images() << " " << g.n_views() << "\n";
  for (int i = 0; i < g.n_images(); ++i) {
    out << format_number(g.image_prior(i)) << (i + 1 < g.n_images() ? " " : "\n");
  }
  for (int i = 0; i < g.n_images(); ++i) {
    for (int x = 0; x < g.n_views(); ++x) {
      out << format_number(g.cond(i, x)) << (x + 1 < g.n_views() ? " " : "\n");
    }
  }
  for (const auto* field : {&g.labels, &g.groups}) {
    for (int x = 0; x < g.n_views(); ++x) {
      out << (*field)[x] << (x + 1 < g.n_views() ? " " : "\n");
    }
  }
  if (!out) {
    throw numeric_error("short write to graph file: " + path);
  }
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& columns)
    : path_(path), out_(path), n_columns_(columns.size()) {
  if (!out_) {
    throw validation_error("cannot write CSV file: " + path);
  }
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out_ << columns[i] << (i + 1 < columns.size() ? "," : "");
  }
  out_ << "\n";
  out_.flush();
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
  if (fields.size() != n_columns_) {
    throw validation_error("CSV row width " + std::to_string(fields.size()) +
                           " does not match header width " +
                           std::to_string(n_columns_));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    out_ << fields[i] << (i + 1 < fields.size() ? "," : "");
  }
  out_ << "\n";
  out_.flush();
  if (!out_) {
    throw numeric_error("short write to CSV file: " + path_);
  }
}

void write_manifest(const Manifest& m, const std::string& path) {
  nlohmann::json j;
  j["experiment"] = m.experiment;
  j["seed"] = m.seed;
  j["workers"] = m.workers;
  j["code_version"] = m.code_version.empty() ? kVersion : m.code_version;
  j["config_hash"] = m.config_hash;
  j["complete"] = m.complete;
  std::ofstream out(path);
  if (!out) {
    throw validation_error("cannot write manifest: " + path);
  }
  out << j.dump(2) << "\n";
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw validation_error("cannot open manifest: " + path);
  }
  nlohmann::json j;
  in >> j;
  Manifest m;
  m.experiment = j.at("experiment").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.workers = j.at("workers").get<int>();
  m.code_version = j.at("code_version").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::uint64_t>();
  m.complete = j.at("complete").get<bool>();
  return m;
}

std::uint64_t hash_config(const std::string& canonical_json) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical_json) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace ssllab
