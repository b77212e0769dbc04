#include "misscrit/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace misscrit {
namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

double parse_double(const std::string& field, std::size_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": cannot parse '" + field + "' as a finite number");
  }
  return v;
}

int parse_label(const std::string& field, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || v < 1) {
    throw ParseError("line " + std::to_string(line) + ": label '" + field + "' is not a positive integer");
  }
  return v - 1;
}

struct Parsed {
  std::vector<double> y;
  std::vector<int> z;
  bool has_labels = false;
};

Parsed parse(std::istream& in) {
  Parsed out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line == "y") {
        out.has_labels = false;
      } else if (line == "y,z") {
        out.has_labels = true;
      } else {
        throw ParseError("line " + std::to_string(lineno) + ": expected header 'y' or 'y,z', got '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (out.has_labels) {
      if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
        throw ParseError("line " + std::to_string(lineno) + ": expected two fields");
      }
      out.y.push_back(parse_double(trim(line.substr(0, comma)), lineno));
      out.z.push_back(parse_label(trim(line.substr(comma + 1)), lineno));
    } else {
      if (comma != std::string::npos) throw ParseError("line " + std::to_string(lineno) + ": expected one field");
      out.y.push_back(parse_double(line, lineno));
    }
  }
  if (!header_seen) throw ParseError("empty CSV: missing header");
  if (out.y.empty()) throw ParseError("CSV has a header but no rows");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  return out;
}

template <typename Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

IncompleteDataset read_incomplete_csv(std::istream& in) {
  Parsed p = parse(in);
  IncompleteDataset data{Eigen::Map<const Vector>(p.y.data(), static_cast<Eigen::Index>(p.y.size()))};
  data.validate();
  return data;
}

CompleteDataset read_complete_csv(std::istream& in) {
  Parsed p = parse(in);
  if (!p.has_labels) throw ParseError("complete dataset needs header 'y,z'");
  const auto n = static_cast<Eigen::Index>(p.y.size());
  CompleteDataset data{Eigen::Map<const Vector>(p.y.data(), n), Eigen::Map<const Eigen::VectorXi>(p.z.data(), n)};
  return data;
}

IncompleteDataset read_incomplete_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return with_path(path, [&] { return read_incomplete_csv(in); });
}

CompleteDataset read_complete_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  return with_path(path, [&] { return read_complete_csv(in); });
}

void write_csv(std::ostream& out, const IncompleteDataset& data) {
  out << "y\n";
  for (Eigen::Index t = 0; t < data.size(); ++t) out << format_double(data.y[t]) << '\n';
}

void write_csv(std::ostream& out, const CompleteDataset& data) {
  out << "y,z\n";
  for (Eigen::Index t = 0; t < data.size(); ++t) out << format_double(data.y[t]) << ',' << data.z[t] + 1 << '\n';
}

void write_csv(const std::filesystem::path& path, const IncompleteDataset& data) {
  auto out = open_out(path);
  write_csv(out, data);
}

void write_csv(const std::filesystem::path& path, const CompleteDataset& data) {
  auto out = open_out(path);
  write_csv(out, data);
}

}  // namespace misscrit
