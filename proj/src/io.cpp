#include "gmmproj/io.hpp"

#include "gmmproj/error.hpp"

#include <charconv>
#include <fstream>
#include <unordered_map>

namespace gmmproj {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(std::move(cur)));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(trim(std::move(cur)));
  return fields;
}

LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing_file", "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty_file", path.string() + ": no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) label_idx = i;
  }
  if (label_idx == header.size()) {
    throw ValidationError("missing_label_column", path.string() + ": no column named '" + label_column + "'");
  }
  const std::size_t features = header.size() - 1;
  require(features >= 1, "invalid_csv", path.string() + ": no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError("invalid_csv", path.string() + ": line " + std::to_string(line_no) + " has " +
                                               std::to_string(fields.size()) + " fields, expected " +
                                               std::to_string(header.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == label_idx) continue;
      double v = 0.0;
      if (!parse_double(fields[i], v)) {
        throw ValidationError("invalid_csv", path.string() + ": line " + std::to_string(line_no) + ", column '" +
                                                 header[i] + "': '" + fields[i] + "' is not a finite number");
      }
      values.push_back(v);
    }
    const auto [it, inserted] = ids.try_emplace(fields[label_idx], static_cast<int>(names.size()));
    if (inserted) names.push_back(fields[label_idx]);
    labels.push_back(it->second);
  }
  if (labels.empty()) throw ValidationError("empty_file", path.string() + ": no data rows");

  Matrix samples(static_cast<Index>(labels.size()), static_cast<Index>(features));
  for (Index r = 0; r < samples.rows(); ++r) {
    for (Index c = 0; c < samples.cols(); ++c) {
      samples(r, c) = values[static_cast<std::size_t>(r) * features + static_cast<std::size_t>(c)];
    }
  }
  return LabeledDataset(std::move(samples), std::move(labels), std::move(names));
}

void write_csv(const std::filesystem::path& path, const LabeledDataset& data, const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw ValidationError("io_error", "cannot write " + path.string());
  for (Index c = 0; c < data.dim(); ++c) out << 'x' << c << ',';
  out << label_column << '\n';
  char buf[32];
  for (Index r = 0; r < data.size(); ++r) {
    for (Index c = 0; c < data.dim(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, data.samples()(r, c));
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << data.label_names()[static_cast<std::size_t>(data.labels()[static_cast<std::size_t>(r)])] << '\n';
  }
}

}  // namespace gmmproj
