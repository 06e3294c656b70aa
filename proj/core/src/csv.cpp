#include "taskfactor/csv.hpp"

#include "taskfactor/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace taskfactor::csv {

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_row = [&] {
    if (field_started || !field.empty() || !row.empty()) {
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
    row.clear();
    field.clear();
    field_started = false;
  };

  // Skip a UTF-8 byte order mark.
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
    case '"':
      in_quotes = true;
      field_started = true;
      break;
    case ',':
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
      break;
    case '\r':
      break;
    case '\n':
      end_row();
      break;
    default:
      field.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) throw InputError("csv: unterminated quoted field");
  end_row();
  return rows;
}

std::string escape_field(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string join(const Row& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape_field(fields[i]);
  }
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (v == 0.0) return "0"; // folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text, std::string_view context) {
  std::string_view t = text;
  while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
  while (!t.empty() && (t.back() == ' ' || t.back() == '\t')) t.remove_suffix(1);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw InputError(std::string(context) + ": non-numeric cell '" + std::string(text) + "'");
  }
  return v;
}

std::string format_labeled(const LabeledMatrix& m, std::string_view corner) {
  std::ostringstream out;
  Row header{std::string(corner)};
  header.insert(header.end(), m.col_labels.begin(), m.col_labels.end());
  out << join(header) << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << escape_field(m.row_labels[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out << ',' << (m.missing(r, c) ? std::string("NA") : format_number(m.values(r, c)));
    }
    out << '\n';
  }
  return out.str();
}

LabeledMatrix parse_labeled(std::string_view text, std::string_view expected_corner) {
  const auto rows = parse(text);
  if (rows.empty()) throw InputError("csv: empty file");
  const Row& header = rows.front();
  if (!expected_corner.empty() && header.front() != expected_corner) {
    throw InputError("csv: first header cell must be '" + std::string(expected_corner) + "'");
  }
  std::vector<std::string> cols(header.begin() + 1, header.end());
  std::vector<std::string> row_labels;
  for (std::size_t i = 1; i < rows.size(); ++i) row_labels.push_back(rows[i].front());
  LabeledMatrix m(row_labels, cols);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const Row& row = rows[i];
    if (row.size() != header.size()) {
      throw InputError("csv: row '" + row.front() + "' has " + std::to_string(row.size()) +
                       " fields, expected " + std::to_string(header.size()));
    }
    for (std::size_t j = 1; j < row.size(); ++j) {
      const auto r = static_cast<Eigen::Index>(i - 1);
      const auto c = static_cast<Eigen::Index>(j - 1);
      if (row[j] == "NA") {
        m.set_missing(r, c);
      } else {
        m.set(r, c, parse_number(row[j], "csv row '" + row.front() + "'"));
      }
    }
  }
  m.check_shape();
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

} // namespace taskfactor::csv
