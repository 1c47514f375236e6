#include "dbrlab/io.hpp"

#include <cerrno>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dbrlab::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw RuntimeError("cannot open for writing: " + tmp.string());
    }
    out << content;
    if (!out) {
      throw RuntimeError("write failed: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw RuntimeError("cannot open: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

bool parse_double(const std::string& tok, double& out) {
  const char* begin = tok.c_str();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  // trim surrounding spaces
  for (auto& tok : out) {
    std::size_t a = tok.find_first_not_of(" \t");
    std::size_t b = tok.find_last_not_of(" \t");
    tok = (a == std::string::npos) ? std::string() : tok.substr(a, b - a + 1);
  }
  return out;
}

}  // namespace

Mat read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open covariate file: " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t ncols = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto toks = split_csv_line(line);
    if (first_data_line) {
      // header detection: any non-numeric token in the first line
      bool numeric = true;
      double tmp;
      for (const auto& t : toks) {
        if (!parse_double(t, tmp)) {
          numeric = false;
          break;
        }
      }
      first_data_line = false;
      if (!numeric) {
        ncols = toks.size();
        continue;  // skip header row
      }
      ncols = toks.size();
    }
    if (toks.size() != ncols) {
      throw ConfigError(path.string() + ": row " + std::to_string(line_no) + " has " +
                        std::to_string(toks.size()) + " columns, expected " +
                        std::to_string(ncols));
    }
    std::vector<double> row(toks.size());
    for (std::size_t c = 0; c < toks.size(); ++c) {
      double v;
      if (!parse_double(toks[c], v)) {
        throw ConfigError(path.string() + ": non-numeric cell at row " + std::to_string(line_no) +
                          ", column " + std::to_string(c + 1) + ": '" + toks[c] + "'");
      }
      if (!std::isfinite(v)) {
        throw ConfigError(path.string() + ": non-finite cell at row " + std::to_string(line_no) +
                          ", column " + std::to_string(c + 1));
      }
      row[c] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ConfigError(path.string() + ": no data rows");
  }
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ncols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

std::string csv_from_matrix(const Mat& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 12);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(',');
      out += format_double(m(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

void write_csv_matrix(const fs::path& path, const Mat& m) {
  atomic_write(path, csv_from_matrix(m));
}

}  // namespace dbrlab::io
