#include "efa/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace efa::io {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path + ": line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void fail_field(const std::string& path, std::size_t line, std::size_t field,
                             const std::string& what) {
  throw std::runtime_error(path + ": line " + std::to_string(line) + ", field " +
                           std::to_string(field) + ": " + what);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& path, std::size_t line, std::size_t field,
                    const std::string& text) {
  const std::string t = trimmed(text);
  if (t.empty()) fail_field(path, line, field, "empty numeric field");
  const char* begin = t.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + t.size()) {
    fail_field(path, line, field, "cannot parse '" + t + "' as a number");
  }
  return v;
}

long parse_long(const std::string& path, std::size_t line, std::size_t field,
                const std::string& text) {
  const std::string t = trimmed(text);
  if (t.empty()) fail_field(path, line, field, "empty integer field");
  const char* begin = t.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (end != begin + t.size()) {
    fail_field(path, line, field, "cannot parse '" + t + "' as an integer");
  }
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open for reading");
  return in;
}

// Header fields after the marker tokens, e.g. "# complex 10 10 5".
std::vector<long> parse_header(const std::string& path, const std::string& line,
                               const std::string& tag, std::size_t count) {
  std::istringstream ss(line);
  std::string hash, word;
  ss >> hash >> word;
  if (hash != "#" || word != tag) {
    fail(path, 1, "expected header '# " + tag + " ...', got '" + line + "'");
  }
  std::vector<long> dims;
  long v = 0;
  while (ss >> v) dims.push_back(v);
  std::string leftover;
  if (ss.clear(), ss >> leftover) {
    fail(path, 1, "trailing content in header: '" + leftover + "'");
  }
  if (dims.size() != count) {
    fail(path, 1, "expected " + std::to_string(count) + " header dimensions, got " +
                      std::to_string(dims.size()));
  }
  for (long d : dims) {
    if (d < 0) fail(path, 1, "header dimensions must be nonnegative");
  }
  return dims;
}

void check_no_trailing(const std::string& path, std::istream& in, std::size_t line) {
  std::string rest;
  while (std::getline(in, rest)) {
    ++line;
    if (!trimmed(rest).empty()) fail(path, line, "unexpected content after the last row");
  }
}

}  // namespace

void write_matrix(const std::string& path, const Matrix& m) {
  if (m.rows() < 1 || m.cols() < 0) {
    throw std::invalid_argument("write_matrix: matrix must have at least one row");
  }
  std::ofstream out = open_out(path);
  out << "# complex " << m.rows() << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << fmt17(m(i, j).real()) << ',' << fmt17(m(i, j).imag());
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

Matrix read_matrix(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  const std::vector<long> dims = parse_header(path, line, "complex", 3);
  if (dims[0] != dims[1]) {
    fail(path, 1, "sensor count " + std::to_string(dims[0]) + " must equal row count " +
                      std::to_string(dims[1]));
  }
  if (dims[1] < 1) fail(path, 1, "matrix must have at least one row");
  const Index rows = dims[1];
  const Index cols = dims[2];

  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const std::size_t lineno = static_cast<std::size_t>(i) + 2;
    if (!std::getline(in, line)) fail(path, lineno, "missing matrix row");
    if (cols == 0) {
      if (!trimmed(line).empty()) fail(path, lineno, "expected an empty row");
      continue;
    }
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != static_cast<std::size_t>(2 * cols)) {
      fail(path, lineno, "expected " + std::to_string(2 * cols) + " fields, got " +
                             std::to_string(fields.size()));
    }
    for (Index j = 0; j < cols; ++j) {
      const std::size_t f = static_cast<std::size_t>(2 * j);
      const double re = parse_double(path, lineno, f + 1, fields[f]);
      const double im = parse_double(path, lineno, f + 2, fields[f + 1]);
      m(i, j) = Complex(re, im);
    }
  }
  check_no_trailing(path, in, static_cast<std::size_t>(rows) + 1);
  return m;
}

void write_mask(const std::string& path, const NoiseMask& mask) {
  std::ofstream out = open_out(path);
  const Index p = mask.dim();
  out << "# mask " << p << ' ' << p << '\n';
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (j > 0) out << ',';
      out << (mask.contains(i, j) ? '1' : '0');
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

NoiseMask read_mask(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  const std::vector<long> dims = parse_header(path, line, "mask", 2);
  if (dims[0] != dims[1]) fail(path, 1, "mask must be square");
  if (dims[0] < 1) fail(path, 1, "mask must have at least one row");
  const Index p = dims[0];

  BoolMatrix m(p, p);
  for (Index i = 0; i < p; ++i) {
    const std::size_t lineno = static_cast<std::size_t>(i) + 2;
    if (!std::getline(in, line)) fail(path, lineno, "missing mask row");
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != static_cast<std::size_t>(p)) {
      fail(path, lineno,
           "expected " + std::to_string(p) + " fields, got " + std::to_string(fields.size()));
    }
    for (Index j = 0; j < p; ++j) {
      const std::string t = trimmed(fields[static_cast<std::size_t>(j)]);
      if (t == "0") {
        m(i, j) = false;
      } else if (t == "1") {
        m(i, j) = true;
      } else {
        fail_field(path, lineno, static_cast<std::size_t>(j) + 1,
                   "mask fields must be 0 or 1, got '" + t + "'");
      }
    }
  }
  check_no_trailing(path, in, static_cast<std::size_t>(p) + 1);
  return NoiseMask(m);
}

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out = open_out(path);
  out << "iter,cost,grad_norm,mu,inner_iters,wall_ms\n";
  for (const TraceRecord& rec : records) {
    out << rec.iter << ',' << fmt17(rec.cost) << ',' << fmt17(rec.grad_norm) << ','
        << fmt17(rec.mu) << ',' << rec.inner_iters << ',' << fmt17(rec.wall_ms) << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<TraceRecord> read_trace_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "missing header");
  if (trimmed(line) != "iter,cost,grad_norm,mu,inner_iters,wall_ms") {
    fail(path, 1, "unexpected trace header '" + line + "'");
  }
  std::vector<TraceRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trimmed(line).empty()) {
      check_no_trailing(path, in, lineno);
      break;
    }
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != 6) {
      fail(path, lineno, "expected 6 fields, got " + std::to_string(fields.size()));
    }
    TraceRecord rec;
    rec.iter = parse_long(path, lineno, 1, fields[0]);
    rec.cost = parse_double(path, lineno, 2, fields[1]);
    rec.grad_norm = parse_double(path, lineno, 3, fields[2]);
    rec.mu = parse_double(path, lineno, 4, fields[3]);
    rec.inner_iters = parse_long(path, lineno, 5, fields[4]);
    rec.wall_ms = parse_double(path, lineno, 6, fields[5]);
    records.push_back(rec);
  }
  return records;
}

HermitianMatrix as_hermitian(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) {
    throw std::runtime_error("matrix is not square: " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
  }
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1.0);
  for (Index j = 0; j < m.cols(); ++j) {
    if (std::abs(m(j, j).imag()) > tol * scale) {
      throw std::runtime_error("matrix is not Hermitian: diagonal entry (" + std::to_string(j) +
                               "," + std::to_string(j) + ") has imaginary part " +
                               fmt17(m(j, j).imag()));
    }
    for (Index i = j + 1; i < m.rows(); ++i) {
      if (std::abs(m(i, j) - std::conj(m(j, i))) > tol * scale) {
        throw std::runtime_error("matrix is not Hermitian: entries (" + std::to_string(i) + "," +
                                 std::to_string(j) + ") and (" + std::to_string(j) + "," +
                                 std::to_string(i) + ") are not conjugates");
      }
    }
  }
  return HermitianMatrix::mirrored(m);
}

}  // namespace efa::io
