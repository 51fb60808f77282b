#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "recten/tensor.hpp"

namespace recten {

namespace {

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

SparseTensor3 read_tensor(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  Dims dims{0, 0, 0};
  bool have_dims = false;
  std::vector<Entry> raw;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_comment(line);
    if (blank(line)) continue;
    std::istringstream ss(line);
    if (!have_dims) {
      std::string tag;
      long long d[3];
      if (!(ss >> tag >> d[0] >> d[1] >> d[2]) || tag != "dims" || d[0] <= 0 || d[1] <= 0 || d[2] <= 0) {
        throw std::invalid_argument("line " + std::to_string(lineno) + ": expected `dims I J K`");
      }
      dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1]), static_cast<std::size_t>(d[2])};
      have_dims = true;
      continue;
    }
    long long i, j, k;
    double v;
    std::string rest;
    if (!(ss >> i >> j >> k >> v) || (ss >> rest) || i < 0 || j < 0 || k < 0) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected `i j k value`");
    }
    if (static_cast<std::size_t>(i) >= dims[0] || static_cast<std::size_t>(j) >= dims[1] ||
        static_cast<std::size_t>(k) >= dims[2]) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": coordinate out of range");
    }
    raw.push_back({{static_cast<Index>(i), static_cast<Index>(j), static_cast<Index>(k)}, v});
  }
  if (!have_dims) throw std::invalid_argument("tensor file has no `dims` line");
  return SparseTensor3::from_coo(dims, std::move(raw));
}

SparseTensor3 read_tensor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tensor file " + path);
  return read_tensor(in);
}

void write_tensor(std::ostream& out, const SparseTensor3& t) {
  const auto& d = t.dims();
  out << "dims " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n';
  char buf[64];
  for (const auto& e : t.entries()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.value);
    out << e.idx[0] << ' ' << e.idx[1] << ' ' << e.idx[2] << ' ' << buf << '\n';
  }
}

void write_tensor_file(const std::string& path, const SparseTensor3& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tensor file " + path);
  write_tensor(out, t);
  if (!out) throw std::runtime_error("error writing tensor file " + path);
}

}  // namespace recten
