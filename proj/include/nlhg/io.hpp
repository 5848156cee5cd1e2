// Binary field dumps (magic "NLHG"), CSV emission, and run manifests.
// Dump layout: magic, u32 version, u32 d, u32 m, u64 shape[d], f64 h,
// f64 origin[d], u8 exterior flag, f64 exterior[m], then cell values as
// row-major little-endian f64 (axis 0 slowest), m components interleaved.
#ifndef NLHG_IO_HPP
#define NLHG_IO_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "nlhg/grid.hpp"

namespace nlhg {

namespace detail {

template <class T>
void write_raw(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace detail

inline void dump_field(const std::string& path, const GridFunction& u) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "dump_field: cannot open " + path);
  const GridDomain& dom = u.domain();
  os.write("NLHG", 4);
  detail::write_raw<std::uint32_t>(os, 1u);
  detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(dom.d));
  detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(u.m));
  for (int i = 0; i < dom.d; ++i) {
    detail::write_raw<std::uint64_t>(os, static_cast<std::uint64_t>(dom.shape[i]));
  }
  detail::write_raw<double>(os, dom.h);
  for (int i = 0; i < dom.d; ++i) detail::write_raw<double>(os, dom.lo[i]);
  detail::write_raw<std::uint8_t>(os, u.exterior ? 1 : 0);
  for (int c = 0; c < u.m; ++c) {
    detail::write_raw<double>(os, u.exterior ? (*u.exterior)[c] : 0.0);
  }
  os.write(reinterpret_cast<const char*>(u.values.data()),
           static_cast<std::streamsize>(u.values.size() * sizeof(double)));
  require(os.good(), "dump_field: write failed for " + path);
}

inline GridFunction load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "load_field: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(std::string(magic, 4) == "NLHG", "load_field: bad magic");
  const auto version = detail::read_raw<std::uint32_t>(is);
  require(version == 1, "load_field: unsupported version");
  const int d = static_cast<int>(detail::read_raw<std::uint32_t>(is));
  const int m = static_cast<int>(detail::read_raw<std::uint32_t>(is));
  require(d >= 1 && d <= kMaxDim && m >= 1, "load_field: bad dimensions");

  GridDomain dom;
  dom.d = d;
  for (int i = 0; i < d; ++i) {
    dom.shape[i] = static_cast<Index>(detail::read_raw<std::uint64_t>(is));
  }
  dom.h = detail::read_raw<double>(is);
  for (int i = 0; i < d; ++i) dom.lo[i] = detail::read_raw<double>(is);
  dom.stride[d - 1] = 1;
  for (int i = d - 2; i >= 0; --i) dom.stride[i] = dom.stride[i + 1] * dom.shape[i + 1];
  dom.ncells = dom.stride[0] * dom.shape[0];

  const auto has_ext = detail::read_raw<std::uint8_t>(is);
  std::vector<double> ext(static_cast<std::size_t>(m));
  for (int c = 0; c < m; ++c) ext[c] = detail::read_raw<double>(is);

  GridFunction u = make_field(std::make_shared<GridDomain>(std::move(dom)), m);
  if (has_ext) u.exterior = ext;
  is.read(reinterpret_cast<char*>(u.values.data()),
          static_cast<std::streamsize>(u.values.size() * sizeof(double)));
  require(is.good(), "load_field: truncated file");
  return u;
}

// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : os_(path), ncols_(header.size()) {
    require(os_.good(), "csv: cannot open " + path);
    write_cells(header);
  }

  void row(const std::vector<std::string>& cells) {
    require(cells.size() == ncols_, "csv: column count mismatch");
    write_cells(cells);
  }

  static std::string num(double v) { return format_double(v); }
  static std::string num(int v) { return std::to_string(v); }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << cells[i];
    }
    os_ << '\n';
  }
  std::ofstream os_;
  std::size_t ncols_;
};

// one row per active cell: x1..xd, u1..um
inline void export_field_csv(const std::string& path, const GridFunction& u) {
  const GridDomain& dom = u.domain();
  std::vector<std::string> header;
  for (int i = 0; i < dom.d; ++i) header.push_back("x" + std::to_string(i + 1));
  for (int c = 0; c < u.m; ++c) header.push_back("u" + std::to_string(c + 1));
  CsvWriter csv(path, header);
  MultiIndex mi{};
  Coord x{};
  std::vector<std::string> cells(header.size());
  for (Index lin = 0; lin < dom.ncells; ++lin) {
    if (dom.active(lin)) {
      dom.center(mi, x.data());
      for (int i = 0; i < dom.d; ++i) cells[static_cast<std::size_t>(i)] = format_double(x[i]);
      for (int c = 0; c < u.m; ++c) {
        cells[static_cast<std::size_t>(dom.d + c)] = format_double(u.values[lin * u.m + c]);
      }
      csv.row(cells);
    }
    for (int i = dom.d - 1; i >= 0; --i) {
      if (++mi[i] < dom.shape[i]) break;
      mi[i] = 0;
    }
  }
}

}  // namespace nlhg

#endif  // NLHG_IO_HPP
