#pragma once

// File formats: NLFIELD v1, NLDUAL-OSC v1, NLDUAL-FRAC v1, PGM masks and CSV
// time series. Text is ASCII with LF line endings; binary payloads are
// little-endian IEEE doubles. Writers go through a temporary file and rename.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "nlflow/error.hpp"
#include "nlflow/flow.hpp"
#include "nlflow/grid.hpp"
#include "nlflow/rof_solver.hpp"

namespace nlflow::io {

enum class Encoding { ascii, bin64 };

/// Shortest decimal text that reads back to the same double.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io_error, "cannot open " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    require(static_cast<bool>(out), ErrorCode::io_error, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorCode::io_error, "cannot rename to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline void put_f64(std::string& out, double v) {
  std::uint64_t b = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((b >> (8 * i)) & 0xFF));
}

inline double get_f64(const unsigned char* p) {
  std::uint64_t b = 0;
  for (int i = 7; i >= 0; --i) b = (b << 8) | p[i];
  return std::bit_cast<double>(b);
}

inline std::string grid_line(const GridSpec& s) {
  std::string line = std::to_string(s.ndims());
  for (int a = 0; a < s.ndims(); ++a) line += " " + std::to_string(s.dim(a));
  return line + " " + fmt(s.dx()) + " " + std::to_string(s.halo()) + "\n";
}

/// Sequential reader over a byte buffer with line-oriented headers.
class Cursor {
 public:
  explicit Cursor(const std::string& data) : data_(data) {}

  std::string line() {
    const auto nl = data_.find('\n', pos_);
    require(nl != std::string::npos, ErrorCode::parse_error, "unexpected end of header");
    std::string l = data_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return l;
  }

  std::vector<double> doubles(std::size_t n) {
    require(data_.size() - pos_ >= n * 8, ErrorCode::parse_error, "truncated binary payload");
    std::vector<double> v(n);
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data() + pos_);
    for (std::size_t i = 0; i < n; ++i) v[i] = get_f64(p + 8 * i);
    pos_ += n * 8;
    return v;
  }

  std::string rest() const { return data_.substr(pos_); }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::size_t pos_ = 0;
};

/// Whole-token decimal parse; accepts subnormals, unlike std::stod.
inline bool parse_double(const std::string& tok, double& x) {
  const char* end = tok.data() + tok.size();
  const auto r = std::from_chars(tok.data(), end, x);
  return r.ec == std::errc() && r.ptr == end;
}

inline GridSpec parse_grid(const std::string& line) {
  std::istringstream in(line);
  int nd = 0;
  require(static_cast<bool>(in >> nd) && (nd == 2 || nd == 3), ErrorCode::parse_error,
          "bad grid line '" + line + "'");
  std::vector<int> dims(nd);
  for (int& d : dims) require(static_cast<bool>(in >> d), ErrorCode::parse_error, "bad dims");
  std::string dxs;
  int halo = 0;
  require(static_cast<bool>(in >> dxs >> halo), ErrorCode::parse_error, "bad grid line");
  double dx = 0.0;
  require(parse_double(dxs, dx), ErrorCode::parse_error, "bad dx '" + dxs + "'");
  try {
    return GridSpec(dims, dx, halo);
  } catch (const Error& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
}

inline void expect(const std::string& got, const std::string& want) {
  require(got == want, ErrorCode::parse_error, "expected '" + want + "', got '" + got + "'");
}

inline std::vector<double> read_values(Cursor& cur, std::size_t n, const std::string& enc) {
  if (enc == "bin64") return cur.doubles(n);
  require(enc == "ascii", ErrorCode::parse_error, "unknown encoding '" + enc + "'");
  std::istringstream in(cur.rest());
  std::vector<double> v(n);
  for (double& x : v) {
    std::string tok;
    require(static_cast<bool>(in >> tok), ErrorCode::parse_error, "too few values");
    require(parse_double(tok, x), ErrorCode::parse_error, "bad value '" + tok + "'");
  }
  return v;
}

}  // namespace detail

inline std::string encode_field(const ScalarField& f, Encoding enc = Encoding::bin64) {
  std::string out = "NLFIELD v1\n" + detail::grid_line(f.spec());
  if (enc == Encoding::bin64) {
    out += "bin64\n";
    out.reserve(out.size() + 8 * f.size());
    for (double v : f.raw()) detail::put_f64(out, v);
  } else {
    out += "ascii\n";
    const int last = f.spec().dim(f.spec().ndims() - 1);
    for (std::size_t i = 0; i < f.size(); ++i)
      out += fmt(f[i]) + ((i + 1) % static_cast<std::size_t>(last) == 0 ? "\n" : " ");
  }
  return out;
}

inline ScalarField decode_field(const std::string& data) {
  detail::Cursor cur(data);
  detail::expect(cur.line(), "NLFIELD v1");
  const GridSpec spec = detail::parse_grid(cur.line());
  const std::string enc = cur.line();
  std::vector<double> v = detail::read_values(cur, spec.size(), enc);
  for (double x : v) require(std::isfinite(x), ErrorCode::parse_error, "non-finite value");
  return ScalarField(spec, std::move(v));
}

inline void write_field(const std::filesystem::path& p, const ScalarField& f,
                        Encoding enc = Encoding::bin64) {
  atomic_write(p, encode_field(f, enc));
}
inline ScalarField read_field(const std::filesystem::path& p) { return decode_field(read_file(p)); }

inline std::string encode_dual(const Dual& d) {
  std::string out;
  if (auto* f = std::get_if<FracDual>(&d)) {
    out = "NLDUAL-FRAC v1\n" + detail::grid_line(f->spec) + std::to_string(f->width) + "\nbin64\n";
    for (double v : f->z) detail::put_f64(out, v);
    return out;
  }
  std::vector<const OscDual*> parts;
  if (auto* o = std::get_if<OscDual>(&d)) parts.push_back(o);
  if (auto* w = std::get_if<WeightedOscDual>(&d))
    for (const auto& p : w->parts) parts.push_back(&p);
  require(!parts.empty(), ErrorCode::invalid_argument, "empty dual");
  out = "NLDUAL-OSC v1\n" + detail::grid_line(parts[0]->spec);
  out += std::to_string(parts.size()) + (d.index() == 2 ? " weighted" : " single") + "\n";
  for (const OscDual* p : parts)
    out += std::to_string(p->windows) + " " + std::to_string(p->width) + "\n";
  out += "bin64\n";
  for (const OscDual* p : parts)
    for (std::size_t w = 0; w < p->windows; ++w) {
      for (double v : p->a_of(w)) detail::put_f64(out, v);
      for (double v : p->b_of(w)) detail::put_f64(out, v);
    }
  return out;
}

inline Dual decode_dual(const std::string& data) {
  detail::Cursor cur(data);
  const std::string magic = cur.line();
  if (magic == "NLDUAL-FRAC v1") {
    FracDual f;
    f.spec = detail::parse_grid(cur.line());
    f.width = std::stoul(cur.line());
    detail::expect(cur.line(), "bin64");
    f.z = cur.doubles(f.spec.size() * f.width);
    return f;
  }
  detail::expect(magic, "NLDUAL-OSC v1");
  const GridSpec spec = detail::parse_grid(cur.line());
  std::istringstream pl(cur.line());
  std::size_t nparts = 0;
  std::string kind;
  require(static_cast<bool>(pl >> nparts >> kind) && nparts >= 1 &&
              (kind == "single" || kind == "weighted"),
          ErrorCode::parse_error, "bad part line");
  WeightedOscDual w;
  for (std::size_t k = 0; k < nparts; ++k) {
    std::istringstream in(cur.line());
    OscDual p;
    p.spec = spec;
    require(static_cast<bool>(in >> p.windows >> p.width), ErrorCode::parse_error, "bad part size");
    w.parts.push_back(std::move(p));
  }
  detail::expect(cur.line(), "bin64");
  for (OscDual& p : w.parts) {
    p.a.resize(p.windows * p.width);
    p.b.resize(p.windows * p.width);
    for (std::size_t i = 0; i < p.windows; ++i) {
      const auto a = cur.doubles(p.width), b = cur.doubles(p.width);
      std::copy(a.begin(), a.end(), p.a.begin() + i * p.width);
      std::copy(b.begin(), b.end(), p.b.begin() + i * p.width);
    }
  }
  if (kind == "single") {
    require(nparts == 1, ErrorCode::parse_error, "single dual with several parts");
    return std::move(w.parts.front());
  }
  return w;
}

inline void write_dual(const std::filesystem::path& p, const Dual& d) { atomic_write(p, encode_dual(d)); }
inline Dual read_dual(const std::filesystem::path& p) { return decode_dual(read_file(p)); }

/// PGM with members 255 and non-members 0, halo included. Rows run over all
/// axes but the last.
inline std::string encode_pgm(const SetMask& m, bool binary = true) {
  const GridSpec& s = m.spec();
  const int width = s.dim(s.ndims() - 1);
  const std::size_t height = m.size() / static_cast<std::size_t>(width);
  std::string out = std::string(binary ? "P5" : "P2") + "\n" + std::to_string(width) + " " +
                    std::to_string(height) + "\n255\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (binary) {
      out.push_back(static_cast<char>(m[i] ? 255 : 0));
    } else {
      out += m[i] ? "255" : "0";
      out += (i + 1) % static_cast<std::size_t>(width) == 0 ? "\n" : " ";
    }
  }
  return out;
}

inline SetMask decode_pgm(const std::string& data, const GridSpec& spec) {
  std::istringstream in(data);
  std::string magic;
  std::size_t w = 0, h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  require(static_cast<bool>(in) && (magic == "P2" || magic == "P5") && maxval > 0 && maxval < 256,
          ErrorCode::parse_error, "bad PGM header");
  require(w * h == spec.size() && w == static_cast<std::size_t>(spec.dim(spec.ndims() - 1)),
          ErrorCode::parse_error, "PGM size does not match the grid");
  SetMask m(spec);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    const auto start = static_cast<std::size_t>(in.tellg());
    require(data.size() >= start + m.size(), ErrorCode::parse_error, "truncated PGM");
    for (std::size_t i = 0; i < m.size(); ++i)
      m[i] = static_cast<unsigned char>(data[start + i]) > maxval / 2 ? 1 : 0;
  } else {
    for (std::size_t i = 0; i < m.size(); ++i) {
      int v = 0;
      require(static_cast<bool>(in >> v), ErrorCode::parse_error, "truncated PGM");
      m[i] = v > maxval / 2 ? 1 : 0;
    }
  }
  return m;
}

inline void write_pgm(const std::filesystem::path& p, const SetMask& m, bool binary = true) {
  atomic_write(p, encode_pgm(m, binary));
}
inline SetMask read_pgm(const std::filesystem::path& p, const GridSpec& spec) {
  return decode_pgm(read_file(p), spec);
}

inline std::string trajectory_csv(const FlowTrajectory& tr) {
  std::string out = "t,area,perimeter,equiv_radius,min_u,max_u,solver_iters,residual\n";
  for (const FlowStep& st : tr.steps) {
    const FlowStats& s = st.stats;
    out += fmt(s.t) + "," + fmt(s.area) + "," + fmt(s.perimeter) + "," + fmt(s.equiv_radius) + "," +
           fmt(s.min_u) + "," + fmt(s.max_u) + "," + std::to_string(s.solver_iters) + "," +
           fmt(s.residual) + "\n";
  }
  return out;
}

/// "step_0007.pgm"-style name.
inline std::string frame_name(const std::string& prefix, std::size_t k, int digits = 4) {
  std::ostringstream ss;
  ss << prefix << std::setw(digits) << std::setfill('0') << k << ".pgm";
  return ss.str();
}

}  // namespace nlflow::io
