#include "stgp/stdata.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "stgp/error.hpp"

namespace stgp {

namespace {

constexpr std::int64_t kBinaryMagic = 0x50475453;  // "STGP"
constexpr std::int64_t kBinaryVersion = 1;

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

SpaceGrid::SpaceGrid(Eigen::MatrixXd pts) : points(std::move(pts)) {
  if (points.rows() < 1) throw DomainError("space grid needs I >= 1 points");
  if (points.cols() < 1) throw DomainError("space grid needs dimension d >= 1");
  if (!all_finite(points)) throw DomainError("space grid has non-finite coordinates");
  for (Eigen::Index a = 0; a < points.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < points.rows(); ++b) {
      if ((points.row(a) - points.row(b)).squaredNorm() == 0.0) {
        throw DomainError("space grid points " + std::to_string(a) + " and " +
                          std::to_string(b) + " coincide");
      }
    }
  }
}

SpaceGrid SpaceGrid::linspace(double lo, double hi, int n) {
  Eigen::MatrixXd p(n, 1);
  p.col(0) = n == 1 ? Eigen::VectorXd(Eigen::VectorXd::Constant(1, lo)) : Eigen::VectorXd(Eigen::VectorXd::LinSpaced(n, lo, hi));
  return SpaceGrid(std::move(p));
}

SpaceGrid SpaceGrid::image(int rows, int cols) {
  if (rows < 1 || cols < 1) throw DomainError("image grid needs positive rows and cols");
  Eigen::MatrixXd p(rows * cols, 2);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      p(r * cols + c, 0) = r;
      p(r * cols + c, 1) = c;
    }
  }
  SpaceGrid g;
  g.points = std::move(p);  // distinct by construction; skip the O(I^2) check
  return g;
}

TimeGrid::TimeGrid(Eigen::VectorXd t) : times(std::move(t)) {
  if (times.size() < 1) throw DomainError("time grid needs J >= 1 points");
  if (!times.allFinite()) throw DomainError("time grid has non-finite values");
  if (times(0) < 0.0) throw DomainError("time grid values must be non-negative");
  for (Eigen::Index j = 1; j < times.size(); ++j) {
    if (!(times(j) > times(j - 1))) throw DomainError("time grid must be strictly increasing");
  }
}

TimeGrid TimeGrid::linspace(double lo, double hi, int n) {
  return TimeGrid(n == 1 ? Eigen::VectorXd::Constant(1, lo)
                         : Eigen::VectorXd::LinSpaced(n, lo, hi).eval());
}

SpatioTemporalDataset::SpatioTemporalDataset(SpaceGrid s, TimeGrid t,
                                             std::vector<Eigen::MatrixXd> y)
    : space(std::move(s)), time(std::move(t)), trials(std::move(y)) {
  if (trials.empty()) throw DomainError("K must be >= 1");
  for (std::size_t k = 0; k < trials.size(); ++k) {
    if (trials[k].rows() != I() || trials[k].cols() != J()) {
      throw DomainError("trial " + std::to_string(k) + " has shape " +
                        std::to_string(trials[k].rows()) + "x" + std::to_string(trials[k].cols()) +
                        ", expected " + std::to_string(I()) + "x" + std::to_string(J()));
    }
    if (!all_finite(trials[k])) {
      throw DomainError("trial " + std::to_string(k) + " has non-finite values");
    }
  }
}

std::size_t vec_index(std::size_t i, std::size_t j, std::size_t I, std::size_t J) {
  if (i < 1 || i > I || j < 1 || j > J) {
    throw DomainError("vec_index: (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") outside 1.." + std::to_string(I) + " x 1.." + std::to_string(J));
  }
  return (j - 1) * I + i;
}

SufficientStats sufficient_stats(const SpatioTemporalDataset& ds) {
  SufficientStats st;
  st.I = ds.I();
  st.J = ds.J();
  st.K = ds.K();
  const Eigen::Index n = static_cast<Eigen::Index>(st.I) * st.J;
  st.ybar = Eigen::VectorXd::Zero(n);
  st.ysq = 0.0;
  for (const auto& y : ds.trials) {
    st.ybar += vec(y);
    st.ysq += y.squaredNorm();
  }
  st.ybar /= st.K;
  st.ysq /= st.K;
  st.centered.resize(n, st.K);
  for (int k = 0; k < st.K; ++k) st.centered.col(k) = vec(ds.trials[k]) - st.ybar;
  return st;
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "csv") return DatasetFormat::csv;
  if (name == "binary" || name == "bin") return DatasetFormat::binary;
  throw ConfigError("unknown dataset format '" + name + "'");
}

DatasetFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::binary;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(parent, ec)) {
    throw IoError("directory '" + parent.string() + "' does not exist");
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw IoError("write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into '" + path.string() + "'");
  }
}

// ---------------------------------------------------------------------------
// CSV
//
//   # I=<I> J=<J> K=<K> d=<d>
//   # t=<t_1>,...,<t_J>
//   # x=<x_11>,...,<x_1d>;<x_21>,...;...
//   K blocks of I rows with J comma-separated values, blank line between blocks.

namespace {

std::string csv_encode(const SpatioTemporalDataset& ds) {
  std::string out;
  out += "# I=" + std::to_string(ds.I()) + " J=" + std::to_string(ds.J()) +
         " K=" + std::to_string(ds.K()) + " d=" + std::to_string(ds.space.dim()) + "\n";
  out += "# t=";
  for (int j = 0; j < ds.J(); ++j) {
    if (j) out += ',';
    out += format_double(ds.time.times(j));
  }
  out += "\n# x=";
  for (int i = 0; i < ds.I(); ++i) {
    if (i) out += ';';
    for (int c = 0; c < ds.space.dim(); ++c) {
      if (c) out += ',';
      out += format_double(ds.space.points(i, c));
    }
  }
  out += '\n';
  for (int k = 0; k < ds.K(); ++k) {
    if (k) out += '\n';
    const auto& y = ds.trials[k];
    for (int i = 0; i < ds.I(); ++i) {
      for (int j = 0; j < ds.J(); ++j) {
        if (j) out += ',';
        out += format_double(y(i, j));
      }
      out += '\n';
    }
  }
  return out;
}

std::vector<double> parse_values(const std::string& text, char sep, std::size_t line_no) {
  std::vector<double> vals;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(sep, pos);
    if (end == std::string::npos) end = text.size();
    const char* b = text.data() + pos;
    const char* e = text.data() + end;
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
    double v = 0.0;
    auto res = std::from_chars(b, e, v);
    if (b == e || res.ec != std::errc() || res.ptr != e) {
      throw ParseError("row " + std::to_string(line_no) + ": cannot parse value '" +
                       std::string(b, e) + "'");
    }
    vals.push_back(v);
    pos = end + 1;
  }
  return vals;
}

long header_field(const std::string& line, const std::string& key) {
  const std::string tag = key + "=";
  auto p = line.find(tag);
  if (p == std::string::npos) throw ParseError("row 1: malformed header, missing " + key);
  try {
    return std::stol(line.substr(p + tag.size()));
  } catch (const std::exception&) {
    throw ParseError("row 1: malformed header value for " + key);
  }
}

SpatioTemporalDataset csv_decode(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }
  if (lines.empty() || lines[0].rfind("# I=", 0) != 0) {
    throw ParseError("row 1: malformed header, expected '# I=<I> J=<J> K=<K> d=<d>'");
  }
  const long I = header_field(lines[0], "I");
  const long J = header_field(lines[0], "J");
  const long K = header_field(lines[0], "K");
  const long d = header_field(lines[0], "d");
  if (K < 1) throw ParseError("K must be >= 1");
  if (I < 1 || J < 1 || d < 1) throw ParseError("row 1: I, J and d must be positive");

  if (lines.size() < 3 || lines[1].rfind("# t=", 0) != 0) {
    throw ParseError("row 2: expected '# t=' time grid line");
  }
  auto tv = parse_values(lines[1].substr(4), ',', 2);
  if (static_cast<long>(tv.size()) != J) {
    throw ParseError("row 2: expected J=" + std::to_string(J) + " times, got " +
                     std::to_string(tv.size()));
  }
  if (lines[2].rfind("# x=", 0) != 0) throw ParseError("row 3: expected '# x=' location line");
  Eigen::MatrixXd pts(I, d);
  {
    const std::string body = lines[2].substr(4);
    std::size_t pos = 0;
    for (long i = 0; i < I; ++i) {
      std::size_t end = body.find(';', pos);
      if (end == std::string::npos) end = body.size();
      if (pos > body.size()) throw ParseError("row 3: expected I=" + std::to_string(I) + " points");
      auto pv = parse_values(body.substr(pos, end - pos), ',', 3);
      if (static_cast<long>(pv.size()) != d) {
        throw ParseError("row 3: point " + std::to_string(i + 1) + " has " +
                         std::to_string(pv.size()) + " coordinates, expected d=" +
                         std::to_string(d));
      }
      for (long c = 0; c < d; ++c) pts(i, c) = pv[c];
      pos = end + 1;
    }
    if (pos <= body.size()) throw ParseError("row 3: more than I=" + std::to_string(I) + " points");
  }

  std::vector<Eigen::MatrixXd> trials;
  std::size_t ln = 3;  // 0-based index into lines
  for (long k = 0; k < K; ++k) {
    if (k > 0) {
      if (ln >= lines.size() || !lines[ln].empty()) {
        throw ParseError("row " + std::to_string(ln + 1) + ": expected blank line between trials");
      }
      ++ln;
    }
    Eigen::MatrixXd y(I, J);
    for (long i = 0; i < I; ++i, ++ln) {
      if (ln >= lines.size() || lines[ln].empty()) {
        throw ParseError("row " + std::to_string(ln + 1) + ": trial " + std::to_string(k + 1) +
                         " has fewer than I=" + std::to_string(I) + " rows");
      }
      auto vals = parse_values(lines[ln], ',', ln + 1);
      if (static_cast<long>(vals.size()) != J) {
        throw ParseError("row " + std::to_string(ln + 1) + ": expected J=" + std::to_string(J) +
                         " values, got " + std::to_string(vals.size()));
      }
      for (long j = 0; j < J; ++j) y(i, j) = vals[j];
    }
    trials.push_back(std::move(y));
  }
  for (; ln < lines.size(); ++ln) {
    if (!lines[ln].empty()) {
      throw ParseError("row " + std::to_string(ln + 1) + ": unexpected data after K=" +
                       std::to_string(K) + " trials");
    }
  }
  try {
    Eigen::VectorXd t = Eigen::Map<Eigen::VectorXd>(tv.data(), J);
    return SpatioTemporalDataset(SpaceGrid(std::move(pts)), TimeGrid(std::move(t)),
                                 std::move(trials));
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Binary: 8 little-endian int64 (magic, version, I, J, K, d, 0, 0), then the
// I x d coordinates (point-major), the J times, and the K trials column-major.

void put_i64(std::string& out, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

void put_f64(std::string& out, double v) { put_i64(out, std::bit_cast<std::int64_t>(v)); }

std::int64_t get_i64(const std::string& in, std::size_t& pos) {
  if (pos + 8 > in.size()) throw ParseError("binary dataset truncated at byte " + std::to_string(pos));
  std::uint64_t u = 0;
  for (int b = 0; b < 8; ++b) {
    u |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b])) << (8 * b);
  }
  pos += 8;
  return static_cast<std::int64_t>(u);
}

double get_f64(const std::string& in, std::size_t& pos) {
  return std::bit_cast<double>(get_i64(in, pos));
}

std::string binary_encode(const SpatioTemporalDataset& ds) {
  std::string out;
  const std::int64_t I = ds.I(), J = ds.J(), K = ds.K(), d = ds.space.dim();
  out.reserve(static_cast<std::size_t>(8 * (8 + I * d + J + I * J * K)));
  for (auto v : {kBinaryMagic, kBinaryVersion, I, J, K, d, std::int64_t{0}, std::int64_t{0}}) {
    put_i64(out, v);
  }
  for (std::int64_t i = 0; i < I; ++i)
    for (std::int64_t c = 0; c < d; ++c) put_f64(out, ds.space.points(i, c));
  for (std::int64_t j = 0; j < J; ++j) put_f64(out, ds.time.times(j));
  for (const auto& y : ds.trials)
    for (std::int64_t j = 0; j < J; ++j)
      for (std::int64_t i = 0; i < I; ++i) put_f64(out, y(i, j));
  return out;
}

SpatioTemporalDataset binary_decode(const std::string& in) {
  std::size_t pos = 0;
  if (get_i64(in, pos) != kBinaryMagic) throw ParseError("binary dataset: bad magic");
  if (get_i64(in, pos) != kBinaryVersion) throw ParseError("binary dataset: unsupported version");
  const std::int64_t I = get_i64(in, pos), J = get_i64(in, pos), K = get_i64(in, pos),
                     d = get_i64(in, pos);
  get_i64(in, pos);
  get_i64(in, pos);
  if (K < 1) throw ParseError("K must be >= 1");
  if (I < 1 || J < 1 || d < 1) throw ParseError("binary dataset: I, J and d must be positive");
  const auto expected = static_cast<std::size_t>(8 * (8 + I * d + J + I * J * K));
  if (in.size() != expected) {
    throw ParseError("binary dataset: size " + std::to_string(in.size()) + " bytes, expected " +
                     std::to_string(expected));
  }
  Eigen::MatrixXd pts(I, d);
  for (std::int64_t i = 0; i < I; ++i)
    for (std::int64_t c = 0; c < d; ++c) pts(i, c) = get_f64(in, pos);
  Eigen::VectorXd t(J);
  for (std::int64_t j = 0; j < J; ++j) t(j) = get_f64(in, pos);
  std::vector<Eigen::MatrixXd> trials(K, Eigen::MatrixXd(I, J));
  for (auto& y : trials)
    for (std::int64_t j = 0; j < J; ++j)
      for (std::int64_t i = 0; i < I; ++i) y(i, j) = get_f64(in, pos);
  try {
    return SpatioTemporalDataset(SpaceGrid(std::move(pts)), TimeGrid(std::move(t)),
                                 std::move(trials));
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
}

}  // namespace

SpatioTemporalDataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (!std::filesystem::exists(path)) throw IoError("dataset '" + path.string() + "' not found");
  const std::string text = read_file(path);
  return format == DatasetFormat::csv ? csv_decode(text) : binary_decode(text);
}

void save_dataset(const SpatioTemporalDataset& ds, const std::filesystem::path& path,
                  DatasetFormat format) {
  atomic_write(path, format == DatasetFormat::csv ? csv_encode(ds) : binary_encode(ds));
}

}  // namespace stgp
