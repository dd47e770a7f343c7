#include "predpca/dataio.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace predpca {

namespace {

constexpr char kMagic[4] = {'P', 'M', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f64_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int byte = 0; byte < 8; ++byte)
    out.push_back(static_cast<char>((bits >> (8 * byte)) & 0xff));
}

double get_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int byte = 7; byte >= 0; --byte) bits = (bits << 8) | p[byte];
  return std::bit_cast<double>(bits);
}

std::uint32_t get_u32_be(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("read failure on " + path.string());
  return buffer.str();
}

}  // namespace

TimeSeries::TimeSeries(Matrix d, std::string label)
    : data(std::move(d)), name(std::move(label)) {
  if (data.rows() < 1 || data.cols() < 1) throw DimensionError("TimeSeries: empty matrix");
  mean = Vector::Zero(data.cols());
}

TimeSeries load_matrix(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16) throw FormatError("PMAT: file shorter than header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("PMAT: bad magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = get_u32_le(p + 4);
  if (version != kVersion) throw FormatError("PMAT: unsupported version");
  const std::uint64_t rows = get_u32_le(p + 8);
  const std::uint64_t cols = get_u32_le(p + 12);
  if (rows == 0 || cols == 0) throw FormatError("PMAT: zero dimension");
  const std::uint64_t expected = rows * cols;
  if (expected > (std::size_t(1) << 31)) throw FormatError("PMAT: shape overflow");
  if (bytes.size() != 16 + expected * 8)
    throw FormatError("PMAT: payload length does not match header shape");

  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const unsigned char* cursor = p + 16;
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j, cursor += 8)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = get_f64_le(cursor);
  if (!m.allFinite()) throw DataError("PMAT: non-finite entries in " + path.string());

  TimeSeries out(std::move(m), path.stem().string());
  return out;
}

void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  if (m.rows() < 1 || m.cols() < 1) throw DimensionError("save_matrix: empty matrix");
  if (!m.allFinite()) throw DataError("save_matrix: non-finite entries");

  std::string bytes;
  bytes.reserve(16 + static_cast<std::size_t>(m.size()) * 8);
  bytes.append(kMagic, 4);
  put_u32_le(bytes, kVersion);
  put_u32_le(bytes, static_cast<std::uint32_t>(m.rows()));
  put_u32_le(bytes, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64_le(bytes, m(i, j));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out.good()) throw IoError("write failure on " + path.string());
}

void save_matrix(const TimeSeries& series, const std::filesystem::path& path) {
  save_matrix(series.data, path);
}

TimeSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
          ++pos;
        if (pos != cell.size()) throw FormatError("CSV: trailing junk in cell '" + cell + "'");
      } catch (const std::invalid_argument&) {
        throw FormatError("CSV: cannot parse cell '" + cell + "'");
      } catch (const std::out_of_range&) {
        throw FormatError("CSV: value out of range in cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError("CSV: ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("CSV: empty file");

  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  if (!m.allFinite()) throw DataError("CSV: non-finite entries");
  return TimeSeries(std::move(m), path.stem().string());
}

std::size_t IdxData::element_count() const {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

IdxData load_idx(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 4) throw FormatError("IDX: file shorter than magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t magic = get_u32_be(p);
  if (magic != 0x00000801u && magic != 0x00000803u)
    throw FormatError("IDX: unknown magic");
  const int n_dims = static_cast<int>(magic & 0xff);
  const std::size_t header = 4 + 4 * static_cast<std::size_t>(n_dims);
  if (bytes.size() < header) throw FormatError("IDX: truncated dimension header");

  IdxData out;
  std::size_t total = 1;
  for (int d = 0; d < n_dims; ++d) {
    const std::uint32_t extent = get_u32_be(p + 4 + 4 * d);
    out.dims.push_back(static_cast<int>(extent));
    total *= extent;
  }
  if (bytes.size() != header + total) throw FormatError("IDX: truncated payload");
  out.data.assign(p + header, p + header + total);
  return out;
}

TimeSeries center(const TimeSeries& series) {
  TimeSeries out = series;
  const Vector column_means = series.data.colwise().mean();
  out.data.rowwise() -= column_means.transpose();
  out.mean = series.mean + column_means;
  return out;
}

TimeSeries center_with(const TimeSeries& series, const Vector& mean) {
  if (mean.size() != series.cols()) throw DimensionError("center_with: mean length");
  TimeSeries out = series;
  out.data.rowwise() -= mean.transpose();
  out.mean = series.mean + mean;
  return out;
}

LagDataset lag_embed(const TimeSeries& series, int k_p, int k_f) {
  if (k_p < 1 || k_f < 1) throw ParameterError("lag_embed: K_p and K_f must be >= 1");
  const Eigen::Index t = series.rows();
  const Eigen::Index n_s = series.cols();
  const Eigen::Index t_prime = t - k_p + 1 - k_f;
  if (t <= k_p + k_f || t_prime < 1)
    throw DimensionError("lag_embed: series too short for requested lags");

  LagDataset out;
  out.k_p = k_p;
  out.k_f = k_f;
  out.phi = Matrix(t_prime, static_cast<Eigen::Index>(k_p) * n_s);
  // Anchor time of row i is t = K_p - 1 + i; newest block first.
  for (int lag = 0; lag < k_p; ++lag)
    out.phi.middleCols(static_cast<Eigen::Index>(lag) * n_s, n_s) =
        series.data.middleRows(k_p - 1 - lag, t_prime);
  out.targets.reserve(static_cast<std::size_t>(k_f));
  for (int k = 1; k <= k_f; ++k)
    out.targets.push_back(series.data.middleRows(k_p - 1 + k, t_prime));
  return out;
}

std::pair<TimeSeries, TimeSeries> split_contiguous(const TimeSeries& series,
                                                   double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ParameterError("split_contiguous: fraction must be in (0, 1)");
  const Eigen::Index t = series.rows();
  const auto n_train =
      static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(t)));
  if (n_train < 1 || n_train >= t)
    throw DimensionError("split_contiguous: degenerate split");

  TimeSeries train = series;
  train.data = series.data.topRows(n_train);
  train.name = series.name + ".train";
  TimeSeries test = series;
  test.data = series.data.bottomRows(t - n_train);
  test.name = series.name + ".test";
  return {std::move(train), std::move(test)};
}

}  // namespace predpca
