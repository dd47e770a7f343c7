#pragma once

#include "predpca/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace predpca {

/// An observation sequence: one row per time step. `mean` holds the vector
/// subtracted by `center` (zero until then) so test data and predictions can
/// be moved back and forth between centered and original units.
struct TimeSeries {
  Matrix data;   // T x N_s
  Vector mean;   // N_s
  std::string name;

  TimeSeries() = default;
  TimeSeries(Matrix d, std::string label = "");

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }
};

/// Paired design matrices for lag-embedded prediction. Row t of `phi` stacks
/// (s_t, s_{t-1}, ..., s_{t-K_p+1}) newest block first, and row t of
/// `targets[k-1]` is s_{t+k} for the same anchor time.
struct LagDataset {
  Matrix phi;                   // T' x (K_p * N_s)
  std::vector<Matrix> targets;  // K_f matrices, each T' x N_s
  int k_p = 0;
  int k_f = 0;

  Eigen::Index rows() const { return phi.rows(); }
  Eigen::Index n_phi() const { return phi.cols(); }
  Eigen::Index n_s() const { return targets.empty() ? 0 : targets[0].cols(); }
};

// PMAT: "PMAT" magic, u32 LE version (=1), u32 LE rows, u32 LE cols, then
// rows*cols float64 LE in row-major order. Bit-exact round trip.
TimeSeries load_matrix(const std::filesystem::path& path);
void save_matrix(const TimeSeries& series, const std::filesystem::path& path);
void save_matrix(const Matrix& m, const std::filesystem::path& path);

/// CSV import: comma-separated decimal floats, one row per line, no header.
TimeSeries load_csv(const std::filesystem::path& path);

/// Raw IDX container (big-endian MNIST format).
struct IdxData {
  std::vector<std::uint8_t> data;  // flattened, first dimension slowest
  std::vector<int> dims;

  std::size_t element_count() const;
};

IdxData load_idx(const std::filesystem::path& path);

/// Subtract column means; the returned series stores the subtracted vector.
TimeSeries center(const TimeSeries& series);

/// Center with a precomputed (training) mean.
TimeSeries center_with(const TimeSeries& series, const Vector& mean);

/// Build the lag-embedded dataset. Boundary rows are dropped, never padded:
/// T' = T - K_p + 1 - K_f.
LagDataset lag_embed(const TimeSeries& series, int k_p, int k_f);

/// First floor(train_fraction * T) rows and the remainder, order preserved.
std::pair<TimeSeries, TimeSeries> split_contiguous(const TimeSeries& series,
                                                   double train_fraction);

}  // namespace predpca
