#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stgp {

/// Fixed spatial locations, one row per point (I x d).
struct SpaceGrid {
  Eigen::MatrixXd points;

  SpaceGrid() = default;
  explicit SpaceGrid(Eigen::MatrixXd pts);

  /// Equally spaced 1-d grid on [lo, hi].
  static SpaceGrid linspace(double lo, double hi, int n);
  /// rows x cols image grid with unit spacing; node (r, c) has index r*cols + c.
  static SpaceGrid image(int rows, int cols);

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

/// Strictly increasing observation times.
struct TimeGrid {
  Eigen::VectorXd times;

  TimeGrid() = default;
  explicit TimeGrid(Eigen::VectorXd t);

  static TimeGrid linspace(double lo, double hi, int n);

  int size() const { return static_cast<int>(times.size()); }
};

/// K trials, each an I x J matrix (rows are locations, columns are times).
struct SpatioTemporalDataset {
  SpaceGrid space;
  TimeGrid time;
  std::vector<Eigen::MatrixXd> trials;

  SpatioTemporalDataset() = default;
  SpatioTemporalDataset(SpaceGrid s, TimeGrid t, std::vector<Eigen::MatrixXd> y);

  int I() const { return space.size(); }
  int J() const { return time.size(); }
  int K() const { return static_cast<int>(trials.size()); }
};

struct SufficientStats {
  int I = 0;
  int J = 0;
  int K = 0;
  Eigen::VectorXd ybar;      // length IJ, trial mean of vec(Y_k)
  double ysq = 0.0;          // (1/K) sum_k tr(Y_k^T Y_k)
  Eigen::MatrixXd centered;  // IJ x K, column k is vec(Y_k) - ybar
};

/// Column-stacking index: space varies fastest. Both arguments and the result are 1-based.
std::size_t vec_index(std::size_t i, std::size_t j, std::size_t I, std::size_t J);

/// vec(Y) for an I x J matrix under the space-fastest convention.
inline Eigen::VectorXd vec(const Eigen::MatrixXd& y) {
  return Eigen::Map<const Eigen::VectorXd>(y.data(), y.size());
}

SufficientStats sufficient_stats(const SpatioTemporalDataset& ds);

enum class DatasetFormat { csv, binary };

DatasetFormat parse_dataset_format(const std::string& name);
DatasetFormat format_from_extension(const std::filesystem::path& path);

SpatioTemporalDataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const SpatioTemporalDataset& ds, const std::filesystem::path& path,
                  DatasetFormat format);

/// Writes bytes to `path` through a temporary sibling and a rename. Throws IoError.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal representation that round-trips the double.
std::string format_double(double v);

}  // namespace stgp
