#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridtopo/topology.hpp"

namespace gridtopo {

// Row-major dense matrix of kW values; row = node, column = timestep.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Metered active power per node and timestep. `readings` holds what each
// node's meter reports (aggregate for internal nodes); `individual` holds a
// node's own consumption when that channel is known.
struct MeasurementMatrix {
  DenseMatrix readings;
  std::optional<DenseMatrix> individual;

  std::size_t nodes() const noexcept {
    return readings.empty() && individual ? individual->rows() : readings.rows();
  }
  std::size_t timesteps() const noexcept {
    return readings.empty() && individual ? individual->cols() : readings.cols();
  }
  bool has_readings() const noexcept { return !readings.empty(); }
};

enum class AggregationMode {
  // Internal node reads exactly the sum of its children; own load ignored.
  kPureSum,
  // Every node reads its own load plus the sum of its children.
  kOwnLoad,
};

enum class NoiseMode { kAdditive, kMultiplicative };

// Gaussian meter error. `sigma` is a standard deviation in kW (additive) or a
// fraction of the true value (multiplicative).
struct NoiseModel {
  double sigma = 0.0;
  NoiseMode mode = NoiseMode::kAdditive;
  std::uint64_t seed = 0;
};

std::string_view to_string(AggregationMode mode);
std::string_view to_string(NoiseMode mode);
AggregationMode parse_aggregation_mode(std::string_view text);
NoiseMode parse_noise_mode(std::string_view text);

// I.i.d. uniform loads on [lo, hi] for every node and timestep. Only the
// individual channel is populated.
MeasurementMatrix sample_loads(const Topology& topology, std::size_t timesteps,
                               double lo, double hi, std::uint64_t seed);

// Propagates loads up the tree. The individual channel is carried through.
MeasurementMatrix aggregate_readings(const Topology& topology,
                                     const MeasurementMatrix& loads,
                                     AggregationMode mode);

// Returns a perturbed copy; every populated channel receives independent
// draws. sigma == 0 returns the input unchanged.
MeasurementMatrix inject_noise(const MeasurementMatrix& x, const NoiseModel& noise);

// CSV with one row per node and one column per timestep. Values are written
// in shortest round-trip form. Lines starting with '#' are skipped on read.
std::string write_csv(const DenseMatrix& m);
DenseMatrix read_csv(std::string_view text);

}  // namespace gridtopo
