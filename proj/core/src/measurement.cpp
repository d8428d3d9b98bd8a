#include "gridtopo/measurement.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "gridtopo/error.hpp"
#include "gridtopo/random.hpp"

namespace gridtopo {

std::string_view to_string(AggregationMode mode) {
  return mode == AggregationMode::kPureSum ? "pure_sum" : "own_load";
}

std::string_view to_string(NoiseMode mode) {
  return mode == NoiseMode::kAdditive ? "additive" : "multiplicative";
}

AggregationMode parse_aggregation_mode(std::string_view text) {
  if (text == "pure_sum") return AggregationMode::kPureSum;
  if (text == "own_load") return AggregationMode::kOwnLoad;
  throw InvalidArgument("unknown aggregation mode '" + std::string(text) +
                        "' (expected pure_sum or own_load)");
}

NoiseMode parse_noise_mode(std::string_view text) {
  if (text == "additive") return NoiseMode::kAdditive;
  if (text == "multiplicative") return NoiseMode::kMultiplicative;
  throw InvalidArgument("unknown noise mode '" + std::string(text) +
                        "' (expected additive or multiplicative)");
}

MeasurementMatrix sample_loads(const Topology& topology, std::size_t timesteps,
                               double lo, double hi, std::uint64_t seed) {
  if (!(lo < hi)) throw InvalidArgument("sample_loads: need lo < hi");
  if (timesteps == 0) throw InvalidArgument("sample_loads: need at least one timestep");

  Rng rng(seed);
  std::uniform_real_distribution<double> draw(lo, hi);
  DenseMatrix loads(topology.size(), timesteps);
  for (std::size_t v = 0; v < loads.rows(); ++v) {
    for (double& x : loads.row(v)) x = draw(rng);
  }
  MeasurementMatrix out;
  out.individual = std::move(loads);
  return out;
}

MeasurementMatrix aggregate_readings(const Topology& topology,
                                     const MeasurementMatrix& loads,
                                     AggregationMode mode) {
  if (!loads.individual) {
    throw InvalidArgument("aggregate_readings: individual load channel is missing");
  }
  const DenseMatrix& own = *loads.individual;
  if (own.rows() != topology.size()) {
    throw InvalidArgument("aggregate_readings: " + std::to_string(own.rows()) +
                          " load rows for " + std::to_string(topology.size()) + " nodes");
  }

  DenseMatrix readings(own.rows(), own.cols());
  for (NodeId v : topology.post_order()) {
    auto out = readings.row(v);
    const auto kids = topology.children(v);
    const bool include_own = mode == AggregationMode::kOwnLoad || kids.empty();
    for (std::size_t k = 0; k < out.size(); ++k) {
      double sum = include_own ? own(v, k) : 0.0;
      for (NodeId c : kids) sum += readings(c, k);
      out[k] = sum;
    }
  }

  MeasurementMatrix result;
  result.readings = std::move(readings);
  result.individual = own;
  return result;
}

MeasurementMatrix inject_noise(const MeasurementMatrix& x, const NoiseModel& noise) {
  if (!(noise.sigma >= 0.0)) throw InvalidArgument("inject_noise: sigma must be >= 0");
  MeasurementMatrix out = x;
  if (noise.sigma == 0.0) return out;

  Rng rng(noise.seed);
  std::normal_distribution<double> error(0.0, noise.sigma);
  auto perturb = [&](DenseMatrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (double& v : m.row(r)) {
        const double e = error(rng);
        v = noise.mode == NoiseMode::kAdditive ? v + e : v * (1.0 + e);
      }
    }
  };
  perturb(out.readings);
  if (out.individual) perturb(*out.individual);
  return out;
}

std::string write_csv(const DenseMatrix& m) {
  std::string out = "# row i = node i;";
  for (std::size_t k = 0; k < m.cols(); ++k) out += (k ? ",t" : " t") + std::to_string(k);
  out += '\n';
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t k = 0; k < m.cols(); ++k) {
      if (k != 0) out += ',';
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, m(r, k));
      out.append(buf, end);
    }
    out += '\n';
  }
  return out;
}

DenseMatrix read_csv(std::string_view text) {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    std::size_t count = 0;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      const auto end = comma == std::string::npos ? line.size() : comma;
      std::string_view cell(line.data() + pos, end - pos);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError(line_no, "non-numeric cell '" + std::string(cell) + "'");
      }
      values.push_back(v);
      ++count;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw ParseError(line_no, "ragged row: " + std::to_string(count) +
                                    " cells, expected " + std::to_string(cols));
    }
    ++rows;
  }

  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < cols; ++k) m(r, k) = values[r * cols + k];
  }
  return m;
}

}  // namespace gridtopo
