#include "experiment.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gridtopo/detail/parallel.hpp"
#include "gridtopo/random.hpp"

namespace gridtopo::experiment {

namespace {

using Json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    std::string item = trim(text.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, std::string_view text) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + std::string(text) + "'");
  }
  return value;
}

double to_double(const std::string& key, std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ConfigError(key + ": expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::uint64_t> to_uint_list(const std::string& key, std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split_list(text)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_uint(key, item));
      continue;
    }
    const std::uint64_t lo = to_uint(key, trim(std::string_view(item).substr(0, dots)));
    const std::uint64_t hi = to_uint(key, trim(std::string_view(item).substr(dots + 2)));
    if (hi < lo) throw ConfigError(key + ": empty range '" + item + "'");
    if (hi - lo > 1'000'000) throw ConfigError(key + ": range '" + item + "' is too long");
    for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::vector<double> to_double_list(const std::string& key, std::string_view text) {
  std::vector<double> out;
  for (const std::string& item : split_list(text)) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

bool to_switch(const std::string& key, std::string_view text) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected on or off, got '" + std::string(text) + "'");
}

std::string number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string join(const auto& values, auto&& format) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ",";
    out += format(v);
  }
  return out;
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> table{
      {"nodes", "sizes"}, {"sigma", "sigmas"}, {"seed", "master_seed"}};
  return table;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& known_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys{
      {"preset", "table1 | fig4; applied before every other setting"},
      {"sizes", "node counts, e.g. 13,33 (alias: nodes)"},
      {"topology", "edge-list file used instead of random trees"},
      {"timesteps", "K, measurement periods per run"},
      {"load_min", "lower bound of uniform loads, kW"},
      {"load_max", "upper bound of uniform loads, kW"},
      {"sigmas", "noise levels (alias: sigma)"},
      {"noise_mode", "additive | multiplicative"},
      {"aggregation", "pure_sum | own_load"},
      {"hierarchy", "on | off | both"},
      {"z", "tolerance multiplier"},
      {"floor", "minimum tolerance, kW"},
      {"max_children", "largest child set searched"},
      {"branching", "maximum children per node in random trees"},
      {"backend", "branch_bound | meet_middle | exhaustive"},
      {"tallying", "leaders | every_hit"},
      {"seeds", "per-run seeds, e.g. 1..20"},
      {"master_seed", "mixed into every run seed (alias: seed)"},
      {"threads", "worker threads"},
      {"timing", "on | off; include wall-clock times in reports"},
      {"out", "report path; stdout if absent"},
      {"format", "json | csv"},
  };
  return keys;
}

Settings parse_settings(std::string_view text) {
  Settings out;
  std::istringstream in{std::string(text)};
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(number, "expected 'key = value'");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ParseError(number, "missing key");
    if (value.empty()) throw ParseError(number, "missing value for '" + key + "'");
    out[std::move(key)] = std::move(value);
  }
  return out;
}

Settings preset_settings(std::string_view name) {
  if (name == "table1") {
    return {{"sizes", "13,33,63,93,123"}, {"timesteps", "10"}, {"load_min", "25"},
            {"load_max", "50"}, {"sigmas", "0.01,0.02,0.05,2"}, {"hierarchy", "on"},
            {"seeds", "1..20"}};
  }
  if (name == "fig4") {
    return {{"sizes", "13,33,63"}, {"timesteps", "10"}, {"load_min", "25"},
            {"load_max", "50"}, {"sigmas", "0.02"}, {"hierarchy", "both"},
            {"seeds", "1..30"}};
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected table1 or fig4)");
}

ExperimentConfig make_config(const std::vector<Settings>& layers) {
  Settings merged;
  std::string preset;
  for (const Settings& layer : layers) {
    for (const auto& [key, value] : layer) {
      if (key == "preset") preset = value;
    }
  }
  if (!preset.empty()) merged = preset_settings(preset);
  for (const Settings& layer : layers) {
    for (const auto& [key, value] : layer) {
      const auto alias = aliases().find(key);
      merged[alias == aliases().end() ? key : alias->second] = value;
    }
  }

  ExperimentConfig c;
  c.preset = preset;
  for (const auto& [key, value] : merged) {
    if (key == "preset") {
    } else if (key == "sizes") {
      c.sizes.clear();
      for (auto v : to_uint_list(key, value)) c.sizes.push_back(static_cast<std::size_t>(v));
    } else if (key == "topology") {
      c.topology_file = value;
    } else if (key == "timesteps") {
      c.timesteps = to_uint(key, value);
    } else if (key == "load_min") {
      c.load_min = to_double(key, value);
    } else if (key == "load_max") {
      c.load_max = to_double(key, value);
    } else if (key == "sigmas") {
      c.sigmas = to_double_list(key, value);
    } else if (key == "noise_mode") {
      try {
        c.noise_mode = parse_noise_mode(value);
      } catch (const InvalidArgument& e) {
        throw ConfigError(key + ": " + e.what());
      }
    } else if (key == "aggregation") {
      try {
        c.aggregation = parse_aggregation_mode(value);
      } catch (const InvalidArgument& e) {
        throw ConfigError(key + ": " + e.what());
      }
    } else if (key == "hierarchy") {
      if (value == "both") {
        c.hierarchy = {true, false};
      } else {
        c.hierarchy = {to_switch(key, value)};
      }
    } else if (key == "z") {
      c.z = to_double(key, value);
    } else if (key == "floor") {
      c.tolerance_floor = to_double(key, value);
    } else if (key == "max_children") {
      c.max_children = to_uint(key, value);
    } else if (key == "branching") {
      c.branching = to_uint(key, value);
    } else if (key == "backend") {
      try {
        c.backend = parse_backend(value);
      } catch (const InvalidArgument& e) {
        throw ConfigError(key + ": " + e.what());
      }
    } else if (key == "tallying") {
      if (value == "leaders") {
        c.tallying = Tallying::kLeaders;
      } else if (value == "every_hit") {
        c.tallying = Tallying::kEveryHit;
      } else {
        throw ConfigError(key + ": expected leaders or every_hit, got '" + value + "'");
      }
    } else if (key == "seeds") {
      c.seeds = to_uint_list(key, value);
    } else if (key == "master_seed") {
      c.master_seed = to_uint(key, value);
    } else if (key == "threads") {
      c.threads = to_uint(key, value);
    } else if (key == "timing") {
      c.timing = to_switch(key, value);
    } else if (key == "out") {
      c.out = value;
    } else if (key == "format") {
      c.format = parse_format(value);
    } else {
      throw ConfigError("unknown setting '" + key + "'");
    }
  }
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.sizes.empty() || c.sigmas.empty() || c.seeds.empty() || c.hierarchy.empty()) {
    throw ConfigError("sizes, sigmas, seeds and hierarchy must be nonempty");
  }
  for (std::size_t n : c.sizes) {
    if (n == 0) throw ConfigError("sizes: node counts must be >= 1");
  }
  for (double s : c.sigmas) {
    if (!(s >= 0.0)) throw ConfigError("sigmas: noise levels must be >= 0");
  }
  if (c.timesteps == 0) throw ConfigError("timesteps must be >= 1");
  if (!(c.load_min <= c.load_max)) throw ConfigError("load_min must not exceed load_max");
  if (!(c.z >= 0.0) || !(c.tolerance_floor >= 0.0)) {
    throw ConfigError("z and floor must be >= 0");
  }
  if (c.max_children == 0) throw ConfigError("max_children must be >= 1");
  if (c.branching == 0) throw ConfigError("branching must be >= 1");
  if (c.threads == 0) throw ConfigError("threads must be >= 1");
  if (c.topology_file) {
    std::ifstream probe(*c.topology_file);
    if (!probe) throw ConfigError("topology file '" + *c.topology_file + "' cannot be read");
  }
}

ReportFormat parse_format(std::string_view text) {
  if (text == "json") return ReportFormat::kJson;
  if (text == "csv") return ReportFormat::kCsv;
  throw ConfigError("format: expected json or csv, got '" + std::string(text) + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write to '" + path + "' failed");
}

Instance make_instance(const ExperimentConfig& config, std::size_t size, double sigma,
                       std::uint64_t seed, const Topology* fixed) {
  const std::uint64_t m = config.master_seed;
  Topology topology = fixed ? *fixed
                            : random_radial_topology(size, config.branching,
                                                     derive_seed({m, size, seed, 0}));
  const MeasurementMatrix loads = sample_loads(topology, config.timesteps, config.load_min,
                                               config.load_max, derive_seed({m, size, seed, 1}));
  MeasurementMatrix clean = aggregate_readings(topology, loads, config.aggregation);
  MeasurementMatrix noisy = inject_noise(
      clean, {sigma, config.noise_mode,
              derive_seed({m, size, seed, std::bit_cast<std::uint64_t>(sigma), 2})});
  return {std::move(topology), std::move(clean), std::move(noisy)};
}

HsspOptions hssp_options(const ExperimentConfig& config, const Topology& truth,
                         bool hierarchy) {
  HsspOptions o;
  if (hierarchy) o.hierarchy = std::vector<std::size_t>(truth.layers().begin(), truth.layers().end());
  o.tolerance = {config.z, config.tolerance_floor};
  o.max_children = config.max_children;
  o.mode = config.aggregation;
  o.noise_mode = config.noise_mode;
  o.backend = config.backend;
  o.tallying = config.tallying;
  return o;
}

namespace {

struct RunSpec {
  std::size_t size;
  double sigma;
  bool hierarchy;
  std::uint64_t seed;
};

RunRecord run_one(const ExperimentConfig& config, const RunSpec& spec, const Topology* fixed) {
  RunRecord record{spec.size, spec.sigma, spec.hierarchy, spec.seed, std::nullopt, {}};
  try {
    const Instance inst = make_instance(config, spec.size, spec.sigma, spec.seed, fixed);
    const HsspOptions options = hssp_options(config, inst.topology, spec.hierarchy);
    const Stopwatch clock;
    const EstimatedTopology estimate = identify_topology(inst.noisy, spec.sigma, options);
    const double elapsed = clock.seconds();
    AccuracyReport report = compare(estimate.adjacency, adjacency_matrix(inst.topology));
    report.wall_time = elapsed;
    record.report = report;
  } catch (const Error& e) {
    record.error = e.what();
  }
  return record;
}

CellStats summarize(std::span<const RunRecord> runs) {
  CellStats s;
  s.size = runs.front().size;
  s.sigma = runs.front().sigma;
  s.hierarchy = runs.front().hierarchy;
  s.runs = runs.size();
  std::vector<double> acc;
  double precision = 0.0;
  double f1 = 0.0;
  double wall = 0.0;
  for (const RunRecord& r : runs) {
    if (!r.report) {
      ++s.failures;
      continue;
    }
    acc.push_back(r.report->edge_accuracy);
    precision += r.report->precision;
    f1 += r.report->f1;
    wall += r.report->wall_time;
  }
  if (acc.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.mean_accuracy = s.std_accuracy = s.min_accuracy = s.max_accuracy = nan;
    s.mean_precision = s.mean_f1 = s.mean_wall_s = nan;
    return s;
  }
  const auto count = static_cast<double>(acc.size());
  double sum = 0.0;
  for (double a : acc) sum += a;
  s.mean_accuracy = sum / count;
  double squares = 0.0;
  for (double a : acc) squares += (a - s.mean_accuracy) * (a - s.mean_accuracy);
  s.std_accuracy = acc.size() > 1 ? std::sqrt(squares / (count - 1.0)) : 0.0;
  s.min_accuracy = *std::min_element(acc.begin(), acc.end());
  s.max_accuracy = *std::max_element(acc.begin(), acc.end());
  s.mean_precision = precision / count;
  s.mean_f1 = f1 / count;
  s.mean_wall_s = wall / count;
  return s;
}

ExperimentResult execute(const ExperimentConfig& config) {
  validate(config);
  std::optional<Topology> fixed;
  std::vector<std::size_t> sizes = config.sizes;
  if (config.topology_file) {
    try {
      fixed = load_topology(read_file(*config.topology_file));
    } catch (const ParseError& e) {
      throw ConfigError("topology file '" + *config.topology_file + "': " + e.what());
    }
    sizes = {fixed->size()};
  }

  std::vector<RunSpec> specs;
  for (std::size_t n : sizes) {
    for (double sigma : config.sigmas) {
      for (bool h : config.hierarchy) {
        for (std::uint64_t seed : config.seeds) specs.push_back({n, sigma, h, seed});
      }
    }
  }

  ExperimentResult result;
  result.config = config;
  result.config.sizes = sizes;
  result.runs.resize(specs.size());
  const Topology* topo = fixed ? &*fixed : nullptr;
  detail::parallel_for(specs.size(), config.threads,
                       [&](std::size_t i) { result.runs[i] = run_one(config, specs[i], topo); });

  const std::size_t per_cell = config.seeds.size();
  for (std::size_t first = 0; first < result.runs.size(); first += per_cell) {
    result.cells.push_back(
        summarize(std::span<const RunRecord>(result.runs).subspan(first, per_cell)));
  }
  return result;
}

Json config_json(const ExperimentConfig& c) {
  Json j;
  j["preset"] = c.preset;
  j["sizes"] = c.sizes;
  j["topology"] = c.topology_file ? Json(*c.topology_file) : Json(nullptr);
  j["timesteps"] = c.timesteps;
  j["load_min"] = c.load_min;
  j["load_max"] = c.load_max;
  j["sigmas"] = c.sigmas;
  j["noise_mode"] = std::string(to_string(c.noise_mode));
  j["aggregation"] = std::string(to_string(c.aggregation));
  Json h = Json::array();
  for (bool on : c.hierarchy) h.push_back(on ? "on" : "off");
  j["hierarchy"] = h;
  j["z"] = c.z;
  j["floor"] = c.tolerance_floor;
  j["max_children"] = c.max_children;
  j["branching"] = c.branching;
  j["backend"] = std::string(to_string(c.backend));
  j["tallying"] = c.tallying == Tallying::kLeaders ? "leaders" : "every_hit";
  j["seeds"] = c.seeds;
  j["master_seed"] = c.master_seed;
  j["timing"] = c.timing;
  return j;
}

}  // namespace

ExperimentResult run_single(const ExperimentConfig& config) {
  ExperimentConfig one = config;
  one.sizes.resize(1);
  one.sigmas.resize(1);
  one.hierarchy.resize(1);
  one.seeds.resize(1);
  return execute(one);
}

ExperimentResult run_sweep(const ExperimentConfig& config) { return execute(config); }

std::string emit_report(const ExperimentResult& result, ReportFormat format) {
  const bool timing = result.config.timing;
  if (format == ReportFormat::kCsv) {
    std::string out =
        "size,sigma,hierarchy,runs,failures,mean_accuracy,std_accuracy,min_accuracy,max_accuracy";
    out += timing ? ",mean_wall_s\n" : "\n";
    const auto cell = [](double v) { return std::isnan(v) ? std::string() : number(v); };
    for (const CellStats& s : result.cells) {
      out += std::to_string(s.size) + "," + number(s.sigma) + "," + (s.hierarchy ? "on" : "off") +
             "," + std::to_string(s.runs) + "," + std::to_string(s.failures) + "," +
             cell(s.mean_accuracy) + "," + cell(s.std_accuracy) + "," + cell(s.min_accuracy) +
             "," + cell(s.max_accuracy);
      if (timing) out += "," + cell(s.mean_wall_s);
      out += "\n";
    }
    return out;
  }

  Json j;
  j["config"] = config_json(result.config);
  Json cells = Json::array();
  for (const CellStats& s : result.cells) {
    Json c;
    c["size"] = s.size;
    c["sigma"] = s.sigma;
    c["hierarchy"] = s.hierarchy ? "on" : "off";
    c["runs"] = s.runs;
    c["failures"] = s.failures;
    c["mean_accuracy"] = s.mean_accuracy;
    c["std_accuracy"] = s.std_accuracy;
    c["min_accuracy"] = s.min_accuracy;
    c["max_accuracy"] = s.max_accuracy;
    c["mean_precision"] = s.mean_precision;
    c["mean_f1"] = s.mean_f1;
    if (timing) c["mean_wall_s"] = s.mean_wall_s;
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  Json runs = Json::array();
  for (const RunRecord& r : result.runs) {
    Json run;
    run["size"] = r.size;
    run["sigma"] = r.sigma;
    run["hierarchy"] = r.hierarchy ? "on" : "off";
    run["seed"] = r.seed;
    if (r.report) {
      run["edge_accuracy"] = r.report->edge_accuracy;
      run["precision"] = r.report->precision;
      run["recall"] = r.report->recall;
      run["f1"] = r.report->f1;
      run["element_agreement"] = r.report->element_agreement;
      if (timing) run["wall_s"] = r.report->wall_time;
    } else {
      run["error"] = r.error;
    }
    runs.push_back(std::move(run));
  }
  j["runs"] = std::move(runs);
  return j.dump(2) + "\n";
}

}  // namespace gridtopo::experiment
