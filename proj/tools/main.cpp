#include <cstdio>
#include <deque>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "experiment.hpp"
#include "gridtopo/oracle.hpp"

namespace {

using namespace gridtopo;
using namespace gridtopo::experiment;
using Json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2 };

// Flags that map one to one onto config keys. Values stay strings until
// make_config so file and flag settings share one parser.
struct FlagSet {
  struct Flag {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
  };
  std::deque<Flag> flags;  // CLI11 holds references into it

  void add(CLI::App& app, const std::string& flag, const std::string& key,
           const std::string& help) {
    Flag& f = flags.emplace_back(Flag{key, {}, nullptr});
    f.option = app.add_option(flag, f.value, help);
  }

  Settings settings() const {
    Settings out;
    for (const Flag& f : flags) {
      if (f.option->count() > 0) out[f.key] = f.value;
    }
    return out;
  }
};

void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out) {
    write_file(*out, text);
  } else {
    std::fwrite(text.data(), 1, text.size(), stdout);
  }
}

MeasurementMatrix read_measurements(const std::string& path,
                                    const std::optional<std::string>& individual) {
  MeasurementMatrix x;
  try {
    x.readings = read_csv(read_file(path));
    if (individual) x.individual = read_csv(read_file(*individual));
  } catch (const ParseError& e) {
    throw ConfigError("measurement file: " + std::string(e.what()));
  }
  return x;
}

Topology read_topology(const std::string& path) {
  try {
    return load_topology(read_file(path));
  } catch (const ParseError& e) {
    throw ConfigError("topology file '" + path + "': " + e.what());
  } catch (const StructureError& e) {
    throw ConfigError("topology file '" + path + "': " + e.what());
  }
}

Json edges_json(const EstimatedTopology& est) {
  Json edges = Json::array();
  for (const EstimatedEdge& e : est.edges) {
    edges.push_back({{"parent", e.parent}, {"child", e.child}, {"votes", e.votes}});
  }
  return edges;
}

Json tree_json(const Topology& t) {
  Json edges = Json::array();
  for (const Edge& e : t.edges()) edges.push_back({{"parent", e.parent}, {"child", e.child}});
  return edges;
}

Json accuracy_json(const AccuracyReport& r) {
  return {{"edge_accuracy", r.edge_accuracy}, {"precision", r.precision}, {"recall", r.recall},
          {"f1", r.f1}, {"element_agreement", r.element_agreement}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial distribution grid topology identification from aggregated meter data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gridtopo 0.1.0");

  // generate
  auto* gen = app.add_subcommand("generate", "Write a random feeder and its measurements");
  FlagSet gen_flags;
  gen_flags.add(*gen, "--nodes", "sizes", "Node count");
  gen_flags.add(*gen, "--timesteps", "timesteps", "Measurement periods");
  gen_flags.add(*gen, "--load-min", "load_min", "Lower load bound, kW");
  gen_flags.add(*gen, "--load-max", "load_max", "Upper load bound, kW");
  gen_flags.add(*gen, "--sigma", "sigmas", "Noise level");
  gen_flags.add(*gen, "--noise-mode", "noise_mode", "additive | multiplicative");
  gen_flags.add(*gen, "--aggregation", "aggregation", "pure_sum | own_load");
  gen_flags.add(*gen, "--branching", "branching", "Maximum children per node");
  gen_flags.add(*gen, "--seed", "seeds", "Run seed");
  std::string gen_topology;
  std::string gen_measurements;
  std::optional<std::string> gen_individual;
  gen->add_option("--topology", gen_topology, "Edge-list output")->required();
  gen->add_option("--measurements", gen_measurements, "Readings CSV output")->required();
  gen->add_option("--individual", gen_individual, "Per-node load CSV output");

  // identify
  auto* idf = app.add_subcommand("identify", "Estimate the feeder from a measurement file");
  std::string idf_measurements;
  std::optional<std::string> idf_individual;
  std::optional<std::string> idf_topology;
  double idf_sigma = 0.01;
  std::string idf_noise = "additive";
  std::string idf_aggregation = "pure_sum";
  std::string idf_hierarchy = "on";
  double idf_z = 3.0;
  double idf_floor = 1e-9;
  std::size_t idf_max_children = 8;
  std::string idf_backend = "branch_bound";
  std::string idf_tallying = "leaders";
  std::size_t idf_threads = 1;
  std::string idf_timing = "off";
  std::optional<std::string> idf_out;
  std::string idf_format = "json";
  idf->add_option("--measurements", idf_measurements, "Readings CSV")->required();
  idf->add_option("--individual", idf_individual, "Per-node load CSV (own_load)");
  idf->add_option("--topology", idf_topology,
                  "True feeder; supplies layer labels and enables scoring");
  idf->add_option("--sigma", idf_sigma, "Noise level used for tolerances (default 0.01)");
  idf->add_option("--noise-mode", idf_noise, "additive | multiplicative");
  idf->add_option("--aggregation", idf_aggregation, "pure_sum | own_load");
  idf->add_option("--hierarchy", idf_hierarchy, "on | off")->check(CLI::IsMember({"on", "off"}));
  idf->add_option("--z", idf_z, "Tolerance multiplier");
  idf->add_option("--floor", idf_floor, "Minimum tolerance, kW");
  idf->add_option("--max-children", idf_max_children, "Largest child set searched");
  idf->add_option("--backend", idf_backend, "branch_bound | meet_middle | exhaustive");
  idf->add_option("--tallying", idf_tallying, "leaders | every_hit")
      ->check(CLI::IsMember({"leaders", "every_hit"}));
  idf->add_option("--threads", idf_threads, "Worker threads");
  idf->add_option("--timing", idf_timing, "on | off")->check(CLI::IsMember({"on", "off"}));
  idf->add_option("--out", idf_out, "Report path (default stdout)");
  idf->add_option("--format", idf_format, "json | csv")->check(CLI::IsMember({"json", "csv"}));

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run a size x sigma x seed grid and report");
  std::optional<std::string> sweep_config;
  sweep->add_option("--config", sweep_config, "key = value settings file");
  FlagSet sweep_flags;
  sweep_flags.add(*sweep, "--preset", "preset", "table1 | fig4");
  sweep_flags.add(*sweep, "--nodes", "sizes", "Node counts, e.g. 13,33");
  sweep_flags.add(*sweep, "--topology", "topology", "Fixed feeder edge list");
  sweep_flags.add(*sweep, "--timesteps", "timesteps", "Measurement periods");
  sweep_flags.add(*sweep, "--load-min", "load_min", "Lower load bound, kW");
  sweep_flags.add(*sweep, "--load-max", "load_max", "Upper load bound, kW");
  sweep_flags.add(*sweep, "--sigma", "sigmas", "Noise levels, e.g. 0.01,2");
  sweep_flags.add(*sweep, "--noise-mode", "noise_mode", "additive | multiplicative");
  sweep_flags.add(*sweep, "--aggregation", "aggregation", "pure_sum | own_load");
  sweep_flags.add(*sweep, "--hierarchy", "hierarchy", "on | off | both");
  sweep_flags.add(*sweep, "--z", "z", "Tolerance multiplier");
  sweep_flags.add(*sweep, "--floor", "floor", "Minimum tolerance, kW");
  sweep_flags.add(*sweep, "--max-children", "max_children", "Largest child set searched");
  sweep_flags.add(*sweep, "--branching", "branching", "Maximum children per node");
  sweep_flags.add(*sweep, "--backend", "backend", "branch_bound | meet_middle | exhaustive");
  sweep_flags.add(*sweep, "--tallying", "tallying", "leaders | every_hit");
  sweep_flags.add(*sweep, "--seed", "master_seed", "Master seed");
  sweep_flags.add(*sweep, "--seeds", "seeds", "Run seeds, e.g. 1..20");
  sweep_flags.add(*sweep, "--threads", "threads", "Worker threads");
  sweep_flags.add(*sweep, "--timing", "timing", "on | off");
  sweep_flags.add(*sweep, "--out", "out", "Report path (default stdout)");
  sweep_flags.add(*sweep, "--format", "format", "json | csv");

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exhaustive tree search on a small feeder");
  FlagSet orc_flags;
  orc_flags.add(*orc, "--nodes", "sizes", "Node count (<= 8)");
  orc_flags.add(*orc, "--timesteps", "timesteps", "Measurement periods");
  orc_flags.add(*orc, "--sigma", "sigmas", "Noise level");
  orc_flags.add(*orc, "--seed", "seeds", "Run seed");
  orc_flags.add(*orc, "--hierarchy", "hierarchy", "on | off");
  orc_flags.add(*orc, "--load-min", "load_min", "Lower load bound, kW");
  orc_flags.add(*orc, "--load-max", "load_max", "Upper load bound, kW");
  std::optional<std::string> orc_measurements;
  std::optional<std::string> orc_out;
  orc->add_option("--measurements", orc_measurements, "Readings CSV instead of a random feeder");
  orc->add_option("--out", orc_out, "Report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const ExperimentConfig c = make_config({gen_flags.settings()});
      const Instance inst = make_instance(c, c.sizes.front(), c.sigmas.front(), c.seeds.front());
      write_file(gen_topology, write_topology(inst.topology));
      write_file(gen_measurements, write_csv(inst.noisy.readings));
      if (gen_individual) write_file(*gen_individual, write_csv(*inst.noisy.individual));
      return kOk;
    }

    if (*idf) {
      const MeasurementMatrix x = read_measurements(idf_measurements, idf_individual);
      std::optional<Topology> truth;
      if (idf_topology) truth = read_topology(*idf_topology);
      if (truth && truth->size() != x.nodes()) {
        throw ConfigError("topology has " + std::to_string(truth->size()) +
                          " nodes but the measurements have " + std::to_string(x.nodes()));
      }
      const bool hierarchy = idf_hierarchy == "on";
      if (hierarchy && !truth) {
        throw ConfigError("--hierarchy on needs --topology for layer labels");
      }
      ExperimentConfig c;
      c.z = idf_z;
      c.tolerance_floor = idf_floor;
      c.max_children = idf_max_children;
      try {
        c.noise_mode = parse_noise_mode(idf_noise);
        c.aggregation = parse_aggregation_mode(idf_aggregation);
        c.backend = parse_backend(idf_backend);
        c.tallying = idf_tallying == "leaders" ? Tallying::kLeaders : Tallying::kEveryHit;
      } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
      }
      if (!(idf_sigma >= 0.0)) throw ConfigError("--sigma must be >= 0");
      HsspOptions options = hssp_options(c, truth ? *truth : Topology::from_edges(1, {}), false);
      if (hierarchy) {
        options.hierarchy =
            std::vector<std::size_t>(truth->layers().begin(), truth->layers().end());
      }
      options.threads = std::max<std::size_t>(1, idf_threads);
      const Stopwatch clock;
      const EstimatedTopology est = identify_topology(x, idf_sigma, options);
      const double elapsed = clock.seconds();

      if (idf_format == "csv") {
        std::string text = "parent,child,votes\n";
        for (const EstimatedEdge& e : est.edges) {
          text += std::to_string(e.parent) + "," + std::to_string(e.child) + "," +
                  std::to_string(e.votes) + "\n";
        }
        emit(idf_out, text);
        return kOk;
      }
      Json j;
      j["config"] = {{"measurements", idf_measurements},
                     {"sigma", idf_sigma},
                     {"noise_mode", idf_noise},
                     {"aggregation", idf_aggregation},
                     {"hierarchy", idf_hierarchy},
                     {"z", idf_z},
                     {"floor", idf_floor},
                     {"max_children", idf_max_children},
                     {"backend", idf_backend},
                     {"tallying", idf_tallying}};
      j["nodes"] = x.nodes();
      j["timesteps"] = x.timesteps();
      j["edges"] = edges_json(est);
      if (truth) j["accuracy"] = accuracy_json(compare(est.adjacency, adjacency_matrix(*truth)));
      if (idf_timing == "on") j["wall_s"] = elapsed;
      emit(idf_out, j.dump(2) + "\n");
      return kOk;
    }

    if (*sweep) {
      std::vector<Settings> layers;
      if (sweep_config) {
        try {
          layers.push_back(parse_settings(read_file(*sweep_config)));
        } catch (const ParseError& e) {
          throw ConfigError("config file '" + *sweep_config + "': " + e.what());
        }
      }
      layers.push_back(sweep_flags.settings());
      const ExperimentConfig c = make_config(layers);
      const ExperimentResult result = run_sweep(c);
      emit(c.out, emit_report(result, c.format));
      return kOk;
    }

    if (*orc) {
      const ExperimentConfig c = make_config({orc_flags.settings()});
      const bool hierarchy = c.hierarchy.front();
      MeasurementMatrix x;
      std::optional<Topology> truth;
      if (orc_measurements) {
        x = read_measurements(*orc_measurements, std::nullopt);
        if (hierarchy) throw ConfigError("--hierarchy on needs a generated feeder");
      } else {
        if (c.sizes.front() > kOracleNodeLimit) {
          throw ConfigError("oracle: at most " + std::to_string(kOracleNodeLimit) + " nodes");
        }
        Instance inst = make_instance(c, c.sizes.front(), c.sigmas.front(), c.seeds.front());
        x = inst.noisy;
        truth = inst.topology;
      }
      if (x.nodes() > kOracleNodeLimit) {
        throw ConfigError("oracle: at most " + std::to_string(kOracleNodeLimit) + " nodes");
      }
      std::vector<std::size_t> layers;
      if (hierarchy) layers.assign(truth->layers().begin(), truth->layers().end());
      const OracleResult best = exhaustive_identify(x, x.nodes(), 0, layers);
      HsspOptions options = hssp_options(c, truth ? *truth : best.best_tree, hierarchy);
      const EstimatedTopology est = identify_topology(x, c.sigmas.front(), options);

      Json j;
      j["nodes"] = x.nodes();
      j["hierarchy"] = hierarchy ? "on" : "off";
      j["oracle"] = {{"edges", tree_json(best.best_tree)},
                     {"residual", best.residual},
                     {"trees_visited", best.trees_visited}};
      j["hssp"] = {{"edges", edges_json(est)}};
      j["agreement"] = est.adjacency == adjacency_matrix(best.best_tree);
      if (truth) {
        j["truth"] = tree_json(*truth);
        j["oracle_accuracy"] = accuracy_json(compare(adjacency_matrix(best.best_tree),
                                                     adjacency_matrix(*truth)));
        j["hssp_accuracy"] = accuracy_json(compare(est.adjacency, adjacency_matrix(*truth)));
      }
      emit(orc_out, j.dump(2) + "\n");
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "gridtopo: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "gridtopo: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
