#include "qroute/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qroute/baselines.hpp"
#include "qroute/checkpoint.hpp"
#include "qroute/errors.hpp"
#include "qroute/evaluation.hpp"
#include "qroute/gradcheck.hpp"
#include "qroute/model.hpp"
#include "qroute/ppo.hpp"

namespace qroute {

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kUsage = 2, kNumerical = 3;

int default_threads() {
  if (const char* env = std::getenv("QROUTE_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw ConfigError("QROUTE_THREADS must be a positive integer");
    }
  }
  return 1;
}

std::string model_name(const Config& c) { return c.encoder.variant == Variant::Quantum ? "Q-GAT" : "GAT"; }

int cmd_generate(int m, int capacity, long count, std::uint64_t seed, const std::string& out_path, std::ostream& out) {
  if (count < 0) throw ConfigError("--count must be >= 0");
  if (m < 1) throw ConfigError("--m must be >= 1");
  if (capacity < 9) throw ConfigError("--capacity must be >= 9 (the largest possible demand)");
  write_instances(out_path, generate_instances(m, capacity, static_cast<std::size_t>(count), seed));
  out << "wrote " << count << " instances (m=" << m << ", capacity=" << capacity << ", seed=" << seed << ") to "
      << out_path << '\n';
  return kOk;
}

std::vector<Instance> instance_set(const std::string& file, int size, const Config& c, std::uint64_t salt) {
  if (!file.empty()) return read_instances(file);
  return generate_instances(c.instance.m, c.instance.capacity, static_cast<std::size_t>(size), c.ppo.seed ^ salt);
}

int cmd_train(const std::string& config_path, const std::string& out_dir, const std::string& resume, int threads,
              bool reproducible, std::ostream& out, std::ostream& err) {
  const Config config = load_config(config_path);
  const auto train_set = instance_set(config.ppo.train_file, config.ppo.train_size, config, 0x7472616e);
  const auto val_set = instance_set(config.ppo.val_file, config.ppo.val_size, config, 0x76616c);
  TrainOptions opt;
  opt.out_dir = out_dir;
  opt.threads = threads;
  opt.reproducible = reproducible;
  opt.resume = resume;
  opt.log = &err;
  const auto history = train(config, train_set, val_set, opt);
  out << "trained " << history.size() << " epochs; metrics in " << (opt.out_dir / "metrics.csv").string()
      << ", checkpoint in " << (opt.out_dir / "checkpoint.bin").string() << '\n';
  return kOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& instances_path, const std::string& strategy,
             const std::string& references_path, const std::string& out_path, const std::string& solutions_path,
             int threads, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(checkpoint_path);
  const Config config = checkpoint_config(ckpt);
  Model model(config);
  restore(model, ckpt);
  const auto instances = read_instances(instances_path);
  if (instances.empty()) throw ConfigError("instance file " + instances_path + " is empty");
  const int n = static_cast<int>(instances.size());

  std::vector<ResultRow> rows;
  std::optional<double> reference_mean;
  if (!references_path.empty()) {
    const ReferenceTable refs = read_references(references_path, instances.size());
    for (const auto& m : refs.methods) rows.push_back({m, "Reference", refs.lengths.at(m), {}});
    reference_mean = rows.front().mean();
  } else {
    bool small = true;
    for (const auto& inst : instances) small = small && inst.customer_count() <= kExactMaxCustomers;
    if (small) {
      ResultRow exact{"Exact DP", "Solver", std::vector<double>(n), {}};
      parallel_for(n, threads, [&](int i) { exact.lengths[i] = exact_small(instances[i]).length; });
      rows.push_back(std::move(exact));
      reference_mean = rows.front().mean();
    }
  }

  std::vector<SolutionRecord> solutions;
  const std::string name = model_name(config);
  auto model_row = [&](const std::string& type, bool sampling) {
    ResultRow row{name, type, std::vector<double>(n), {}};
    std::vector<Route> routes(n);
    parallel_for(n, threads, [&](int i) {
      if (sampling) {
        Rng rng = Rng::stream(config.decoder.seed, {static_cast<std::uint64_t>(i)});
        routes[i] = model.best_of_samples(instances[i], config.decoder.sample_width, rng).route;
      } else {
        routes[i] = model.decode(instances[i], "greedy", nullptr).route;
      }
      row.lengths[i] = route_length(instances[i], routes[i]);
    });
    for (int i = 0; i < n; ++i) {
      if (!validate_solution(instances[i], routes[i]).feasible) throw InternalError("decoded an infeasible route");
      solutions.push_back({static_cast<std::size_t>(i), routes[i], row.lengths[i]});
    }
    rows.push_back(std::move(row));
  };
  if (strategy == "greedy" || strategy == "both") model_row("Greedy", false);
  if (strategy == "sample" || strategy == "both") model_row("Sampling", true);

  ResultRow nn_row{"Nearest neighbor", "Heuristic", std::vector<double>(n), {}};
  ResultRow rnd_row{"Random policy", "Heuristic", std::vector<double>(n), {}};
  for (int i = 0; i < n; ++i) {
    nn_row.lengths[i] = route_length(instances[i], nearest_neighbor(instances[i]));
    Rng rng = Rng::stream(config.decoder.seed, {0x7a4d, static_cast<std::uint64_t>(i)});
    rnd_row.lengths[i] = route_length(instances[i], random_policy(instances[i], rng));
  }
  rows.push_back(std::move(nn_row));
  rows.push_back(std::move(rnd_row));
  if (reference_mean) attach_gaps(rows, *reference_mean);

  out << format_table(rows);
  if (strategy == "sample" || strategy == "both")
    out << "(Sampling = best of " << config.decoder.sample_width << " samples at temperature "
        << config.temperature() << ")\n";
  if (!out_path.empty()) std::ofstream(out_path) << table_csv(rows);
  if (!solutions_path.empty()) write_solutions(solutions_path, solutions);
  return kOk;
}

int cmd_params(const std::string& config_path, std::ostream& out) {
  const Config config = config_path.empty() ? Config{} : load_config(config_path);
  const auto report = [&](const std::string& label, const Config& c) {
    const Model model(c);
    const auto n = model.count();
    out << std::left << std::setw(22) << label << " classical " << std::right << std::setw(9) << n.classical
        << "  quantum " << std::setw(6) << n.quantum << "  total " << std::setw(9) << n.total() << '\n';
    return n;
  };
  const auto configured = report("configured (" + model_name(config) + ")", config);
  const auto reference = report("classical reference", classical_reference(config));
  out << "total ratio configured/reference: " << std::fixed << std::setprecision(4)
      << static_cast<double>(configured.total()) / static_cast<double>(reference.total()) << '\n';
  return kOk;
}

int cmd_gradcheck(const std::string& scope, std::ostream& out) {
  const auto results = gradcheck::run(scope, &out);
  const gradcheck::Result* worst = nullptr;
  for (const auto& r : results)
    if (!r.passed() && (!worst || r.worst / r.tolerance > worst->worst / worst->tolerance)) worst = &r;
  if (worst) {
    out << "worst offender: " << worst->suite << " " << worst->worst_label << " error " << worst->worst
        << " > tolerance " << worst->tolerance << '\n';
    return kCheckFailed;
  }
  out << "all gradient checks passed\n";
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid quantum-classical attention model for capacitated vehicle routing"};
  app.require_subcommand(1);

  int threads = 1;
  bool threads_given = false;
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (default 1, or QROUTE_THREADS)")
                          ->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("generate", "Write a file of random instances");
  int g_m = 20, g_capacity = 30;
  long g_count = 0;
  std::uint64_t g_seed = 0;
  std::string g_out;
  gen->add_option("--m", g_m, "Customers per instance")->required();
  gen->add_option("--capacity", g_capacity, "Vehicle capacity")->required();
  gen->add_option("--count", g_count, "Number of instances")->required();
  gen->add_option("--seed", g_seed, "Random seed")->required();
  gen->add_option("--out", g_out, "Output file")->required();

  auto* tr = app.add_subcommand("train", "Train with PPO");
  std::string t_config, t_out, t_resume;
  bool t_repro = false;
  tr->add_option("--config", t_config, "Config JSON")->required();
  tr->add_option("--out-dir", t_out, "Output directory")->required();
  tr->add_option("--resume", t_resume, "Checkpoint to continue from");
  tr->add_flag("--reproducible", t_repro, "Record wall_time_s as 0 so metrics files compare byte for byte");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint against baselines and references");
  std::string e_ckpt, e_inst, e_strategy = "both", e_refs, e_out, e_solutions;
  ev->add_option("--checkpoint", e_ckpt, "Checkpoint file")->required();
  ev->add_option("--instances", e_inst, "Instance file")->required();
  ev->add_option("--strategy", e_strategy, "greedy, sample or both")
      ->check(CLI::IsMember({"greedy", "sample", "both"}));
  ev->add_option("--references", e_refs, "CSV of instance_id,method,length");
  ev->add_option("--out", e_out, "Write the table as CSV");
  ev->add_option("--solutions", e_solutions, "Write the model's routes");

  auto* pr = app.add_subcommand("params", "Report trainable parameter counts");
  std::string p_config;
  pr->add_option("--config", p_config, "Config JSON (defaults when omitted)");

  auto* gc = app.add_subcommand("gradcheck", "Run the finite-difference gradient suites");
  std::string scope = "all";
  gc->add_option("--scope", scope, "qsim, encoder, critic, ppo or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return kUsage;
  }
  threads_given = threads_opt->count() > 0;

  try {
    if (!threads_given) threads = default_threads();
    if (gen->parsed()) return cmd_generate(g_m, g_capacity, g_count, g_seed, g_out, out);
    if (tr->parsed()) return cmd_train(t_config, t_out, t_resume, threads, t_repro, out, err);
    if (ev->parsed()) return cmd_eval(e_ckpt, e_inst, e_strategy, e_refs, e_out, e_solutions, threads, out);
    if (pr->parsed()) return cmd_params(p_config, out);
    if (gc->parsed()) return cmd_gradcheck(scope, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
  return kUsage;
}

}  // namespace qroute
