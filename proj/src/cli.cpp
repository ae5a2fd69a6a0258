#include "addtree/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace addtree::cli {

namespace fs = std::filesystem;
using namespace addtree::bench;

std::string trace_path(const std::string& output_dir, const std::string& algorithm, std::uint64_t seed) {
  return (fs::path(output_dir) / algorithm / ("seed_" + std::to_string(seed) + ".jsonl")).string();
}

std::vector<RunTrace> cmd_run(const RunConfig& c, std::ostream& out) {
  validate_config(c);
  const Objective objective = make_objective(c);
  const nlohmann::json stored = result_config(c);
  const std::string dig = digest(stored);

  struct Task {
    Algorithm algorithm;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& a : c.algorithms) {
    fs::create_directories(fs::path(c.output_dir) / a);
    for (std::uint64_t s : c.seeds) tasks.push_back({algorithm_from_string(a), s});
  }

  std::vector<RunTrace> traces(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
      try {
        RunTrace header;
        header.algorithm = to_string(tasks[i].algorithm);
        header.seed = tasks[i].seed;
        header.objective = objective.name;
        header.config = stored;
        header.config_digest = dig;
        TraceWriter writer(trace_path(c.output_dir, header.algorithm, header.seed), header);
        RunTrace t = run_bo(objective, tasks[i].algorithm, c.iterations, tasks[i].seed, c.bo,
                            [&writer](const IterationRecord& r) { writer.append(r); });
        t.config = stored;
        t.config_digest = dig;
        traces[i] = std::move(t);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_workers = std::min<int>(c.workers, static_cast<int>(tasks.size()));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s seed=%-6llu iterations=%-5zu best=%.10g\n", traces[i].algorithm.c_str(),
                  static_cast<unsigned long long>(traces[i].seed), traces[i].records.size(),
                  traces[i].records.back().best);
    out << buf;
  }
  return traces;
}

ComparisonReport cmd_compare(const std::vector<std::string>& dirs, const std::vector<int>& iterations) {
  std::vector<LabeledRuns> groups;
  for (const auto& d : dirs) {
    if (!fs::is_directory(d)) throw std::invalid_argument("not a directory: " + d);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::invalid_argument("no .jsonl traces in " + d);
    LabeledRuns g{d, {}};
    int dup = 1;
    for (const auto& other : groups)
      if (other.label == g.label || other.label.rfind(d + " (", 0) == 0) ++dup;
    if (dup > 1) g.label = d + " (" + std::to_string(dup) + ")";
    for (const auto& f : files) g.runs.push_back(read_trace(f.string()));
    groups.push_back(std::move(g));
  }
  return compare_runs(groups, iterations);
}

std::vector<RegressionRow> cmd_regression(const RunConfig& c, std::ostream& out) {
  validate_config(c);
  const Objective objective = make_objective(c);
  const auto rows = run_regression_study(objective, c.regression);
  fs::create_directories(c.output_dir);
  const std::string path = (fs::path(c.output_dir) / "regression.jsonl").string();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  write_rows(f, rows);
  out << render_rows(rows);
  out << "wrote " << path << "\n";
  return rows;
}

namespace {

// Options shared by run and regression; applied over the config file.
struct CommonFlags {
  std::string config_path;
  std::string tree_spec, objective, objective_cmd, output_dir;
  std::vector<std::uint64_t> seeds;
  int workers = 1;
  CLI::Option* o_tree = nullptr;
  CLI::Option* o_obj = nullptr;
  CLI::Option* o_cmd = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_seeds = nullptr;
  CLI::Option* o_workers = nullptr;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "run-config JSON file");
    o_tree = app->add_option("--tree-spec", tree_spec, "tree-spec JSON for an external objective");
    o_obj = app->add_option("--objective", objective, "builtin objective (jenatton)");
    o_cmd = app->add_option("--objective-cmd", objective_cmd, "command evaluating the external objective");
    o_out = app->add_option("--output-dir", output_dir, "output directory");
    o_seeds = app->add_option("--seeds", seeds, "seeds, e.g. 0,1,2")->delimiter(',');
    o_workers = app->add_option("--workers", workers, "worker threads");
  }

  RunConfig load() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (o_tree->count()) c.tree_spec = tree_spec;
    if (o_obj->count()) c.objective = objective;
    if (o_cmd->count()) c.objective_cmd = objective_cmd;
    if (o_out->count()) c.output_dir = output_dir;
    if (o_workers->count()) c.workers = workers;
    return c;
  }
};

int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian optimization on tree-structured spaces"};
  app.require_subcommand(1);

  CommonFlags run_flags, reg_flags;
  CLI::App* run = app.add_subcommand("run", "run optimizers and write one trace per (algorithm, seed)");
  run_flags.add(run);
  std::vector<std::string> algorithms;
  int iterations = 0, n_init = 0;
  double theta0 = 0, B0 = 0, delta = 0, gamma_g = 0, gamma_b = 0, ref_exp = 0, noise_std = 0;
  auto* o_alg = run->add_option("--algorithm", algorithms, "addtree, independent, random")->delimiter(',');
  auto* o_it = run->add_option("--iterations", iterations);
  auto* o_init = run->add_option("--n-init", n_init, "random initial points (-1: 4 + total dims)");
  auto* o_theta = run->add_option("--theta0", theta0);
  auto* o_b0 = run->add_option("--B0", B0);
  auto* o_delta = run->add_option("--delta", delta);
  auto* o_gg = run->add_option("--gamma-g", gamma_g);
  auto* o_gb = run->add_option("--gamma-b", gamma_b);
  auto* o_ref = run->add_option("--reference-exponent", ref_exp);
  auto* o_noise = run->add_option("--noise-std", noise_std, "additive observation noise");
  bool tie = false;
  auto* o_tie = run->add_option("--tie-output-scales", tie, "share one output scale across vertices");

  CLI::App* cmp = app.add_subcommand("compare", "compare trace directories, one per algorithm");
  std::vector<std::string> dirs;
  std::vector<int> at = {40, 60, 80};
  std::string json_out;
  cmp->add_option("directories", dirs, "trace directories")->required()->expected(2, -1);
  cmp->add_option("--iterations", at, "iterations of interest")->delimiter(',');
  cmp->add_option("--json", json_out, "also write the report as JSON");

  CLI::App* reg = app.add_subcommand("regression", "regression-sharing study");
  reg_flags.add(reg);
  std::vector<int> train_sizes;
  int test_size = 0;
  auto* o_train = reg->add_option("--train-sizes", train_sizes)->delimiter(',');
  auto* o_test = reg->add_option("--test-size", test_size);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUserError;
  }

  if (*run) {
    RunConfig c = run_flags.load();
    if (run_flags.o_seeds->count()) c.seeds = run_flags.seeds;
    if (o_alg->count()) c.algorithms = algorithms;
    if (o_it->count()) c.iterations = iterations;
    if (o_init->count()) c.bo.n_init = n_init;
    if (o_theta->count()) c.bo.theta0 = theta0;
    if (o_b0->count()) c.bo.B0 = B0;
    if (o_delta->count()) c.bo.delta = delta;
    if (o_gg->count()) c.bo.gamma_g = gamma_g;
    if (o_gb->count()) c.bo.gamma_b = gamma_b;
    if (o_ref->count()) c.bo.reference_exponent = ref_exp;
    if (o_noise->count()) c.noise_std = noise_std;
    if (o_tie->count()) c.bo.tie_output_scales = tie;
    cmd_run(c, out);
  } else if (*cmp) {
    const auto rep = cmd_compare(dirs, at);
    out << render_report(rep);
    if (!json_out.empty()) {
      std::ofstream f(json_out);
      if (!f) throw ConfigError("cannot write " + json_out);
      f << report_to_json(rep).dump(2) << '\n';
    }
  } else if (*reg) {
    RunConfig c = reg_flags.load();
    if (reg_flags.o_seeds->count()) c.regression.seeds = reg_flags.seeds;
    if (o_train->count()) c.regression.train_sizes = train_sizes;
    if (o_test->count()) c.regression.test_size = test_size;
    cmd_regression(c, out);
  }
  return kSuccess;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return run_main(argc, argv, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const SpecParseError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const SpecValidationError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const TraceError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const ObjectiveError& e) {
    err << "error: objective failed: " << e.what() << "\n";
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  } catch (...) {
    err << "internal error: unknown exception\n";
    return kInternalError;
  }
  return kUserError;
}

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"addtree"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace addtree::cli
