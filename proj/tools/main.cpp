#include <bit>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sparselb/experiment.hpp"

namespace fs = std::filesystem;
using namespace sparselb;

namespace {

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  body(os);
  os.flush();
  if (!os.good()) throw std::runtime_error(path + ": write failed");
}

struct CommonFlags {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool force = false;
  std::uint32_t threads = 1;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd, bool config_required) {
    auto* c = cmd->add_option("--config", config, "Experiment manifest (JSON)");
    if (config_required) c->required();
    seed_opt = cmd->add_option("--seed", seed, "Master seed (overrides the manifest)");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_flag("--force", force, "Overwrite existing outputs");
    cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  }
  bool seed_given() const { return seed_opt && seed_opt->count() > 0; }
};

int do_run(const CommonFlags& f) {
  ExperimentSpec spec = load_experiment(f.config);
  if (f.seed_given()) spec.seed = f.seed;
  const std::vector<Cell> cells = expand_cells(spec);
  if (cells.size() != 1)
    throw SpecError(f.config + ": manifest resolves to " +
                    std::to_string(cells.size()) +
                    " cells; 'run' takes exactly one (use 'sweep' for grids)");

  fs::create_directories(f.out);
  const std::string summary = f.out + "/summary.csv";
  const std::string ccdf = f.out + "/ccdf.csv";
  const std::string trace = f.out + "/trace.jsonl";
  require_fresh(summary, f.force);
  if (spec.ccdf) require_fresh(ccdf, f.force);
  if (spec.trace) require_fresh(trace, f.force);

  const std::vector<CellOutput> outputs = run_cells(spec, cells, 1, &std::cerr);
  write_file(summary, [&](std::ostream& os) { write_summary_csv(os, {outputs[0].row}); });
  std::cerr << "wrote " << summary << "\n";
  if (spec.ccdf) {
    write_file(ccdf, [&](std::ostream& os) { write_ccdf_csv(os, outputs[0].jct_ccdf); });
    std::cerr << "wrote " << ccdf << "\n";
  }
  if (spec.trace) {
    write_file(trace, [&](std::ostream& os) { write_trace_jsonl(os, outputs[0].trace); });
    std::cerr << "wrote " << trace << "\n";
  }
  return 0;
}

int do_sweep(const CommonFlags& f) {
  ExperimentSpec spec = load_experiment(f.config);
  if (f.seed_given()) spec.seed = f.seed;
  const std::vector<Cell> cells = expand_cells(spec);

  fs::create_directories(f.out);
  const std::string sweep = f.out + "/sweep.csv";
  require_fresh(sweep, f.force);

  std::cerr << spec.name << ": " << cells.size() << " cells on " << f.threads
            << " thread(s)\n";
  const std::vector<CellOutput> outputs = run_cells(spec, cells, f.threads, &std::cerr);

  std::vector<RunRow> rows;
  rows.reserve(outputs.size());
  for (const auto& o : outputs) rows.push_back(o.row);
  write_file(sweep, [&](std::ostream& os) { write_summary_csv(os, rows); });
  std::cerr << "wrote " << sweep << "\n";

  if (spec.ccdf) {
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const std::string path = f.out + "/ccdf_" + cells[k].label + ".csv";
      write_file(path, [&](std::ostream& os) { write_ccdf_csv(os, outputs[k].jct_ccdf); });
    }
    std::cerr << "wrote " << outputs.size() << " per-cell ccdf files\n";
  }
  return 0;
}

int do_exit_times(const CommonFlags& f, const std::vector<double>& mus,
                  std::uint64_t y_min, std::uint64_t y_max, std::uint64_t trials) {
  if (y_min < 1 || y_max < y_min)
    throw SpecError("exit-times: need 1 <= y-min <= y-max");
  const std::uint64_t master = f.seed_given() ? f.seed : 1;

  fs::create_directories(f.out);
  const std::string path = f.out + "/exit_times.csv";
  require_fresh(path, f.force);

  std::vector<ExitTimeResult> rows;
  for (double mu : mus)
    for (std::uint64_t y = y_min; y <= y_max; ++y) {
      rows.push_back(poisson_exit_times(
          mu, y, trials, derive_seed(master, std::bit_cast<std::uint64_t>(mu), y)));
      std::cerr << "mu=" << mu << " y=" << y << " done\n";
    }
  write_file(path, [&](std::ostream& os) { write_exit_times_csv(os, rows); });
  std::cerr << "wrote " << path << "\n";
  return 0;
}

int do_scaling(const CommonFlags& f) {
  ScalingConfig cfg = f.config.empty() ? ScalingConfig{} : load_scaling(f.config);
  if (f.seed_given()) cfg.seed = f.seed;
  if (f.threads > 1) cfg.threads = f.threads;

  fs::create_directories(f.out);
  const std::string path = f.out + "/scaling.csv";
  require_fresh(path, f.force);

  std::cerr << "scaling sweep over n in {";
  for (std::size_t i = 0; i < cfg.n_values.size(); ++i)
    std::cerr << (i ? "," : "") << cfg.n_values[i];
  std::cerr << "}, " << cfg.replications << " replications each\n";

  const ScalingResult result = run_scaling_suite(cfg);
  write_file(path, [&](std::ostream& os) { write_scaling_csv(os, result); });
  std::cerr << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for queue-length-estimate load balancing "
               "under sparse server-to-balancer communication"};
  app.require_subcommand(1);

  CommonFlags run_f, sweep_f, exit_f, scaling_f;

  CLI::App* cmd_run = app.add_subcommand("run", "Run the one cell a manifest resolves to");
  run_f.attach(cmd_run, true);

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "Run a full manifest grid");
  sweep_f.attach(cmd_sweep, true);

  CLI::App* cmd_exit =
      app.add_subcommand("exit-times", "Sample Poisson drift/deviation exit times");
  exit_f.attach(cmd_exit, false);
  std::vector<double> mus{0.5, 1.0, 2.0};
  std::uint64_t y_min = 1, y_max = 6, trials = 10000;
  cmd_exit->add_option("--mu", mus, "Poisson rates to sample");
  cmd_exit->add_option("--y-min", y_min, "Smallest exit level");
  cmd_exit->add_option("--y-max", y_max, "Largest exit level");
  cmd_exit->add_option("--trials", trials, "Trials per (mu, y)")->check(CLI::PositiveNumber);

  CLI::App* cmd_scaling =
      app.add_subcommand("scaling", "Heavy-traffic scaling sweep (defaults without --config)");
  scaling_f.attach(cmd_scaling, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) return do_run(run_f);
    if (cmd_sweep->parsed()) return do_sweep(sweep_f);
    if (cmd_exit->parsed()) return do_exit_times(exit_f, mus, y_min, y_max, trials);
    if (cmd_scaling->parsed()) return do_scaling(scaling_f);
  } catch (const SpecError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CollisionError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
