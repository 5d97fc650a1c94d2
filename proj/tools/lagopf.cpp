#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lagopf/dataset.hpp"
#include "lagopf/mlp.hpp"
#include "lagopf/network.hpp"
#include "lagopf/pipeline.hpp"
#include "lagopf/solver.hpp"
#include "lagopf/twobus.hpp"

namespace fs = std::filesystem;
using namespace lagopf;

namespace {

// Failure class goes into the single-line "error[class]: message" prefix.
struct CliError : std::runtime_error {
  CliError(std::string cls, const std::string& msg) : std::runtime_error(msg), cls(std::move(cls)) {}
  std::string cls;
};

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("input", std::string(what) + " not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError("output", "cannot write " + path.string());
  out << text;
}

Network load_case(const std::string& path) {
  const std::string text = read_file(path, "case file");
  Network net;
  try {
    net = parse_matpower_case(text);
  } catch (const ParseError& e) {
    throw CliError("parse", e.what());
  }
  if (const auto v = validate(net); !v.empty()) throw CliError("parse", "invalid network: " + to_string(v.front()));
  return net;
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw CliError("input", "--out is required");
  fs::create_directories(out);
  return fs::path(out);
}

struct SolverFlags {
  std::string config;
  double rho = 0.0;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f) {
  cmd->add_option("--config", f.config, "solver config file (key = value); flags override it");
  cmd->add_option("--rho", f.rho, "initial penalty parameter");
}

SolverConfig solver_config(const SolverFlags& f, std::uint64_t seed) {
  SolverConfig cfg;
  try {
    if (!f.config.empty()) cfg = parse_solver_config(read_file(f.config, "config file"));
    if (f.rho > 0.0) cfg.rho_init = f.rho;
    cfg.seed = seed;
    cfg.check();
  } catch (const std::invalid_argument& e) {
    throw CliError("config", e.what());
  }
  return cfg;
}

std::string start_file_text(const Network& net, const OperatingPoint& x) {
  std::ostringstream os;
  os << "fingerprint " << fingerprint(net) << '\n';
  os << "v";
  for (double v : x.v) os << ' ' << detail::fmt(v);
  os << "\ntheta";
  for (double t : x.theta) os << ' ' << detail::fmt(t);
  os << '\n';
  return os.str();
}

OperatingPoint read_start_file(const Network& net, const std::string& path) {
  std::istringstream in(read_file(path, "start file"));
  std::string key, fp;
  in >> key >> fp;
  if (key != "fingerprint") throw CliError("input", "start file lacks a fingerprint line");
  if (fp != fingerprint(net)) throw CliError("fingerprint", "start file was written for network " + fp);
  OperatingPoint x;
  std::string line;
  std::getline(in, line);
  for (auto* vec : {&x.v, &x.theta}) {
    if (!std::getline(in, line)) throw CliError("input", "start file is truncated");
    std::istringstream ls(line);
    ls >> key;
    double value = 0.0;
    while (ls >> value) vec->push_back(value);
  }
  if (x.v.size() != net.size() || x.theta.size() != net.size())
    throw CliError("input", "start file does not match the network size");
  return x;
}

Dataset read_data(const Network& net, const std::string& path) {
  Dataset d;
  try {
    d = read_dataset(read_file(path, "dataset file"));
  } catch (const DatasetError& e) {
    throw CliError("dataset", e.what());
  }
  if (d.fingerprint != fingerprint(net))
    throw CliError("fingerprint", "dataset " + path + " was generated for network " + d.fingerprint);
  return d;
}

int cmd_solve(const std::string& case_path, const std::string& out, const std::string& start, const std::string& start_file,
              double load_scale, std::uint64_t seed, const SolverFlags& sf) {
  const Network net = load_case(case_path);
  const SolverConfig cfg = solver_config(sf, seed);
  const fs::path dir = prepare_out(out);
  LoadProfile load = nominal_load(net);
  for (double& p : load.p) p *= load_scale;
  for (double& q : load.q) q *= load_scale;
  OperatingPoint init;
  if (start == "flat") init = flat_start(net);
  else if (start == "random") init = start_point(net, cfg, 1);
  else if (start == "file") init = read_start_file(net, start_file);
  else throw CliError("input", "unknown start '" + start + "'");
  const SolveResult r = solve_acopf(net, load, init, cfg);
  write_file(dir / "solve.txt", serialize(r, false));
  write_file(dir / "solve_timing.txt", "wall_time " + detail::fmt(r.wall_time) + "\n");
  write_file(dir / "solution_start.txt", start_file_text(net, r.point));
  std::cout << to_string(r.status) << " cost " << detail::fmt(r.cost) << " iterations " << r.iterations << '\n';
  if (!r.converged()) {
    std::cerr << "error[solve]: solver finished with status " << to_string(r.status) << '\n';
    return 1;
  }
  return 0;
}

int cmd_generate(const std::string& case_path, const std::string& out, const DatasetSpec& spec, const SolverFlags& sf) {
  const Network net = load_case(case_path);
  try {
    spec.check();
  } catch (const std::invalid_argument& e) {
    throw CliError("config", e.what());
  }
  const SolverConfig cfg = solver_config(sf, spec.seed);
  const fs::path dir = prepare_out(out);
  const auto loads = generate_loads(net, spec.n_samples, spec.load_variation_pct, spec.seed);
  const BuildResult built = build_samples(net, loads, spec.k_starts, cfg);
  Dataset all{fingerprint(net), net.size(), built.samples};
  std::vector<Sample> mixed;
  try {
    mixed = mix(built.samples, spec.local_fraction, spec.seed);
  } catch (const DatasetError& e) {
    throw CliError("dataset", e.what());
  }
  auto [train, test] = split(mixed, spec.train_fraction, spec.seed);
  int locals = 0;
  for (const Sample& s : mixed) locals += s.label == Label::local;
  write_file(dir / "samples.csv", write_dataset(all));
  write_file(dir / "train.csv", write_dataset({all.fingerprint, net.size(), train}));
  write_file(dir / "test.csv", write_dataset({all.fingerprint, net.size(), test}));
  std::ostringstream summary;
  summary << "loads " << loads.size() << "\nskipped_loads " << built.skipped_loads << "\nsamples "
          << built.samples.size() << "\nmixed " << mixed.size() << "\nrealized_local_fraction "
          << detail::fmt(mixed.empty() ? 0.0 : static_cast<double>(locals) / mixed.size()) << "\ntrain " << train.size()
          << "\ntest " << test.size() << '\n';
  write_file(dir / "generate_summary.txt", summary.str());
  std::cout << summary.str();
  return 0;
}

int cmd_train(const std::string& case_path, const std::string& data, const std::string& out, TrainConfig tc,
              bool width_given, const SolverFlags& sf) {
  const Network net = load_case(case_path);
  const Dataset d = read_data(net, data);
  if (!width_given) tc.hidden_width = default_hidden_width(net.size());
  const SolverConfig cfg = solver_config(sf, tc.seed);
  const fs::path dir = prepare_out(out);
  TrainedPipeline pipe;
  pipe.net_fingerprint = fingerprint(net);
  NetFit dual, lag;
  BaselineModel base;
  try {
    dual = train_dual_net(d.samples, tc);
    lag = train_lagrangian_net(net, d.samples, cfg, tc);
    base = baseline_train(net, d.samples, tc);
  } catch (const TrainingDiverged& e) {
    throw CliError("train", e.what());
  } catch (const std::invalid_argument& e) {
    throw CliError("train", e.what());
  } catch (const PipelineError& e) {
    throw CliError("train", e.what());
  }
  pipe.dual_net = dual.model;
  pipe.lagrangian_net = lag.model;
  write_file(dir / "pipeline.bundle", save_bundle(pipe));
  write_file(dir / "baseline.model", save_baseline(base));
  std::ostringstream hist;
  hist << "epoch\tdual_loss\tlagrangian_loss\n";
  for (std::size_t e = 0; e < dual.loss_history.size(); ++e)
    hist << e << '\t' << detail::fmt(dual.loss_history[e]) << '\t' << detail::fmt(lag.loss_history[e]) << '\n';
  write_file(dir / "loss_history.tsv", hist.str());
  std::cout << "dual_mse " << detail::fmt(dual.train_mse) << "\nlagrangian_mse " << detail::fmt(lag.train_mse) << '\n';
  return 0;
}

int cmd_eval(const std::string& case_path, const std::string& data, const std::string& model_dir, const std::string& out,
             int k_starts, std::uint64_t seed, const SolverFlags& sf) {
  const Network net = load_case(case_path);
  const Dataset d = read_data(net, data);
  const SolverConfig cfg = solver_config(sf, seed);
  TrainedPipeline pipe;
  BaselineModel base;
  try {
    pipe = load_bundle(read_file((fs::path(model_dir) / "pipeline.bundle").string(), "model bundle"));
    base = load_baseline(read_file((fs::path(model_dir) / "baseline.model").string(), "baseline model"));
  } catch (const ModelFormatError& e) {
    throw CliError("model", e.what());
  }
  if (pipe.net_fingerprint != fingerprint(net) || base.net_fingerprint != fingerprint(net))
    throw CliError("fingerprint", "models were trained for a different network");
  const fs::path dir = prepare_out(out);
  const EvalReport rep = evaluate(net, d.samples, pipe, base, cfg, {k_starts, seed});
  write_file(dir / "report.tsv", report_table(rep));
  write_file(dir / "summary.tsv", summary_table(rep));
  write_file(dir / "plot.tsv", plot_table(rep));
  write_file(dir / "timing.tsv", timing_table(rep));
  std::cout << summary_table(rep);
  return 0;
}

int cmd_twobus(const std::string& out, double rho, std::vector<double> mus, int resolution) {
  const fs::path dir = prepare_out(out);
  const twobus::TwoBusParams p = twobus::canonical();
  twobus::Solutions s;
  try {
    s = twobus::find_solutions(p);
  } catch (const twobus::TwoBusError& e) {
    throw CliError("twobus", e.what());
  }
  if (mus.empty()) mus = {s.mu_local, s.mu_global};
  write_file(dir / "landscape.tsv", twobus::sweep_landscape(p, rho, mus, resolution));
  std::ostringstream c;
  c << "g " << detail::fmt(p.g) << "\nb " << detail::fmt(p.b) << "\nload " << detail::fmt(p.load) << "\ncost "
    << detail::fmt(p.cost.c0) << ' ' << detail::fmt(p.cost.c1) << ' ' << detail::fmt(p.cost.c2) << "\nrho "
    << detail::fmt(rho) << "\ntheta_global " << detail::fmt(s.theta_global) << "\ntheta_local "
    << detail::fmt(s.theta_local) << "\ncost_global " << detail::fmt(s.cost_global) << "\ncost_local "
    << detail::fmt(s.cost_local) << "\nmu_global " << detail::fmt(s.mu_global) << "\nmu_local "
    << detail::fmt(s.mu_local) << '\n';
  c << "mu";
  for (double m : mus) c << ' ' << detail::fmt(m);
  c << "\nminimizer";
  for (double m : mus) c << ' ' << detail::fmt(twobus::minimizer_map(p, m));
  c << '\n';
  write_file(dir / "constants.txt", c.str());
  std::cout << c.str();
  return 0;
}

int cmd_validate(const std::string& case_path) {
  const std::string text = read_file(case_path, "case file");
  Network net;
  try {
    net = parse_matpower_case(text);
  } catch (const ParseError& e) {
    throw CliError("parse", e.what());
  }
  const auto violations = validate(net);
  for (const Violation& v : violations) std::cout << to_string(v) << '\n';
  if (!violations.empty()) return 1;
  std::cout << net.name << ": " << net.size() << " buses, " << net.branches.size() << " branches, "
            << net.generators.size() << " generators, fingerprint " << fingerprint(net) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagrangian warm-start learning for AC optimal power flow"};
  app.require_subcommand(1);

  std::string case_path, out, start = "flat", start_file, data, model_dir;
  std::uint64_t seed = 0;
  double load_scale = 1.0;
  SolverFlags sf;

  auto* solve = app.add_subcommand("solve", "solve one ACOPF instance");
  solve->add_option("--case", case_path, "MATPOWER case file")->required();
  solve->add_option("--out", out, "output directory")->required();
  solve->add_option("--start", start, "flat, random or file")->check(CLI::IsMember({"flat", "random", "file"}));
  solve->add_option("--start-file", start_file, "start point written by a previous solve");
  solve->add_option("--load-scale", load_scale, "multiplier on the nominal load");
  solve->add_option("--seed", seed, "seed for the random start");
  add_solver_flags(solve, sf);

  DatasetSpec spec;
  auto* generate = app.add_subcommand("generate", "sample loads, solve them from many starts and write datasets");
  generate->add_option("--case", case_path)->required();
  generate->add_option("--out", out)->required();
  generate->add_option("--seed", spec.seed)->required();
  generate->add_option("--samples", spec.n_samples, "number of loads");
  generate->add_option("--variation-pct", spec.load_variation_pct, "uniform load variation in percent");
  generate->add_option("--local-fraction", spec.local_fraction, "share of loads represented by a local solution");
  generate->add_option("--train-fraction", spec.train_fraction);
  generate->add_option("--k-starts", spec.k_starts, "solver starts per load");
  add_solver_flags(generate, sf);

  TrainConfig tc;
  auto* train = app.add_subcommand("train", "train the dual, Lagrangian and baseline networks");
  train->add_option("--case", case_path)->required();
  train->add_option("--data", data, "training dataset (train.csv)")->required();
  train->add_option("--out", out)->required();
  train->add_option("--seed", tc.seed)->required();
  auto* width = train->add_option("--hidden-width", tc.hidden_width);
  train->add_option("--epochs", tc.epochs);
  train->add_option("--batch-size", tc.batch_size);
  train->add_option("--learning-rate", tc.learning_rate);
  add_solver_flags(train, sf);

  int k_starts = 20;
  auto* eval = app.add_subcommand("eval", "compare Algorithm 1, the baseline and random starts on test loads");
  eval->add_option("--case", case_path)->required();
  eval->add_option("--data", data, "test dataset (test.csv)")->required();
  eval->add_option("--models", model_dir, "directory written by train")->required();
  eval->add_option("--out", out)->required();
  eval->add_option("--seed", seed)->required();
  eval->add_option("--k-starts", k_starts, "starts for the reference multi-start");
  add_solver_flags(eval, sf);

  double rho = 2.0;
  std::vector<double> mus;
  int resolution = 2000;
  auto* tb = app.add_subcommand("twobus", "landscape tables and constants of the two-bus fixture");
  tb->add_option("--out", out)->required();
  tb->add_option("--rho", rho, "penalty parameter of the penalized landscape");
  tb->add_option("--mu", mus, "multipliers for the Lagrangian landscapes (default: local and global)");
  tb->add_option("--resolution", resolution);

  auto* val = app.add_subcommand("validate", "parse and check a case file");
  val->add_option("--case", case_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(case_path, out, start, start_file, load_scale, seed, sf);
    if (*generate) return cmd_generate(case_path, out, spec, sf);
    if (*train) return cmd_train(case_path, data, out, tc, width->count() > 0, sf);
    if (*eval) return cmd_eval(case_path, data, model_dir, out, k_starts, seed, sf);
    if (*tb) return cmd_twobus(out, rho, mus, resolution);
    if (*val) return cmd_validate(case_path);
  } catch (const CliError& e) {
    std::cerr << "error[" << e.cls << "]: " << e.what() << '\n';
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "error[solve]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
