#pragma once

// `qgraphino` command line: synth, train, eval, gradcheck, inspect.
//
// Exit codes
//   0  success
//   1  usage / configuration error, or checkpoint-dataset shape mismatch
//   2  I/O failure (missing input, unwritable output)
//   3  numeric failure during training (non-finite loss, zero encoder input)
//   4  gradcheck tolerance exceeded
//
// `train --config FILE` reads TOML-style `key = value` lines (optionally under a
// [train] table) whose keys are the train flag names without the leading dashes.
// Flags given on the command line win over the file.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qgraphino/data.hpp"
#include "qgraphino/error.hpp"
#include "qgraphino/eval.hpp"
#include "qgraphino/gradcheck.hpp"
#include "qgraphino/hybrid.hpp"
#include "qgraphino/qsim.hpp"
#include "qgraphino/train.hpp"

namespace qgraphino::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3, kTolerance = 4 };

inline constexpr double kGradcheckShiftTolerance = 1e-5;  // absolute, circuit paths
inline constexpr double kGradcheckModelTolerance = 1e-4;  // relative, model blocks

struct SynthArgs {
  std::uint64_t seed = 7;
  int samples = 512;
  int nodes = 24;
  int window = 3;
  int lead = 1;
  double noise = 0.1;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out_checkpoint;
  std::string log;
  std::string ansatz = "strongly";
  int qubits = 6;
  int layers = 4;
  std::uint64_t ansatz_seed = 0;
  std::string hidden = "32,16";
  std::string activation = "relu";
  int epochs = 5;
  double lr = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 7;
  int threads = 0;  // 0 = hardware concurrency
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string report;
  std::string csv;
};

struct CircuitArgs {
  std::uint64_t seed = 1;
  int qubits = 2;
  int layers = 1;
  std::string ansatz = "strongly";
};

namespace internal {

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c) || c == '[' || c == ']'; }),
              tok.end());
    if (tok.empty()) continue;
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("bad integer: " + tok);
    out.push_back(v);
  }
  return out;
}

inline qsim::AnsatzSpec make_ansatz(const std::string& kind_name, int layers, int qubits, std::uint64_t seed) {
  const auto kind = qsim::parse_ansatz_kind(kind_name);
  if (!kind) detail::fail(ErrorCode::InvalidSpec, "unknown ansatz '" + kind_name + "' (basic|strongly|random)");
  qsim::AnsatzSpec spec{*kind, layers, qubits, seed, {}};
  if (*kind == qsim::AnsatzKind::Strongly) spec.ranges = qsim::default_ranges(layers, qubits);
  qsim::validate(spec);
  return spec;
}

/// Splices config-file entries in front of the user's flags for the `train` subcommand.
inline std::vector<std::string> expand_train_config(std::vector<std::string> args) {
  const auto sub = std::find(args.begin(), args.end(), "train");
  if (sub == args.end()) return args;
  std::optional<std::string> path;
  for (auto it = sub + 1; it != args.end(); ++it) {
    if (*it == "--config" && it + 1 != args.end()) path = *(it + 1);
    else if (it->rfind("--config=", 0) == 0) path = it->substr(9);
  }
  if (!path) return args;
  if (!std::filesystem::exists(*path)) detail::fail(ErrorCode::Io, "config file not found: " + *path);
  CLI::ConfigTOML parser;
  std::vector<CLI::ConfigItem> items;
  try {
    items = parser.from_file(*path);
  } catch (const CLI::ParseError& e) {
    detail::fail(ErrorCode::InvalidArgument, std::string("cannot parse config: ") + e.what());
  }
  std::vector<std::string> injected;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == "train")) {
      detail::fail(ErrorCode::InvalidArgument, "unexpected config table '" + item.parents[0] + "'");
    }
    if (item.name == "config") detail::fail(ErrorCode::InvalidArgument, "config files cannot nest");
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    injected.push_back("--" + item.name + "=" + value);
  }
  args.insert(sub + 1, injected.begin(), injected.end());
  return args;
}

inline std::filesystem::path csv_path_for(const EvalArgs& a) {
  if (!a.csv.empty()) return a.csv;
  std::filesystem::path p(a.report);
  return p.replace_extension(".csv");
}

}  // namespace internal

// ---------------------------------------------------------------------------
// Subcommands (arguments already parsed)

inline int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  data::Dataset ds;
  try {
    data::SynthOptions opt;
    opt.seed = a.seed;
    opt.n_samples = a.samples;
    opt.n_nodes = a.nodes;
    opt.window = a.window;
    opt.lead_h = a.lead;
    opt.noise = a.noise;
    ds = data::synth_enso(opt);
  } catch (const Error& e) {
    err << "synth: " << e.what() << '\n';
    return kUsage;
  }
  try {
    data::save_dataset(ds, a.out);
  } catch (const Error& e) {
    err << "synth: " << e.what() << '\n';
    return kIo;
  }
  out << data::manifest_to_json(ds.manifest, ds.size()).dump() << '\n';
  return kOk;
}

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  // validate everything before touching the filesystem
  hybrid::HybridConfig model_cfg;
  train::TrainConfig tcfg;
  try {
    model_cfg.ansatz = internal::make_ansatz(a.ansatz, a.layers, a.qubits, a.ansatz_seed);
    const auto act = graph::parse_activation(a.activation);
    if (!act) detail::fail(ErrorCode::InvalidArgument, "unknown activation '" + a.activation + "'");
    model_cfg.graph.activation = *act;
    const auto hidden = internal::parse_int_list(a.hidden);
    if (hidden.empty()) detail::fail(ErrorCode::InvalidArgument, "hidden must list at least one layer width");
    model_cfg.graph.layer_dims.assign(1, 1);
    model_cfg.graph.layer_dims.insert(model_cfg.graph.layer_dims.end(), hidden.begin(), hidden.end());
    tcfg.learning_rate = a.lr;
    tcfg.epochs = a.epochs;
    tcfg.batch_size = a.batch_size;
    tcfg.seed = a.seed;
    tcfg.threads = a.threads > 0 ? a.threads : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
    train::validate(tcfg);
    hybrid::validate(model_cfg);
  } catch (const std::exception& e) {
    err << "train: config error: " << e.what() << '\n';
    return kUsage;
  }

  data::Dataset ds;
  try {
    ds = data::load_dataset(a.data);
  } catch (const Error& e) {
    err << "train: cannot load dataset " << a.data << ": " << e.what() << '\n';
    return kIo;
  }
  if (ds.empty()) {
    err << "train: dataset " << a.data << " has no samples\n";
    return kUsage;
  }
  model_cfg.graph.n_nodes = ds.manifest.n_nodes;
  model_cfg.graph.layer_dims[0] = ds.manifest.d0;

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log, std::ios::trunc);
    if (!log) {
      err << "train: cannot write log " << a.log << '\n';
      return kIo;
    }
    log << "epoch,train_mse,wall_seconds\n";
  }

  hybrid::HybridModel model = hybrid::init_model(model_cfg, a.seed);
  train::FitHooks hooks;
  hooks.on_epoch = [&](int epoch, double mse, double secs) {
    out << "epoch " << epoch << "  train_mse " << std::setprecision(6) << mse << "  (" << std::fixed
        << std::setprecision(2) << secs << " s)" << std::defaultfloat << '\n';
    if (log) {
      log << epoch << ',' << std::setprecision(17) << mse << ',' << std::fixed << std::setprecision(3) << secs
          << std::defaultfloat << '\n';
    }
  };
  hooks.checkpoint = a.out_checkpoint;
  try {
    const auto result = train::fit(model, ds, tcfg, hooks);
    out << "final train_mse " << std::setprecision(10) << result.epoch_loss.back() << '\n';
  } catch (const Error& e) {
    err << "train: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::NonFinite:
      case ErrorCode::ZeroVector: return kNumeric;
      case ErrorCode::Io: return kIo;
      default: return kUsage;
    }
  }
  return kOk;
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  hybrid::HybridModel model;
  data::Dataset ds;
  try {
    model = hybrid::load_checkpoint(a.checkpoint);
    ds = data::load_dataset(a.data);
  } catch (const Error& e) {
    err << "eval: " << e.what() << '\n';
    return e.code() == ErrorCode::Io ? kIo : kUsage;
  }
  if (ds.manifest.n_nodes != model.config.graph.n_nodes || ds.manifest.d0 != model.config.graph.input_dim()) {
    err << "eval: checkpoint expects " << model.config.graph.n_nodes << " nodes x " << model.config.graph.input_dim()
        << " features, dataset has " << ds.manifest.n_nodes << " x " << ds.manifest.d0 << '\n';
    return kUsage;
  }
  eval::SkillReport rep;
  try {
    const auto preds = train::predict(model, ds);
    std::vector<double> targets;
    std::vector<int> months;
    for (const auto& s : ds.samples) {
      targets.push_back(s.target_oni);
      months.push_back(s.target_month);
    }
    rep = eval::all_season_skill(preds, targets, months);
  } catch (const Error& e) {
    err << "eval: " << e.what() << '\n';
    return e.code() == ErrorCode::ZeroVector ? kNumeric : kUsage;
  }
  if (rep.coverage_warning) err << "eval: warning: only " << rep.months_used << " of 12 months have a defined correlation\n";

  const int lead = ds.manifest.lead_h;
  const std::string line = eval::csv_line(rep, lead);
  {
    std::ofstream j(a.report, std::ios::trunc);
    std::ofstream c(internal::csv_path_for(a), std::ios::trunc);
    if (!j || !c) {
      err << "eval: cannot write report " << a.report << '\n';
      return kIo;
    }
    j << eval::to_json(rep, lead).dump(2) << '\n';
    c << line << '\n';
  }
  out << eval::csv_header() << '\n' << line << '\n';
  return kOk;
}

/// Toy hybrid for gradient checks: 4 nodes, 3 input features, GCN widths [3, 5, 4], tanh.
inline hybrid::HybridModel gradcheck_model(const qsim::AnsatzSpec& spec, std::uint64_t seed) {
  hybrid::HybridConfig cfg{{4, {3, 5, 4}, graph::Activation::Tanh}, spec};
  auto m = hybrid::init_model(cfg, seed);
  SplitMix64 rng(seed + 1);
  // nonzero raw adjacency so the softplus/row-normalization Jacobian is exercised off its init point
  for (Eigen::Index i = 0; i < m.params.graph.adjacency.size(); ++i) m.params.graph.adjacency(i) = rng.uniform(-1.0, 1.0);
  m.params.readout_bias = rng.uniform(-0.5, 0.5);
  return m;
}

inline int cmd_gradcheck(const CircuitArgs& a, std::ostream& out, std::ostream& err) {
  qsim::AnsatzSpec spec;
  try {
    spec = internal::make_ansatz(a.ansatz, a.layers, a.qubits, a.seed);
  } catch (const Error& e) {
    err << "gradcheck: " << e.what() << '\n';
    return kUsage;
  }
  SplitMix64 rng(a.seed);
  std::vector<double> params(static_cast<std::size_t>(qsim::param_count(spec)));
  for (auto& p : params) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> x(std::size_t{1} << spec.n_qubits);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  const qsim::Statevector input = qsim::amplitude_encode(x, spec.n_qubits);

  bool ok = true;
  const auto report = [&](const std::string& name, double e, double tol, const char* kind) {
    const bool pass = e < tol;
    ok = ok && pass;
    out << std::left << std::setw(18) << name << " max " << kind << " err " << std::scientific << std::setprecision(3) << e
        << "  (tol " << tol << ")  " << (pass ? "ok" : "FAIL") << std::defaultfloat << '\n';
  };
  report("param_shift", gradcheck::param_shift_error(spec, params, input), kGradcheckShiftTolerance, "abs");
  report("input_grad", gradcheck::input_grad_error(spec, params, x), kGradcheckShiftTolerance, "abs");

  const auto model = gradcheck_model(spec, a.seed);
  graph::Matrix features(model.config.graph.n_nodes, model.config.graph.input_dim());
  for (Eigen::Index i = 0; i < features.size(); ++i) features(i) = rng.uniform(-1.0, 1.0);
  const double target = rng.uniform(-2.0, 2.0);
  double worst = 0.0;
  for (const auto& pe : gradcheck::hybrid_errors(model, features, target)) {
    report(pe.name, pe.error, kGradcheckModelTolerance, "rel");
    worst = std::max(worst, pe.error);
  }
  out << "max_rel_err " << std::scientific << std::setprecision(3) << worst << std::defaultfloat << '\n';
  return ok ? kOk : kTolerance;
}

inline int cmd_inspect(const CircuitArgs& a, std::ostream& out, std::ostream& err) {
  try {
    const auto spec = internal::make_ansatz(a.ansatz, a.layers, a.qubits, a.seed);
    nlohmann::json j = qsim::to_json(qsim::build_sequence(spec));
    j["ansatz"] = qsim::to_json(spec);
    out << j.dump(2) << '\n';
  } catch (const Error& e) {
    err << "inspect: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

/// Entry point; `args` excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    args = internal::expand_train_config(std::move(args));
  } catch (const Error& e) {
    err << "train: " << e.what() << '\n';
    return e.code() == ErrorCode::Io ? kIo : kUsage;
  }

  CLI::App app{"Hybrid quantum graph convolutional ONI forecaster"};
  app.name("qgraphino");
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic ENSO-like HQGD dataset");
  synth->add_option("--seed", sa.seed, "PRNG seed");
  synth->add_option("--samples", sa.samples, "Number of samples")->check(CLI::PositiveNumber);
  synth->add_option("--nodes", sa.nodes, "Graph nodes")->check(CLI::PositiveNumber);
  synth->add_option("--window", sa.window, "Months per node feature window (d0)")->check(CLI::PositiveNumber);
  synth->add_option("--lead", sa.lead, "Lead time h in months")->check(CLI::NonNegativeNumber);
  synth->add_option("--noise", sa.noise, "Observation noise relative to signal std")->check(CLI::NonNegativeNumber);
  synth->add_option("--out", sa.out, "Output HQGD path")->required();

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train the hybrid model on an HQGD dataset");
  const auto take_last = [](CLI::Option* o) { return o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast); };
  take_last(trn->add_option("--config", ta.config, "TOML-style config file (flags override it)"));
  take_last(trn->add_option("--data", ta.data, "Training dataset (HQGD)"))->required();
  take_last(trn->add_option("--out-checkpoint,--out_checkpoint", ta.out_checkpoint, "Checkpoint path (HQGM)"))->required();
  take_last(trn->add_option("--log", ta.log, "CSV log path (epoch,train_mse,wall_seconds)"));
  take_last(trn->add_option("--ansatz", ta.ansatz, "basic | strongly | random"));
  take_last(trn->add_option("--qubits", ta.qubits, "Number of qubits"));
  take_last(trn->add_option("--layers", ta.layers, "Ansatz layers"));
  take_last(trn->add_option("--ansatz-seed,--ansatz_seed", ta.ansatz_seed, "Seed of the random ansatz"));
  take_last(trn->add_option("--hidden", ta.hidden, "GCN layer widths, comma separated"));
  take_last(trn->add_option("--activation", ta.activation, "relu | tanh | identity"));
  take_last(trn->add_option("--epochs", ta.epochs, "Training epochs"));
  take_last(trn->add_option("--lr", ta.lr, "Adam learning rate"));
  take_last(trn->add_option("--batch-size,--batch_size", ta.batch_size, "Mini-batch size"));
  take_last(trn->add_option("--seed", ta.seed, "Seed for initialization and shuffling"));
  take_last(trn->add_option("--threads", ta.threads, "Gradient workers (0 = all cores)"));

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint: all-season correlation skill");
  ev->add_option("--checkpoint", ea.checkpoint, "Checkpoint path (HQGM)")->required();
  ev->add_option("--data", ea.data, "Evaluation dataset (HQGD)")->required();
  ev->add_option("--report", ea.report, "SkillReport JSON output path")->required();
  ev->add_option("--csv", ea.csv, "CSV line output path (default: report path with .csv)");

  CircuitArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "Compare every analytic gradient with finite differences");
  gc->add_option("--seed", ga.seed, "Seed for random parameters and inputs");
  gc->add_option("--qubits", ga.qubits, "Number of qubits");
  gc->add_option("--layers", ga.layers, "Ansatz layers");
  gc->add_option("--ansatz", ga.ansatz, "basic | strongly | random");

  CircuitArgs ia;
  auto* ins = app.add_subcommand("inspect", "Print the materialized gate sequence as JSON");
  ins->add_option("--seed", ia.seed, "Seed of the random ansatz");
  ins->add_option("--qubits", ia.qubits, "Number of qubits");
  ins->add_option("--layers", ia.layers, "Ansatz layers");
  ins->add_option("--ansatz", ia.ansatz, "basic | strongly | random");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "qgraphino: " << e.what() << '\n';
    return kUsage;
  }

  if (synth->parsed()) return cmd_synth(sa, out, err);
  if (trn->parsed()) return cmd_train(ta, out, err);
  if (ev->parsed()) return cmd_eval(ea, out, err);
  if (gc->parsed()) return cmd_gradcheck(ga, out, err);
  if (ins->parsed()) return cmd_inspect(ia, out, err);
  return kUsage;
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }

}  // namespace qgraphino::cli
