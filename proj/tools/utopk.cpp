// utopk: run Top-K experiments and generate synthetic traces.
//
//   utopk run --config exp.json [--k 50 --thres 0.9 --mode frame ...]
//   utopk gen --seed 7 --frames 100000 --out trace.jsonl

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "utopk/errors.hpp"
#include "utopk/experiment.hpp"
#include "utopk/simulation.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;

struct RunOverrides {
  std::string config_path;
  std::optional<std::size_t> k;
  std::optional<double> thres;
  std::optional<std::string> mode;
  std::optional<std::int64_t> window_size;
  std::optional<double> sample_fraction;
  std::optional<std::size_t> batch;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> trace;
  std::optional<std::string> report;
  bool quiet = false;
};

utopk::ExperimentConfig resolve(const RunOverrides& o) {
  auto cfg = o.config_path.empty() ? utopk::ExperimentConfig{}
                                   : utopk::ExperimentConfig::from_json_file(o.config_path);
  if (o.k) cfg.k = *o.k;
  if (o.thres) cfg.thres = *o.thres;
  if (o.mode) {
    if (*o.mode == "frame") {
      cfg.mode = utopk::QueryMode::kFrame;
    } else if (*o.mode == "window") {
      cfg.mode = utopk::QueryMode::kWindow;
    } else {
      throw utopk::ConfigError("--mode must be frame or window");
    }
  }
  if (o.window_size) cfg.window_size = *o.window_size;
  if (o.sample_fraction) cfg.sample_fraction = *o.sample_fraction;
  if (o.batch) cfg.batch = *o.batch;
  if (o.seed) cfg.seed = *o.seed;
  if (o.trace) cfg.trace_path = *o.trace;
  if (o.report) cfg.report_path = *o.report;
  if (o.quiet) cfg.quiet = true;
  cfg.validate();
  return cfg;
}

int run(const RunOverrides& o) {
  const auto cfg = resolve(o);
  const auto report = utopk::run_experiment(cfg);
  if (cfg.report_path.empty()) {
    std::cout << utopk::report_to_json(cfg, report) << '\n';
  }
  return 0;
}

int gen(std::uint64_t seed, std::int64_t frames, const std::string& out) {
  utopk::TraceConfig tc;
  tc.seed = seed;
  tc.frames = frames;
  try {
    tc.validate();
  } catch (const utopk::InvalidArgument& e) {
    throw utopk::ConfigError(e.what());
  }
  const auto trace = utopk::generate_trace(tc);
  if (out.empty() || out == "-") {
    utopk::write_trace(std::cout, trace);
  } else {
    utopk::write_trace_file(out, trace);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic Top-K queries with an oracle in the loop"};
  app.require_subcommand(1);

  RunOverrides ro;
  auto* run_cmd = app.add_subcommand("run", "run one experiment and emit a JSON report");
  run_cmd->add_option("--config", ro.config_path, "JSON experiment config");
  run_cmd->add_option("--k", ro.k, "result size K");
  run_cmd->add_option("--thres", ro.thres, "confidence threshold in (0, 1]");
  run_cmd->add_option("--mode", ro.mode, "frame or window");
  run_cmd->add_option("--window-size", ro.window_size, "window length L");
  run_cmd->add_option("--sample-fraction", ro.sample_fraction, "frames sampled per window");
  run_cmd->add_option("--batch", ro.batch, "frames cleaned per oracle batch");
  run_cmd->add_option("--seed", ro.seed, "experiment seed");
  run_cmd->add_option("--trace", ro.trace, "JSON-lines trace file");
  run_cmd->add_option("--report", ro.report, "report path (stdout when omitted)");
  run_cmd->add_flag("--quiet", ro.quiet, "no progress log");

  std::uint64_t gen_seed = 1;
  std::int64_t gen_frames = 1000;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "write a synthetic JSON-lines trace");
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--frames", gen_frames, "number of frames");
  gen_cmd->add_option("--out", gen_out, "output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigExit;
  }

  try {
    if (*run_cmd) {
      return run(ro);
    }
    return gen(gen_seed, gen_frames, gen_out);
  } catch (const utopk::ConfigError& e) {
    std::cerr << "utopk: config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const utopk::DataError& e) {
    std::cerr << "utopk: data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const utopk::Error& e) {
    // Domain failures such as K exceeding the retained frames.
    std::cerr << "utopk: " << e.what() << '\n';
    return kDataExit;
  }
}
