// Command-line experiment runner.
//
//   finsler_billiards search --config cfg.json [--seed N] [--r N] [--jobs N] [--out PATH]
//   finsler_billiards trace  --config cfg.json [--format csv|json] [--out PATH]
//   finsler_billiards betti  --d 4 --r 3 [--format json|table|both]
//   finsler_billiards verify --d 4 --r 3
//   finsler_billiards --config cfg.json [--mode M]      (mode taken from the config)
//
// Exit codes: 0 pass, 2 bound not met, 1 usage, validation or runtime error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "finsler/experiment.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> r;
  std::optional<int> d;
  std::string mode;
  std::string out;
  std::string format;
  int jobs = 0;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("finsler");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("FINSLER_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else spdlog::set_level(spdlog::level::err);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw finsler::Error(finsler::ErrorCode::InvalidConfig, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

finsler::ExperimentConfig load_config(const Options& opt, const std::string& mode) {
  finsler::ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    cfg = finsler::parse_config_text(read_file(opt.config_path), opt.config_path);
  } else if (mode == "search" || mode == "trace") {
    throw finsler::Error(finsler::ErrorCode::InvalidConfig, mode + " needs --config PATH");
  }
  if (!mode.empty()) cfg.mode = mode;
  if (opt.seed) cfg.search.rng_seed = *opt.seed;
  if (opt.r) cfg.r = *opt.r;
  if (opt.d) cfg.d = *opt.d;
  if (!opt.format.empty() && cfg.mode == "trace") {
    if (opt.format != "csv" && opt.format != "json")
      throw finsler::Error(finsler::ErrorCode::InvalidConfig, "--format for trace is csv or json");
    cfg.trace.format = opt.format;
  }
  return cfg;
}

void emit(const Options& opt, const std::string& text) {
  if (opt.out.empty() || opt.out == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(opt.out, std::ios::binary);
  if (!out) throw finsler::Error(finsler::ErrorCode::InvalidConfig, "cannot write " + opt.out);
  out << text;
}

int dispatch(const Options& opt, const std::string& mode_in) {
  const finsler::ExperimentConfig cfg = load_config(opt, mode_in);
  spdlog::info("mode {}", cfg.mode);

  if (cfg.mode == "search") {
    spdlog::info("search: r = {}, {} seeds, rng seed {}", cfg.r, cfg.search.seeds, cfg.search.rng_seed);
    finsler::SearchRun run = finsler::run_search_detail(cfg, opt.jobs);
    spdlog::info("{} of {} runs converged, {} classes, bound check: {}", run.result.converged,
                 run.result.seeds, run.result.classes(), run.report["bound"]["check"].get<std::string>());
    for (const auto& rec : run.result.orbits)
      spdlog::debug("class lambda {:.12f} residual {:.3e} index {} hits {}", rec.polygon.lambda_value,
                    rec.residual, rec.morse_index.value_or(-1), rec.hits);
    emit(opt, run.report.dump(2) + "\n");
    return run.exit_code;
  }
  if (cfg.mode == "trace") {
    const finsler::RunOutput out = finsler::run_trace(cfg);
    emit(opt, out.text);
    return out.exit_code;
  }
  if (cfg.mode == "verify") {
    const finsler::RunOutput out = finsler::run_verify(cfg.d, cfg.r);
    emit(opt, out.text);
    return out.exit_code;
  }
  // betti
  const finsler::CohomologyProfile prof = finsler::betti_numbers(cfg.d, cfg.r);
  const std::string fmt = opt.format.empty() ? "both" : opt.format;
  if (fmt != "json" && fmt != "table" && fmt != "both")
    throw finsler::Error(finsler::ErrorCode::InvalidConfig, "--format for betti is json, table or both");
  std::string text;
  if (fmt != "table") text += finsler::betti_json(prof).dump(2) + "\n";
  if (fmt == "both") text += "\n";
  if (fmt != "json") text += finsler::betti_table(prof);
  emit(opt, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  Options opt;
  CLI::App app{"Finsler and magnetic billiards: traces, periodic-orbit search, topological bounds"};
  app.require_subcommand(0, 1);

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "JSON experiment config");
    cmd->add_option("--out", opt.out, "output path (default stdout)");
  };
  add_common(&app);
  app.add_option("--mode", opt.mode, "search | trace | betti | verify (overrides the config)")
      ->check(CLI::IsMember({"search", "trace", "betti", "verify"}));
  app.add_option("--seed", opt.seed, "rng seed override");
  app.add_option("--r", opt.r, "period override");
  app.add_option("--jobs", opt.jobs, "search worker threads (0: available parallelism)");

  auto* search = app.add_subcommand("search", "multistart search for r-periodic orbits");
  add_common(search);
  search->add_option("--seed", opt.seed, "rng seed override");
  search->add_option("--r", opt.r, "period override");
  search->add_option("--jobs", opt.jobs, "worker threads (0: available parallelism)");

  auto* trace = app.add_subcommand("trace", "billiard trajectory dump");
  add_common(trace);
  trace->add_option("--format", opt.format, "csv | json (overrides the config)");

  auto* betti = app.add_subcommand("betti", "Betti numbers of the cyclic configuration space");
  add_common(betti);
  betti->add_option("--d", opt.d, "ambient dimension");
  betti->add_option("--r", opt.r, "odd prime period");
  betti->add_option("--format", opt.format, "json | table | both (default both)");

  auto* verify = app.add_subcommand("verify", "consistency checks of the Betti profile and bounds");
  add_common(verify);
  verify->add_option("--d", opt.d, "ambient dimension");
  verify->add_option("--r", opt.r, "odd prime period");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string mode = opt.mode;
  for (auto* sub : {search, trace, betti, verify})
    if (sub->parsed()) mode = sub->get_name();
  if (mode.empty() && opt.config_path.empty()) {
    std::cerr << app.help();
    return 1;
  }

  try {
    return dispatch(opt, mode);
  } catch (const finsler::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
