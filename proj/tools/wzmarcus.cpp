#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "wz/cli.hpp"

int main(int argc, char** argv) {
  wz::cli::Options opt;
  for (int i = 0; i < argc; ++i) opt.invocation += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Wong-Zakai scheme for Levy-driven Marcus SDEs"};
  app.set_version_flag("--version", wz::cli::kVersion);
  app.require_subcommand(1);

  std::string band;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub, bool with_band) {
    sub->add_option("--config", opt.config_path, "experiment config (JSON) or a manifest.json to replay")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed, overrides experiment.seed");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    if (with_band) sub->add_option("--assert-slope", band, "exit 3 unless the fitted slope lies in LO,HI");
  };
  add_common(app.add_subcommand("levy-check", "exponential-moment and moment-lemma checks"), false);
  add_common(app.add_subcommand("simulate", "one scheme trajectory with its reference"), false);
  auto* converge = app.add_subcommand("converge", "strong error curve and rate fit");
  add_common(converge, true);
  converge->add_flag("--trace", opt.trace, "write per-path errors to trace.csv");
  add_common(app.add_subcommand("uniform", "locally uniform error over a ball of initial points"), true);
  add_common(app.add_subcommand("weak", "weak error of an observable"), true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : wz::cli::kConfigError;
  }
  opt.command = app.get_subcommands().front()->get_name();
  if (app.get_subcommands().front()->count("--seed")) opt.seed = seed;
  if (!band.empty()) {
    try {
      opt.assert_slope = wz::cli::parse_band(band);
    } catch (const wz::ConfigError& e) {
      std::cerr << "config error at " << e.field() << ": " << e.what() << "\n";
      return wz::cli::kConfigError;
    }
  }
  return wz::cli::run(opt);
}
