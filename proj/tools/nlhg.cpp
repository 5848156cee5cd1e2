// Batch CLI: reads a run configuration, executes the command, and writes
// CSV tables, field dumps, and a manifest into the output directory.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nlhg/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nlhg: nonlocal energy homogenization experiments"};

  std::string config_path;
  std::string output_override;
  long long seed_override = -1;
  int threads_override = -1;
  bool deterministic = false;

  app.add_option("--config", config_path, "run configuration file")->required();
  app.add_option("--output", output_override, "override the output directory");
  app.add_option("--seed", seed_override, "override the RNG seed");
  app.add_option("--threads", threads_override, "worker count (0 = auto)");
  app.add_flag("--deterministic", deterministic,
               "single-worker deterministic summation; byte-stable outputs");

  CLI11_PARSE(app, argc, argv);

  nlhg::RunConfig cfg;
  try {
    std::ifstream is(config_path);
    if (!is.good()) {
      std::cerr << "error: cannot open config file '" << config_path << "'\n";
      return 2;
    }
    std::ostringstream buf;
    buf << is.rdbuf();
    cfg = nlhg::parse_config(buf.str());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (!output_override.empty()) cfg.output_dir = output_override;
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (threads_override >= 0) cfg.threads = threads_override;
  if (deterministic) cfg.deterministic = true;

  const int status = nlhg::run(cfg);
  std::cout << "nlhg " << nlhg::kVersion << ": command '" << cfg.command << "' finished with status "
            << status << "; artifacts in " << cfg.output_dir << "\n";
  if (status != 0) {
    std::cout << "see " << cfg.output_dir << "/manifest.txt for details\n";
  }
  return status;
}
