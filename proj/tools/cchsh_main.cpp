// cchsh command line: one config in, reports and plot-ready tables out.
// Everything goes through the shared library's C API, so this binary is
// also a living example of driving the pipeline from plain C.

#include <cchsh/cchsh.h>

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

namespace {

int finish(cchsh_session* session, cchsh_status status) {
  if (status != CCHSH_OK) {
    std::fprintf(stderr, "%s\n", cchsh_error_payload(session));
  }
  cchsh_session_free(session);
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curved-spacetime correlation experiments"};
  app.require_subcommand(1);

  std::string validate_config;
  CLI::App* validate = app.add_subcommand("validate", "schema-check a config and dry-run its geometry");
  validate->add_option("config", validate_config, "path to the JSON config")->required();

  std::string run_command_name;
  std::string run_config;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;
  int nodes = 0;
  CLI::App* run = app.add_subcommand("run", "execute one analysis and write its outputs");
  run->add_option("command", run_command_name,
                  "geometry, probabilities, inverse, sweep, or worldviews")
      ->required()
      ->check(CLI::IsMember({"geometry", "probabilities", "inverse", "sweep", "worldviews"}));
  run->add_option("config", run_config, "path to the JSON config")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out_dir, "output directory (default: the config's output block)");
  CLI::Option* threads_opt =
      run->add_option("--threads", threads, "worker threads (default: config, then CCHSH_THREADS)");
  CLI::Option* nodes_opt = run->add_option("--nodes", nodes, "quadrature node override");

  CLI11_PARSE(app, argc, argv);

  cchsh_session* session = cchsh_session_new();
  if (!session) {
    std::fprintf(stderr, "{\"error\":\"Internal\",\"message\":\"out of memory\",\"exit\":1}\n");
    return 1;
  }

  if (validate->parsed()) {
    cchsh_status status = cchsh_load_config_file(session, validate_config.c_str());
    if (status == CCHSH_OK) status = cchsh_run(session, "validate");
    if (status != CCHSH_OK) return finish(session, status);
    std::printf("%s\n", cchsh_summary(session));
    return finish(session, CCHSH_OK);
  }

  cchsh_status status = cchsh_load_config_file(session, run_config.c_str());
  if (status == CCHSH_OK && seed_opt->count() > 0) status = cchsh_set_seed(session, seed);
  if (status == CCHSH_OK && threads_opt->count() > 0) {
    status = cchsh_set_threads(session, threads);
  }
  if (status == CCHSH_OK && nodes_opt->count() > 0) status = cchsh_set_nodes(session, nodes);
  if (status == CCHSH_OK) status = cchsh_run(session, run_command_name.c_str());
  if (status != CCHSH_OK) return finish(session, status);

  const std::string directory = out_dir.empty() ? cchsh_output_directory(session) : out_dir;
  status = cchsh_write_outputs(session, directory.c_str());
  if (status != CCHSH_OK) return finish(session, status);

  std::printf("%s\n", cchsh_summary(session));
  std::printf("outputs: %s\n", directory.c_str());
  return finish(session, CCHSH_OK);
}
