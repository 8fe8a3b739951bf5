#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "commands.hpp"
#include "nti/version.hpp"

namespace nti::cli {
namespace {

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                  std::chrono::system_clock::now())));
}

void write_manifest(const RunContext& ctx, const std::string& command, int argc, char** argv,
                    const std::string& started, int exit_code, const std::string& error) {
  if (ctx.out.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(ctx.out, ec);
  nlohmann::json args = nlohmann::json::array();
  for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
  nlohmann::json m{{"tool", "nti"},
                   {"version", version()},
                   {"libraries", library_versions()},
                   {"command", command},
                   {"argv", args},
                   {"seed", ctx.seed},
                   {"config", ctx.resolved},
                   {"started_at", started},
                   {"finished_at", utc_now()},
                   {"exit_code", exit_code}};
  if (!error.empty()) m["error"] = error;
  std::ofstream out(ctx.out / "run_manifest.json", std::ios::binary);
  out << m.dump(2) << '\n';
}

}  // namespace
}  // namespace nti::cli

int main(int argc, char** argv) {
  using namespace nti::cli;

  CLI::App app{"Nasotracheal intubation imitation-learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
  app.add_option("--config", g.config, "JSON configuration file; flags override its values")
      ->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Artifact directory")->capture_default_str();
  app.add_option("--sim", g.sim, "Simulator configuration (default: data/sim_default.json)")
      ->check(CLI::ExistingFile);

  const std::vector<Command> commands = add_commands(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const Command* chosen = nullptr;
  for (const Command& c : commands) {
    if (c.app->parsed()) chosen = &c;
  }

  RunContext ctx;
  const std::string started = utc_now();
  int code = 0;
  std::string error;
  try {
    ctx = make_context(g);
    code = chosen->run(ctx);
  } catch (const UsageError& e) {
    fmt::print(stderr, "error: {}\n\n{}", e.what(), chosen->app->help());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    error = e.what();
    code = 1;
  }
  try {
    write_manifest(ctx, chosen->app->get_name(), argc, argv, started, code, error);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: cannot write run manifest: {}\n", e.what());
    code = 1;
  }
  return code;
}
