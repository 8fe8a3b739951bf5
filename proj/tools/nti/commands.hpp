#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nti/sim/simulator.hpp"

namespace nti::cli {

// Invalid flag values found after parsing; reported with usage text and exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string config;
  std::string out = "nti-out";
  std::string sim;
};

struct RunContext {
  std::uint64_t seed = 0;
  std::filesystem::path out;
  nlohmann::json file = nlohmann::json::object();      // --config contents
  nlohmann::json resolved = nlohmann::json::object();  // persisted in the run manifest
  sim::SimConfig sim_config;
};

RunContext make_context(const GlobalOptions& g);

struct Command {
  CLI::App* app = nullptr;
  std::function<int(RunContext&)> run;
};

// Registers every subcommand on `app`.
std::vector<Command> add_commands(CLI::App& app);

}  // namespace nti::cli
