#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

namespace stgp {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitCapacity = 3,
  kExitNumerical = 4,
};

/// Maps the error taxonomy onto process exit codes.
int exit_code_for(const std::exception& e);

struct CommandOptions {
  std::filesystem::path config_dir;  // base for relative paths in the config
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

void cmd_simulate(const nlohmann::json& cfg, const CommandOptions& opt);
void cmd_fit(const nlohmann::json& cfg, const CommandOptions& opt);
void cmd_predict(const nlohmann::json& cfg, const CommandOptions& opt);
void cmd_summarize(const nlohmann::json& cfg, const CommandOptions& opt);
void cmd_bench(const nlohmann::json& cfg, const CommandOptions& opt);

/// Loads the config file, runs `command` and returns the exit code. Errors go to `err`.
int run_command(const std::string& command, const std::filesystem::path& config,
                std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> out,
                std::ostream& err);

}  // namespace stgp
