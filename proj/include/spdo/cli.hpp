#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "spdo/cauchy.hpp"
#include "spdo/config.hpp"
#include "spdo/report.hpp"
#include "spdo/symbol.hpp"

namespace spdo {

/// Built-in symbols by name for the given dimension; ConfigError names `key` when unknown.
Symbol registry_symbol(const std::string& name, int dim, const std::string& key = "symbol.name");
std::vector<std::string> registry_symbol_names();
EquationSpec registry_equation(const std::string& name, int dim, double noise,
                               const std::string& key = "equation.name");

struct CommandResult {
  Json report;
  std::map<std::string, CsvTable> data;   // written to data/<name>.csv
  std::map<std::string, std::string> raw;  // preformatted CSV, same location
  std::string text;                      // printed to stdout
  bool pass = false;
};

const std::vector<std::string>& command_names();
/// Runs one subcommand; `cfg` must carry `seed`. Throws ConfigError on bad keys.
CommandResult run_command(const std::string& command, const RunConfig& cfg);
/// Runs and writes report.json, data/*.csv and meta.json under `out`. Returns the exit code.
int run(const std::string& command, const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cli_main(int argc, char** argv);

}  // namespace spdo
