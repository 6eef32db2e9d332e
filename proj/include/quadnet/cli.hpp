#pragma once

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace quadnet::cli {

using nlohmann::json;

// Raised for bad flags, bad config files and unusable parameter values.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OptionSpec {
  std::string key;
  json default_value;  // also fixes the accepted type
  std::string help;
};

struct RunContext {
  json config;  // fully resolved, command keys only
  std::uint64_t seed = 0;
  int threads = 0;
  std::ostream* out = nullptr;
  json header;  // written as the first line of every output file
};

struct Command {
  std::string name;
  std::string description;
  std::vector<OptionSpec> options;
  std::function<int(RunContext&)> run;
};

const std::vector<Command>& commands();

// Merges defaults, then the flat JSON file, then flags. Unknown keys and
// type mismatches raise UsageError.
json resolve_config(const Command& cmd, const json& file, const std::vector<std::pair<std::string, std::string>>& flags);

// Parses a flag value against the type of its default.
json parse_value(const OptionSpec& spec, const std::string& text);

void write_header(std::ostream& out, const json& header);

std::string version();

// Entry point for the quadnet executable.
int main(int argc, char** argv);

}  // namespace quadnet::cli
