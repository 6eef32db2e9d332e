#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "quadnet/cli.hpp"
#include "quadnet/errors.hpp"
#include "quadnet/parallel.hpp"

#ifndef QUADNET_VERSION
#define QUADNET_VERSION "0.0.0"
#endif

namespace quadnet::cli {

namespace {

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_int(const std::string& s, long long& out) {
  try {
    std::size_t used = 0;
    out = std::stoll(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Value accepted for the slot described by `like`; integral floats are allowed
// where integers are expected.
bool coerce(const json& like, const json& value, json& out) {
  if (like.is_boolean()) {
    if (!value.is_boolean()) return false;
    out = value;
    return true;
  }
  if (like.is_number_integer()) {
    if (value.is_number_integer()) {
      out = value;
      return true;
    }
    if (value.is_number_float() && std::floor(value.get<double>()) == value.get<double>()) {
      out = static_cast<long long>(value.get<double>());
      return true;
    }
    return false;
  }
  if (like.is_number()) {
    if (!value.is_number()) return false;
    out = value.get<double>();
    return true;
  }
  if (like.is_string()) {
    if (!value.is_string()) return false;
    out = value;
    return true;
  }
  if (like.is_array()) {
    if (!value.is_array()) return false;
    const json elem = like.empty() ? json(0.0) : like.front();
    out = json::array();
    for (const auto& v : value) {
      json c;
      if (!coerce(elem, v, c)) return false;
      out.push_back(c);
    }
    return true;
  }
  return false;
}

const char* type_name(const json& like) {
  if (like.is_boolean()) return "boolean";
  if (like.is_number_integer()) return "integer";
  if (like.is_number()) return "number";
  if (like.is_string()) return "string";
  if (like.is_array()) return "list";
  return "value";
}

}  // namespace

std::string version() { return QUADNET_VERSION; }

json parse_value(const OptionSpec& spec, const std::string& raw) {
  const std::string text = trim(raw);
  const json& like = spec.default_value;
  auto fail = [&]() -> json {
    throw UsageError("--" + spec.key + ": expected " + type_name(like) + ", got '" + raw + "'");
  };
  if (like.is_boolean()) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    return fail();
  }
  if (like.is_number_integer()) {
    long long v = 0;
    if (!parse_int(text, v)) return fail();
    return v;
  }
  if (like.is_number()) {
    double v = 0;
    if (!parse_double(text, v)) return fail();
    return v;
  }
  if (like.is_string()) return text;
  if (like.is_array()) {
    json parsed = json::array();
    if (!text.empty() && text.front() == '[') {
      try {
        parsed = json::parse(text);
      } catch (const json::exception&) {
        return fail();
      }
    } else if (!text.empty()) {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        double v = 0;
        if (!parse_double(trim(item), v)) return fail();
        parsed.push_back(v);
      }
    }
    json out;
    if (!coerce(like, parsed, out)) return fail();
    return out;
  }
  return fail();
}

json resolve_config(const Command& cmd, const json& file,
                    const std::vector<std::pair<std::string, std::string>>& flags) {
  json out = json::object();
  std::map<std::string, const OptionSpec*> by_key;
  for (const auto& o : cmd.options) {
    out[o.key] = o.default_value;
    by_key[o.key] = &o;
  }
  if (!file.is_null()) {
    if (!file.is_object()) throw UsageError("config file must hold a flat JSON object");
    for (const auto& [key, value] : file.items()) {
      const auto it = by_key.find(key);
      if (it == by_key.end()) throw UsageError("unknown config key '" + key + "' for " + cmd.name);
      json c;
      if (!coerce(it->second->default_value, value, c))
        throw UsageError("config key '" + key + "': expected " + type_name(it->second->default_value));
      out[key] = c;
    }
  }
  for (const auto& [key, text] : flags) {
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw UsageError("unknown option --" + key);
    out[key] = parse_value(*it->second, text);
  }
  return out;
}

void write_header(std::ostream& out, const json& header) { out << "# " << header.dump() << '\n'; }

int main(int argc, char** argv) {
  CLI::App app{"Bayes-optimal learning toolkit for extensive-width quadratic networks", "quadnet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  std::string config_path;
  std::string out_path = "-";
  int threads = 0;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "flat JSON file with command parameters");
  app.add_option("--out", out_path, "output CSV path, '-' for stdout");
  app.add_option("--threads", threads, "worker threads, 0 = QUADNET_THREADS or all cores");
  app.add_option("--seed", seed, "base RNG seed");

  const auto& cmds = commands();
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& cmd : cmds) {
    auto* sub = app.add_subcommand(cmd.name, cmd.description);
    sub->fallthrough();
    for (const auto& o : cmd.options) {
      auto* opt = sub->add_option("--" + o.key, raw[cmd.name][o.key], o.help);
      opt->default_str(o.default_value.is_string() ? o.default_value.get<std::string>() : o.default_value.dump());
    }
    subs.emplace_back(sub, &cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    try {
      json file;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw UsageError("cannot read config file " + config_path);
        try {
          file = json::parse(in);
        } catch (const json::exception& e) {
          throw UsageError(std::string("config file is not valid JSON: ") + e.what());
        }
      }
      std::vector<std::pair<std::string, std::string>> flags;
      for (const auto& o : cmd->options)
        if (sub->count("--" + o.key) > 0) flags.emplace_back(o.key, raw[cmd->name][o.key]);

      RunContext ctx;
      ctx.config = resolve_config(*cmd, file, flags);
      ctx.seed = seed;
      ctx.threads = parallel::resolve_threads(threads);
      ctx.header = {{"command", cmd->name}, {"version", version()}, {"seed", seed}, {"config", ctx.config}};

      std::ofstream file_out;
      if (out_path != "-") {
        file_out.open(out_path);
        if (!file_out) throw UsageError("cannot write " + out_path);
        ctx.out = &file_out;
      } else {
        ctx.out = &std::cout;
      }
      return cmd->run(ctx);
    } catch (const UsageError& e) {
      std::cerr << "usage error: " << e.what() << '\n';
      return 2;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}

}  // namespace quadnet::cli
