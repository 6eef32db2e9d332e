#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "quadnet/cli.hpp"

using namespace quadnet;
using cli::json;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "quadnet");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const cli::Command& command(const std::string& name) {
  for (const auto& c : cli::commands())
    if (c.name == name) return c;
  throw std::runtime_error("missing command " + name);
}

const std::filesystem::path tmp = std::filesystem::temp_directory_path();

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("all commands are registered") {
    for (const char* n : {"se-curve", "phase-diagram", "gamp", "denoise-mc", "gd", "gd-scan", "density", "generate"})
      CHECK_NOTHROW(command(n));
  }

  TEST_CASE("defaults, then file, then flags") {
    const auto& cmd = command("se-curve");
    const json file = {{"alpha_steps", 7}, {"alpha_max", 0.4}};
    const auto c = cli::resolve_config(cmd, file, {{"alpha_steps", "9"}});
    CHECK(c["alpha_steps"] == 9);
    CHECK(c["alpha_max"] == 0.4);
    CHECK(c["kappas"] == json::array({0.5}));
  }

  TEST_CASE("unknown keys and bad types are usage errors") {
    const auto& cmd = command("se-curve");
    CHECK_THROWS_AS(cli::resolve_config(cmd, json{{"nope", 1}}, {}), cli::UsageError);
    CHECK_THROWS_AS(cli::resolve_config(cmd, json{{"alpha_steps", "many"}}, {}), cli::UsageError);
    CHECK_THROWS_AS(cli::resolve_config(cmd, json::array(), {}), cli::UsageError);
    CHECK_THROWS_AS(cli::resolve_config(cmd, json(), {{"nope", "1"}}), cli::UsageError);
  }

  TEST_CASE("value parsing") {
    const cli::OptionSpec flag{"f", false, ""};
    CHECK(cli::parse_value(flag, "yes") == true);
    CHECK(cli::parse_value(flag, "0") == false);
    CHECK_THROWS_AS(cli::parse_value(flag, "maybe"), cli::UsageError);
    const cli::OptionSpec list{"l", json::array({0.5}), ""};
    CHECK(cli::parse_value(list, "0.1,0.2") == json::array({0.1, 0.2}));
    CHECK(cli::parse_value(list, "[1, 2.5]") == json::array({1.0, 2.5}));
    const cli::OptionSpec integer{"i", 3, ""};
    CHECK(cli::parse_value(integer, " 12 ") == 12);
    CHECK_THROWS_AS(cli::parse_value(integer, "1.5"), cli::UsageError);
  }

  TEST_CASE("exit codes") {
    CHECK(run({"se-curve", "--alphas", "0.1", "--out", (tmp / "quadnet_ok.csv").string()}) == 0);
    CHECK(run({"se-curve", "--alpha_steps", "zero"}) == 2);
    CHECK(run({"no-such-command"}) == 2);
    CHECK(run({"gamp", "--d", "1", "--out", (tmp / "quadnet_bad.csv").string()}) == 2);
    // data too large for the memory budget is a runtime failure
    CHECK(run({"gamp", "--d", "100000", "--seeds", "1", "--out", (tmp / "quadnet_bad.csv").string()}) == 1);
  }

  TEST_CASE("header and bit-exact output") {
    const auto a = tmp / "quadnet_a.csv", b = tmp / "quadnet_b.csv";
    for (const auto& p : {a, b})
      REQUIRE(run({"--seed", "3", "gamp", "--d", "20", "--seeds", "2", "--alpha", "0.2", "--max_iterations", "10",
                   "--out", p.string()}) == 0);
    const auto text = slurp(a);
    CHECK(text == slurp(b));
    REQUIRE(text.rfind("# ", 0) == 0);
    const auto header = json::parse(text.substr(2, text.find('\n') - 2));
    CHECK(header["command"] == "gamp");
    CHECK(header["seed"] == 3);
    CHECK(header["version"] == cli::version());
    CHECK(header["config"]["d"] == 20);
  }
}
