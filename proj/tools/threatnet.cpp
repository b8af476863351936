// threatnet command line: one subcommand per pipeline stage.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "threatnet/error.hpp"
#include "threatnet/pipeline.hpp"

namespace {

std::string kebab(std::string s) {
  for (char& ch : s)
    if (ch == '_') ch = '-';
  return s;
}

int fail(const std::string& code, const std::string& message) {
  nlohmann::json err = {{"error", code}, {"message", message}};
  std::cerr << err.dump() << '\n';
  return code == "config" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reply-network features and incident prediction from forum data"};
  app.set_version_flag("--version", std::string(threatnet::library_version()));
  app.require_subcommand(1);

  std::string config_path;
  bool print_config = false;
  bool quiet = false;
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;

  const std::map<std::string, std::string> about = {
      {"ingest", "validate inputs and write corpus_summary.json"},
      {"build-graphs", "dump per-window reply graphs"},
      {"experts", "write expert sets and the degree t-test report"},
      {"features", "write the daily feature matrix"},
      {"train", "fit a model on the training split"},
      {"evaluate", "score the model on the test split"},
      {"synth", "generate a synthetic corpus into the output dir"},
      {"all", "ingest through evaluate"},
  };
  for (const auto& name : threatnet::subcommands()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("-c,--config", config_path, "JSON config file");
    sub->add_flag("--print-config", print_config, "print the resolved config and exit");
    sub->add_flag("-q,--quiet", quiet, "suppress progress lines");
    for (const auto& key : threatnet::config_keys()) {
      const std::string opt = "--" + kebab(key.name);
      if (key.kind == threatnet::ConfigKey::Kind::flag)
        sub->add_flag(opt + ",!--no-" + kebab(key.name), flags[key.name], key.help);
      else
        sub->add_option(opt, values[key.name], key.help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }
  CLI::App* sub = app.get_subcommands().front();
  const std::string subcommand = sub->get_name();

  try {
    threatnet::PipelineConfig config = threatnet::PipelineConfig::with_defaults();
    if (!config_path.empty()) config = threatnet::load_config(config_path, config);
    std::vector<std::string> problems;
    for (const auto& key : threatnet::config_keys()) {
      const std::string opt = "--" + kebab(key.name);
      if (sub->get_option(opt)->count() == 0) continue;
      try {
        key.set(config, key.kind == threatnet::ConfigKey::Kind::flag
                            ? (flags[key.name] ? "true" : "false")
                            : values[key.name]);
      } catch (const threatnet::Error& e) {
        problems.push_back(e.what());
      }
    }
    if (!problems.empty()) {
      std::string msg = "invalid arguments: ";
      for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
      return fail("config", msg);
    }
    if (print_config) {
      threatnet::write_config(std::cout, config);
      return 0;
    }
    std::ostream null_stream(nullptr);
    threatnet::run(subcommand, config, quiet ? null_stream : std::cout);
    return 0;
  } catch (const threatnet::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
}
