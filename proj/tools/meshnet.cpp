// Command-line front end: every subcommand reads a run config and writes a
// JSON report. Failures produce {"error": {...}} and a nonzero exit code.

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "meshnet/config.hpp"
#include "meshnet/error.hpp"
#include "meshnet/harness.hpp"

namespace {

using Command = std::function<nlohmann::json(const meshnet::RunConfig&)>;

void emit(const nlohmann::json& report, const std::string& out_path) {
  const std::string text = report.dump(2);
  if (out_path.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw meshnet::Error(meshnet::ErrorCode::Io, "cannot write '" + out_path + "'");
  out << text << '\n';
}

nlohmann::json error_report(std::string_view code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gauge equivariant mesh networks: features, equivariance gaps, training, timing"};
  app.require_subcommand(1);

  const std::map<std::string, std::pair<std::string, Command>> commands{
      {"gen-mesh", {"Generate a synthetic mesh and write it as OFF", meshnet::run_gen_mesh}},
      {"features", {"Compute input features of a mesh", meshnet::run_features}},
      {"eqgap", {"Equivariance gaps of a randomly initialised model", meshnet::run_eqgap}},
      {"train", {"Train on a synthetic dataset and save a checkpoint", meshnet::run_train}},
      {"eval", {"Evaluate a checkpoint under each transformation family", meshnet::run_eval}},
      {"time", {"Per-layer forward + backward timing", meshnet::run_time}},
  };

  std::string config_path;
  std::string out_path;
  std::map<CLI::App*, const Command*> handlers;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "Run config (key = value with [section] headers)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "Report path (stdout when omitted)");
    handlers[sub] = &entry.second;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cout << error_report("usage", e.what()).dump() << '\n';
    return code;
  }

  for (const auto& [sub, handler] : handlers) {
    if (!sub->parsed()) continue;
    try {
      const meshnet::RunConfig config = meshnet::load_run_config(config_path);
      emit((*handler)(config), out_path);
      return 0;
    } catch (const meshnet::Error& e) {
      const nlohmann::json report = error_report(meshnet::to_string(e.code()), e.what());
      std::cerr << e.what() << '\n';
      try {
        emit(report, out_path);
      } catch (const std::exception&) {
        std::cout << report.dump() << '\n';
      }
      return 2;
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      std::cout << error_report("internal", e.what()).dump() << '\n';
      return 3;
    }
  }
  return 1;
}
