// Copyright 2026 The qreservoir Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batch front end: `qreservoir run --config FILE [--seed N] [--threads N]
// [--out PREFIX]` and `qreservoir validate --config FILE`.

#include "qreservoir/cli/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using qreservoir::cli::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitIo = 1;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qreservoir::cli::ConfigError({"cannot read config file " + path});
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw qreservoir::cli::ConfigError({path + ": " + e.what()});
  }
}

std::string output_path(const std::string& prefix, const std::string& name) {
  if (!prefix.empty() && (prefix.back() == '/' || fs::is_directory(prefix))) return (fs::path(prefix) / name).string();
  return prefix + "_" + name;
}

/// Writes every table and the manifest; on any failure removes what was
/// already written and rethrows.
void write_outputs(const std::string& prefix, const qreservoir::cli::Plan& plan,
                   const qreservoir::cli::Output& out) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& [name, table] : out.tables) files.emplace_back(output_path(prefix, name + ".csv"), table.csv());
  files.emplace_back(output_path(prefix, "manifest.json"), qreservoir::cli::manifest(plan, out).dump(2) + "\n");

  std::vector<std::string> written;
  try {
    const fs::path parent = fs::path(files.front().first).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    for (const auto& [path, content] : files) {
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error("cannot open " + path + " for writing");
      written.push_back(path);
      f << content;
      f.close();
      if (!f) throw std::runtime_error("failed writing " + path);
    }
  } catch (...) {
    for (const auto& p : written) {
      std::error_code ec;
      fs::remove(p, ec);
    }
    throw;
  }
  for (const auto& [path, content] : files) std::cout << "wrote " << path << "\n";
}

int report_config_error(const qreservoir::cli::ConfigError& e) {
  std::cerr << "configuration error:\n";
  for (const auto& p : e.problems()) std::cerr << "  - " << p << "\n";
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Atomic-beam cavity reservoir simulator"};
  app.set_version_flag("--version", std::string(QRESERVOIR_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_prefix;

  CLI::App* run = app.add_subcommand("run", "Run an experiment and write CSV tables plus a JSON manifest");
  run->add_option("--config", config_path, "Experiment config (JSON), or a manifest from an earlier run")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--threads", threads, "Worker threads; results do not depend on this")->check(CLI::Range(1, 1024));
  run->add_option("--out", out_prefix, "Output path prefix (or directory ending in '/')");

  CLI::App* validate = app.add_subcommand("validate", "Check a config and print it with defaults filled in");
  validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const qreservoir::cli::Plan plan = qreservoir::cli::parse(load_json(config_path), seed);
    if (validate->parsed()) {
      std::cout << plan.resolved.dump(2) << "\n";
      return kExitOk;
    }
    const std::string prefix = !out_prefix.empty() ? out_prefix : plan.output.value_or(plan.experiment);
    const qreservoir::cli::Output out = qreservoir::cli::execute(plan, threads);
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
    write_outputs(prefix, plan, out);
    return kExitOk;
  } catch (const qreservoir::cli::ConfigError& e) {
    return report_config_error(e);
  } catch (const qreservoir::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const qreservoir::ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
