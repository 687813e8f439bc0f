// Copyright 2026 The NLMW Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlmw/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Neural language-modeling workbench"};
  std::string command, config_path;
  std::vector<std::string> overrides;
  app.add_option("command", command, "train, eval, sweep, gradcheck or analyze")
      ->required()
      ->check(CLI::IsMember({"train", "eval", "sweep", "gradcheck", "analyze"}));
  app.add_option("--config", config_path, "flat key = value config file")->required();
  app.add_option("overrides", overrides, "key=value pairs applied over the config file");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error kind=usage message=\"" << e.what() << "\"\n";
    return 2;
  }
  try {
    const nlmw::RunConfig config = nlmw::parse_config(config_path, overrides);
    return nlmw::run_command(command, config, std::cout);
  } catch (const std::exception& e) {
    std::cout.flush();
    std::cerr << nlmw::error_record(e) << "\n";
    return 1;
  }
}
