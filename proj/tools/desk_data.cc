// Copyright 2026 The cysec-dapt Authors.
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

// Regenerates the synthetic desk-scale input directory.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "support/desk_data.h"

int main(int argc, char** argv) {
  CLI::App app{"write the synthetic desk-scale inputs", "cysec-desk-data"};
  std::string dir;
  cysec::testing::DeskScale scale;
  app.add_option("dir", dir, "output directory")->required();
  app.add_option("--seed", scale.seed, "generator seed");
  CLI11_PARSE(app, argc, argv);
  cysec::testing::write_desk_data(dir, scale);
  std::cout << "wrote " << dir << "\n";
  return 0;
}
