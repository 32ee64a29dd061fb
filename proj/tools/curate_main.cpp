// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "curate/cli.hpp"

int main(int argc, char** argv) {
  return curate::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
