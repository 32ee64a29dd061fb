// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace curate {

/// Exit codes: 0 success, 1 invalid input or config, 2 stage or service failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace curate
