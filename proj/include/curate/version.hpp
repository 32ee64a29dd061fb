// Copyright 2026 The Curate Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace curate {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace curate
