// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tasc::cli {

enum ExitCode : int {
  kOk = 0,
  kFailures = 1,  // validation errors, non-conformant traces, tolerance exceeded
  kUsage = 2,
  kInputError = 3,  // unreadable file, malformed notation/JSON/CSV
};

// Runs the `tasc` command line. args excludes the program name. `in` backs
// FILE arguments given as `-`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace tasc::cli
