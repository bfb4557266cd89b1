// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace tasc {

// Every failure thrown by the library carries a stable code ("UnknownNode",
// "PathExplosion", "UnitMismatch", ...) that tests and the CLI key off.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  [[nodiscard]] const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace tasc
