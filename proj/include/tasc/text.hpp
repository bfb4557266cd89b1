// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

namespace tasc {

// Double-quoted string with \" \\ \n \t escapes; the DSL and DOT share it.
std::string quote(std::string_view s);

// `[A-Za-z_][A-Za-z0-9_-]*`
bool is_identifier(std::string_view s);

// YYYY-MM-DD with a plausible month/day.
bool is_iso_date(std::string_view s);

}  // namespace tasc
