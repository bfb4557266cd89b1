// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tasc/model.hpp"
#include "tasc/synthesis.hpp"

namespace tasc {

struct ContingencyRow {
  std::string caremap;
  std::string node;
  std::string edge;
  std::uint64_t count = 0;
  std::size_t line = 0;  // 1-based source line, 0 when built in code
};

// Header `caremap,node,edge,count` required; `#` lines and blank lines are
// skipped. Throws Error("CsvFormat").
std::vector<ContingencyRow> read_contingency_csv(std::istream& in);

// Probabilities are count / node total on a 1e-12 grid; the first-listed
// largest count absorbs the rounding residual so each node sums to exactly 1.
// Out-edges without a row get 0. Throws Error with code UnknownEdge,
// ZeroTotal or DuplicateRow.
TransitionModel derive_model(std::span<const ContingencyRow> rows, const CaremapSet& set, std::uint64_t seed);

}  // namespace tasc
