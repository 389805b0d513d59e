// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal RFC 4180 quoting for the trace and summary files.

#pragma once

#include <istream>
#include <string>
#include <vector>

namespace promptac::csv {

/// Quotes the field when it holds a comma, quote, or line break.
std::string escape(const std::string& field);

/// Splits one physical line; quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(const std::string& line);

/// Reads every remaining record; quoted fields may span lines.
std::vector<std::vector<std::string>> read_records(std::istream& in);

}  // namespace promptac::csv
