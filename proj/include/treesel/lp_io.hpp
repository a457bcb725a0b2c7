/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "treesel/lp.hpp"

namespace treesel {

// Instance document: {num_vars, objective, rows: [{coeffs: [[col, value]...],
// rel: "le"|"ge"|"eq", rhs}], lower, upper, integer}. Infinite bounds are
// written as null.
nlohmann::json program_to_json(const LinearProgram& lp);
LinearProgram program_from_json(const nlohmann::json& doc);

std::string write_program_string(const LinearProgram& lp);
LinearProgram read_program_string(const std::string& text);

void write_program(const std::filesystem::path& path, const LinearProgram& lp);
LinearProgram read_program(const std::filesystem::path& path);

// Reads a whole file; throws ParseError if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace treesel
