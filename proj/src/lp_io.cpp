/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The treesel Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "treesel/lp_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "treesel/errors.hpp"

namespace treesel {

using nlohmann::json;

namespace {

json bound_to_json(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

double bound_from_json(const json& v, double infinity) {
  if (v.is_null()) return infinity;
  return v.get<double>();
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::kLe:
      return "le";
    case Relation::kGe:
      return "ge";
    case Relation::kEq:
      return "eq";
  }
  return "le";
}

Relation relation_from_name(const std::string& s) {
  if (s == "le") return Relation::kLe;
  if (s == "ge") return Relation::kGe;
  if (s == "eq") return Relation::kEq;
  throw ParseError("unknown row relation '" + s + "'");
}

}  // namespace

json program_to_json(const LinearProgram& lp) {
  json doc;
  doc["num_vars"] = lp.num_vars;
  doc["objective"] = lp.objective;
  json rows = json::array();
  for (const Row& row : lp.rows) {
    json coeffs = json::array();
    for (const auto& e : row.coeffs) coeffs.push_back({e.col, e.value});
    rows.push_back({{"coeffs", std::move(coeffs)},
                    {"rel", relation_name(row.rel)},
                    {"rhs", row.rhs}});
  }
  doc["rows"] = std::move(rows);
  json lower = json::array();
  json upper = json::array();
  for (int j = 0; j < lp.num_vars; ++j) {
    lower.push_back(bound_to_json(lp.lower[j]));
    upper.push_back(bound_to_json(lp.upper[j]));
  }
  doc["lower"] = std::move(lower);
  doc["upper"] = std::move(upper);
  json integer = json::array();
  for (bool b : lp.is_integer) integer.push_back(b);
  doc["integer"] = std::move(integer);
  return doc;
}

LinearProgram program_from_json(const json& doc) {
  try {
    LinearProgram lp;
    lp.num_vars = doc.at("num_vars").get<int>();
    lp.objective = doc.at("objective").get<std::vector<double>>();
    for (const auto& r : doc.at("rows")) {
      Row row;
      for (const auto& c : r.at("coeffs"))
        row.coeffs.push_back({c.at(0).get<int>(), c.at(1).get<double>()});
      row.rel = relation_from_name(r.at("rel").get<std::string>());
      row.rhs = r.at("rhs").get<double>();
      lp.rows.push_back(std::move(row));
    }
    for (const auto& v : doc.at("lower")) lp.lower.push_back(bound_from_json(v, -kInf));
    for (const auto& v : doc.at("upper")) lp.upper.push_back(bound_from_json(v, kInf));
    for (const auto& v : doc.at("integer")) lp.is_integer.push_back(v.get<bool>());
    lp.validate();
    return lp;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed instance document: ") + e.what());
  }
}

std::string write_program_string(const LinearProgram& lp) {
  return program_to_json(lp).dump();
}

LinearProgram read_program_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("instance is not valid JSON: ") + e.what());
  }
  return program_from_json(doc);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
}

void write_program(const std::filesystem::path& path, const LinearProgram& lp) {
  write_text_file(path, write_program_string(lp));
}

LinearProgram read_program(const std::filesystem::path& path) {
  return read_program_string(read_text_file(path));
}

}  // namespace treesel
