#pragma once

// Field CSV: header "nx[,ny],hx[,hy]", then one value per interior node,
// x fastest.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "quadgrad/errors.hpp"
#include "quadgrad/grid.hpp"

namespace quadgrad {

template <int Dim>
void write_field_csv(std::ostream& os, const ScalarField<Dim>& v) {
  const auto& g = v.grid;
  os << std::setprecision(17);
  for (int k = 0; k < Dim; ++k) os << g.n()[k] << ',';
  for (int k = 0; k < Dim; ++k) os << g.h()[k] << (k + 1 < Dim ? "," : "\n");
  for (double x : v.values) os << x << '\n';
}

template <int Dim>
void write_field_csv(const std::filesystem::path& path, const ScalarField<Dim>& v) {
  std::ofstream os(path);
  if (!os) throw config_error("cannot write " + path.string());
  write_field_csv(os, v);
}

/// Reads a field and checks it against `g` (sizes exactly, spacing to 1e-9).
template <int Dim>
ScalarField<Dim> read_field_csv(std::istream& is, const Grid<Dim>& g, const std::string& name) {
  std::string line;
  if (!std::getline(is, line)) throw config_error(name + ": empty field file");
  std::vector<double> head;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        head.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw config_error(name + ": malformed header '" + line + "'");
      }
    }
  }
  if (head.size() != 2 * Dim) {
    throw config_error(name + ": header must hold " + std::to_string(2 * Dim) + " entries");
  }
  for (int k = 0; k < Dim; ++k) {
    if (static_cast<int>(head[k]) != g.n()[k] ||
        std::abs(head[Dim + k] - g.h()[k]) > 1e-9 * g.h()[k]) {
      throw config_error(name + ": header '" + line + "' does not match the configured grid");
    }
  }
  std::vector<double> values;
  values.reserve(g.nodes());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(line, &used);
    } catch (const std::exception&) {
      throw config_error(name + ": bad value on line " + std::to_string(lineno));
    }
    if (line.find_first_not_of(" \t\r", used) != std::string::npos) {
      throw config_error(name + ": trailing characters on line " + std::to_string(lineno));
    }
    values.push_back(x);
  }
  if (values.size() != g.nodes()) {
    throw config_error(name + ": expected " + std::to_string(g.nodes()) + " values, found " +
                       std::to_string(values.size()));
  }
  try {
    return ScalarField<Dim>(g, std::move(values));
  } catch (const domain_error& e) {
    throw config_error(name + ": " + e.what());
  }
}

template <int Dim>
ScalarField<Dim> read_field_csv(const std::filesystem::path& path, const Grid<Dim>& g) {
  std::ifstream is(path);
  if (!is) throw config_error("field file not found: " + path.string());
  return read_field_csv(is, g, path.string());
}

}  // namespace quadgrad
