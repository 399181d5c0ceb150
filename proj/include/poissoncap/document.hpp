#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"
#include "poissoncap/solver.hpp"

namespace poissoncap {

class DocumentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolutionDocument {
  std::string schema_version = "1";
  ChannelParams params;
  CapacitySolution solution;
  SolverConfig config;
};

namespace detail {

/// 17 significant digits: shortest representation that round-trips doubles
/// and keeps documents byte-deterministic.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/// Deterministic solution document (fixed field order, 17-digit floats).
inline std::string write_solution_document(const SolutionDocument& doc) {
  std::ostringstream os;
  const auto num = detail::format_double;
  os << "{\n";
  os << "  \"schema_version\": \"" << doc.schema_version << "\",\n";
  os << "  \"amplitude\": " << num(doc.params.amplitude) << ",\n";
  os << "  \"dark_current\": " << num(doc.params.dark_current) << ",\n";
  os << "  \"capacity_nats\": " << num(doc.solution.capacity_nats) << ",\n";
  os << "  \"kkt_gap\": " << num(doc.solution.kkt_gap) << ",\n";
  os << "  \"y_max\": " << doc.solution.y_max << ",\n";
  os << "  \"iterations\": " << doc.solution.iterations << ",\n";
  os << "  \"converged\": " << (doc.solution.converged ? "true" : "false") << ",\n";
  os << "  \"points\": [\n";
  for (std::size_t i = 0; i < doc.solution.input.size(); ++i) {
    os << "    {\"x\": " << num(doc.solution.input.points[i])
       << ", \"p\": " << num(doc.solution.input.probs[i]) << "}"
       << (i + 1 < doc.solution.input.size() ? "," : "") << "\n";
  }
  os << "  ],\n";
  os << "  \"config\": {\n";
  os << "    \"kkt_tolerance\": " << num(doc.config.kkt_tolerance) << ",\n";
  os << "    \"prob_tolerance\": " << num(doc.config.prob_tolerance) << ",\n";
  os << "    \"grid_points\": " << doc.config.grid_points << ",\n";
  os << "    \"max_outer_iters\": " << doc.config.max_outer_iters << ",\n";
  os << "    \"merge_distance\": " << num(doc.config.merge_distance) << ",\n";
  os << "    \"prune_probability\": " << num(doc.config.prune_probability) << ",\n";
  os << "    \"location_step\": " << num(doc.config.location_step) << ",\n";
  os << "    \"tail_epsilon\": " << num(doc.config.tail_epsilon) << "\n";
  os << "  }\n";
  os << "}\n";
  return os.str();
}

inline SolutionDocument read_solution_document(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DocumentError(std::string("solution document: invalid JSON: ") + e.what());
  }
  SolutionDocument doc;
  try {
    doc.schema_version = j.at("schema_version").get<std::string>();
    if (doc.schema_version != "1")
      throw DocumentError("solution document: unsupported schema_version");
    doc.params.amplitude = j.at("amplitude").get<double>();
    doc.params.dark_current = j.at("dark_current").get<double>();
    doc.solution.capacity_nats = j.at("capacity_nats").get<double>();
    doc.solution.kkt_gap = j.at("kkt_gap").get<double>();
    doc.solution.y_max = j.at("y_max").get<int>();
    doc.solution.iterations = j.at("iterations").get<int>();
    doc.solution.converged = j.at("converged").get<bool>();
    for (const auto& pt : j.at("points")) {
      doc.solution.input.points.push_back(pt.at("x").get<double>());
      doc.solution.input.probs.push_back(pt.at("p").get<double>());
    }
    const auto& cfg = j.at("config");
    doc.config.kkt_tolerance = cfg.at("kkt_tolerance").get<double>();
    doc.config.prob_tolerance = cfg.at("prob_tolerance").get<double>();
    doc.config.grid_points = cfg.at("grid_points").get<int>();
    doc.config.max_outer_iters = cfg.at("max_outer_iters").get<int>();
    doc.config.merge_distance = cfg.at("merge_distance").get<double>();
    doc.config.prune_probability = cfg.at("prune_probability").get<double>();
    doc.config.location_step = cfg.at("location_step").get<double>();
    doc.config.tail_epsilon = cfg.at("tail_epsilon").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DocumentError(std::string("solution document: missing or mistyped field: ") + e.what());
  }
  if (doc.solution.input.points.empty()) throw DocumentError("solution document: no points");
  return doc;
}

/// key=value solver-config overrides ('#' comments and blank lines allowed).
inline SolverConfig parse_config_overrides(std::istream& in, SolverConfig base) {
  std::string line;
  int line_no = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw DocumentError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      if (key == "kkt_tolerance")
        base.kkt_tolerance = std::stod(value);
      else if (key == "prob_tolerance")
        base.prob_tolerance = std::stod(value);
      else if (key == "grid_points")
        base.grid_points = std::stoi(value);
      else if (key == "max_outer_iters")
        base.max_outer_iters = std::stoi(value);
      else if (key == "merge_distance")
        base.merge_distance = std::stod(value);
      else if (key == "prune_probability")
        base.prune_probability = std::stod(value);
      else if (key == "location_step")
        base.location_step = std::stod(value);
      else if (key == "tail_epsilon")
        base.tail_epsilon = std::stod(value);
      else if (key == "max_ba_iters")
        base.max_ba_iters = std::stoi(value);
      else if (key == "max_location_sweeps")
        base.max_location_sweeps = std::stoi(value);
      else
        throw DocumentError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw DocumentError("config line " + std::to_string(line_no) + ": bad value '" + value + "'");
    }
  }
  return base;
}

}  // namespace poissoncap
