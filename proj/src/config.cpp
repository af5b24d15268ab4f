#include "qmor/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "qmor/errors.hpp"

namespace qmor {

BurgersParams PipelineConfig::burgers() const {
  BurgersParams p;
  p.cells = cells;
  p.length = length;
  p.inflow = inflow;
  p.initial_value = initial_value;
  p.source_amplitude = source_a;
  p.source_rate = source_b;
  return p;
}

NewtonConfig PipelineConfig::newton() const {
  return {newton_tol, newton_tol_abs, newton_max_iters};
}

LspgConfig PipelineConfig::lspg() const {
  return {gn_tol_rel, gn_tol_abs, gn_max_iters};
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value;
  in >> value;
  std::string rest;
  if (!in || (in >> rest && !rest.empty()))
    throw InvalidArgument("config key '" + key + "': cannot parse value \"" + text + "\"");
  return value;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"cells", [&](const std::string& k, const std::string& v) { cfg.cells = parse_number<Index>(k, v); }},
      {"length", [&](const std::string& k, const std::string& v) { cfg.length = parse_number<double>(k, v); }},
      {"inflow", [&](const std::string& k, const std::string& v) { cfg.inflow = parse_number<double>(k, v); }},
      {"initial_value", [&](const std::string& k, const std::string& v) { cfg.initial_value = parse_number<double>(k, v); }},
      {"source_a", [&](const std::string& k, const std::string& v) { cfg.source_a = parse_number<double>(k, v); }},
      {"source_b", [&](const std::string& k, const std::string& v) { cfg.source_b = parse_number<double>(k, v); }},
      {"dt", [&](const std::string& k, const std::string& v) { cfg.dt = parse_number<double>(k, v); }},
      {"t_final", [&](const std::string& k, const std::string& v) { cfg.t_final = parse_number<double>(k, v); }},
      {"scheme",
       [&](const std::string& k, const std::string& v) {
         if (v == "bdf1") {
           cfg.scheme = TimeScheme::Bdf1;
         } else if (v == "bdf2") {
           cfg.scheme = TimeScheme::Bdf2;
         } else {
           throw InvalidArgument("config key '" + k + "': expected bdf1 or bdf2, got \"" + v + "\"");
         }
       }},
      {"snapshot_stride", [&](const std::string& k, const std::string& v) { cfg.snapshot_stride = parse_number<Index>(k, v); }},
      {"newton_tol", [&](const std::string& k, const std::string& v) { cfg.newton_tol = parse_number<double>(k, v); }},
      {"newton_tol_abs", [&](const std::string& k, const std::string& v) { cfg.newton_tol_abs = parse_number<double>(k, v); }},
      {"newton_max_iters", [&](const std::string& k, const std::string& v) { cfg.newton_max_iters = parse_number<int>(k, v); }},
      {"epsilon_s", [&](const std::string& k, const std::string& v) { cfg.epsilon_s = parse_number<double>(k, v); }},
      {"zeta", [&](const std::string& k, const std::string& v) { cfg.zeta = parse_number<double>(k, v); }},
      {"omega", [&](const std::string& k, const std::string& v) { cfg.omega = parse_number<double>(k, v); }},
      {"alpha_star", [&](const std::string& k, const std::string& v) { cfg.alpha_star = parse_number<double>(k, v); }},
      {"tau", [&](const std::string& k, const std::string& v) { cfg.tau = parse_number<double>(k, v); }},
      {"train_stride", [&](const std::string& k, const std::string& v) { cfg.train_stride = parse_number<Index>(k, v); }},
      {"gn_tol_rel", [&](const std::string& k, const std::string& v) { cfg.gn_tol_rel = parse_number<double>(k, v); }},
      {"gn_tol_abs", [&](const std::string& k, const std::string& v) { cfg.gn_tol_abs = parse_number<double>(k, v); }},
      {"gn_max_iters", [&](const std::string& k, const std::string& v) { cfg.gn_max_iters = parse_number<int>(k, v); }},
      {"probe1", [&](const std::string& k, const std::string& v) { cfg.probe1 = parse_number<Index>(k, v); }},
      {"probe2", [&](const std::string& k, const std::string& v) { cfg.probe2 = parse_number<Index>(k, v); }},
      {"trajectory_path", [&](const std::string&, const std::string& v) { cfg.trajectory_path = v; }},
      {"timing_path", [&](const std::string&, const std::string& v) { cfg.timing_path = v; }},
  };

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument(origin + ":" + std::to_string(line_no) +
                            ": expected \"key = value\", got \"" + line + "\"");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw InvalidArgument(origin + ":" + std::to_string(line_no) +
                            ": unknown config key '" + key + "'");
    if (++seen[key] > 1)
      throw InvalidArgument(origin + ":" + std::to_string(line_no) +
                            ": duplicate config key '" + key + "'");
    it->second(key, value);
  }

  if (cfg.cells < 1) throw InvalidArgument("config key 'cells': must be >= 1");
  if (!(cfg.dt > 0.0)) throw InvalidArgument("config key 'dt': must be positive");
  if (cfg.t_final < 0.0) throw InvalidArgument("config key 't_final': must be nonnegative");
  if (cfg.snapshot_stride < 1)
    throw InvalidArgument("config key 'snapshot_stride': must be >= 1");
  if (cfg.train_stride < 1)
    throw InvalidArgument("config key 'train_stride': must be >= 1");
  if (cfg.probe1 < 0 || cfg.probe1 >= cfg.cells)
    throw InvalidArgument("config key 'probe1': cell out of range");
  if (cfg.probe2 < 0 || cfg.probe2 >= cfg.cells)
    throw InvalidArgument("config key 'probe2': cell out of range");
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_pipeline_config(text.str(), path);
}

}  // namespace qmor
