#pragma once

// Run configuration: a YAML document with one mapping per section, plus
// `section.key=value` overrides from the command line. Unknown keys and
// out-of-range values are rejected with the offending line or flag.

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "adjoint.hpp"
#include "cost.hpp"
#include "errors.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "optimizer.hpp"
#include "twin.hpp"

namespace rijke4dvar::config {

struct RunConfig {
  ModelSettings model;
  /// t_end is the simulate horizon and the assimilate window.
  IntegratorConfig integrator{1e-3, 10.0};
  double x_m = 0.8;
  CovarianceSpec covariance;
  BackgroundKind bg_kind = BackgroundKind::PressurePoint;
  ObservationKind obs_kind = ObservationKind::PressurePoint;

  double truth_perturbation = 0.05;
  double truth_pressure_perturbation = 0.0;
  int n_obs = 100;
  double t_assim = 0.4;
  double t_forecast = 5.0;
  std::uint64_t seed = 1;
  bool background_noise = true;
  bool observation_noise = true;

  std::vector<int> sweep_n_obs{50, 100, 150, 200, 250};
  OptimizerConfig optimizer;

  /// Empty vectors fall back to the truth perturbation.
  std::vector<double> initial_eta, initial_eta_dot;
  std::vector<double> background_eta, background_eta_dot;
  std::string observations_file;

  double grad_check_step = kDefaultFdStep;
  double grad_check_tolerance = 1e-4;

  std::string output_dir;

  TwinConfig twin() const {
    TwinConfig t;
    t.model = model;
    t.dt = integrator.dt;
    t.truth_perturbation = truth_perturbation;
    t.truth_pressure_perturbation = truth_pressure_perturbation;
    t.x_m = x_m;
    t.b_var = covariance.b_var;
    t.r_var = covariance.r_var;
    t.bg_kind = bg_kind;
    t.obs_kind = obs_kind;
    t.n_obs = n_obs;
    t.t_assim = t_assim;
    t.t_forecast = t_forecast;
    t.rng_seed = seed;
    t.background_noise = background_noise;
    t.observation_noise = observation_noise;
    t.optimizer = optimizer;
    return t;
  }

  StateVector initial_state() const { return make_state(initial_eta, initial_eta_dot, "initial_state"); }
  StateVector background_state() const {
    return make_state(background_eta, background_eta_dot, "background");
  }

  /// Cross-field checks.
  void validate() const {
    ModelParams params(model);
    TimeGrid::make(integrator, params);
    twin().validate();
    for (int n : sweep_n_obs)
      if (n < 1) throw ConfigError("sweep.n_obs entries must be >= 1");
    if (sweep_n_obs.empty()) throw ConfigError("sweep.n_obs must not be empty");
    initial_state();
    background_state();
    if (!(grad_check_step > 0.0)) throw ConfigError("grad_check.step must be > 0");
    if (!(grad_check_tolerance > 0.0)) throw ConfigError("grad_check.tolerance must be > 0");
  }

 private:
  StateVector make_state(const std::vector<double>& eta, const std::vector<double>& eta_dot,
                         const std::string& section) const {
    const int n = model.n_modes;
    StateVector s(n);
    s.eta().setConstant(truth_perturbation);
    s.eta_dot().setConstant(truth_pressure_perturbation);
    auto fill = [&](const std::vector<double>& v, auto&& target, const char* key) {
      if (v.empty()) return;
      if (static_cast<int>(v.size()) != n)
        throw ConfigError(section + "." + key + " has " + std::to_string(v.size()) +
                          " entries, model.n_modes is " + std::to_string(n));
      for (int i = 0; i < n; ++i) target[i] = v[i];
    };
    fill(eta, s.eta(), "eta");
    fill(eta_dot, s.eta_dot(), "eta_dot");
    return s;
  }
};

namespace detail {

inline std::string where(const YAML::Node& node, const std::string& source) {
  const auto mark = node.Mark();
  if (mark.is_null()) return source;
  return source + ":" + std::to_string(mark.line + 1);
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const YAML::Node&, const std::string&)> set;
  std::function<void(YAML::Emitter&, const RunConfig&)> emit;
};

template <class T>
T scalar(const YAML::Node& node, const std::string& name, const std::string& at,
         const char* type) {
  if (!node.IsScalar()) throw ConfigError(at + ": " + name + ": expected " + type);
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(at + ": " + name + ": expected " + type + ", got '" + node.Scalar() + "'");
  }
}

template <class T>
std::vector<T> sequence(const YAML::Node& node, const std::string& name, const std::string& at,
                        const char* type) {
  if (!node.IsSequence()) throw ConfigError(at + ": " + name + ": expected a list of " + type);
  std::vector<T> out;
  for (const auto& item : node) out.push_back(scalar<T>(item, name, at, type));
  return out;
}

inline void check(bool ok, const std::string& at, const std::string& name, const std::string& what) {
  if (!ok) throw ConfigError(at + ": " + name + " " + what);
}

template <class Member>
Field real(std::string section, std::string key, Member member, bool positive) {
  const std::string name = section + "." + key;
  return Field{section, key,
               [=](RunConfig& c, const YAML::Node& n, const std::string& at) {
                 const double v = scalar<double>(n, name, at, "a number");
                 check(std::isfinite(v), at, name, "must be finite");
                 if (positive) check(v > 0.0, at, name, "must be > 0");
                 member(c) = v;
               },
               [=](YAML::Emitter& e, const RunConfig& c) {
                 e << YAML::Key << key << YAML::Value << member(const_cast<RunConfig&>(c));
               }};
}

template <class Member>
Field integer(std::string section, std::string key, Member member, int minimum) {
  const std::string name = section + "." + key;
  return Field{section, key,
               [=](RunConfig& c, const YAML::Node& n, const std::string& at) {
                 const int v = scalar<int>(n, name, at, "an integer");
                 check(v >= minimum, at, name, "must be >= " + std::to_string(minimum));
                 member(c) = v;
               },
               [=](YAML::Emitter& e, const RunConfig& c) {
                 e << YAML::Key << key << YAML::Value << member(const_cast<RunConfig&>(c));
               }};
}

template <class Member>
Field boolean(std::string section, std::string key, Member member) {
  const std::string name = section + "." + key;
  return Field{section, key,
               [=](RunConfig& c, const YAML::Node& n, const std::string& at) {
                 member(c) = scalar<bool>(n, name, at, "true or false");
               },
               [=](YAML::Emitter& e, const RunConfig& c) {
                 e << YAML::Key << key << YAML::Value << member(const_cast<RunConfig&>(c));
               }};
}

template <class Member>
Field real_list(std::string section, std::string key, Member member) {
  const std::string name = section + "." + key;
  return Field{section, key,
               [=](RunConfig& c, const YAML::Node& n, const std::string& at) {
                 auto v = sequence<double>(n, name, at, "numbers");
                 for (double x : v) check(std::isfinite(x), at, name, "entries must be finite");
                 member(c) = std::move(v);
               },
               [=](YAML::Emitter& e, const RunConfig& c) {
                 e << YAML::Key << key << YAML::Value << YAML::Flow
                   << member(const_cast<RunConfig&>(c));
               }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> registry = [] {
    std::vector<Field> f;
    f.push_back(integer("model", "n_modes", [](RunConfig& c) -> int& { return c.model.n_modes; }, 1));
    f.push_back(real("model", "beta", [](RunConfig& c) -> double& { return c.model.beta; }, false));
    f.push_back(real("model", "tau", [](RunConfig& c) -> double& { return c.model.tau; }, true));
    f.push_back(real("model", "c1", [](RunConfig& c) -> double& { return c.model.c1; }, false));
    f.push_back(real("model", "c2", [](RunConfig& c) -> double& { return c.model.c2; }, false));
    f.push_back(Field{
        "model", "poly",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          auto v = sequence<double>(n, "model.poly", at, "numbers");
          check(v.size() == 5, at, "model.poly", "must have exactly 5 coefficients (a1..a5)");
          for (std::size_t i = 0; i < 5; ++i) c.model.poly[i] = v[i];
        },
        [](YAML::Emitter& e, const RunConfig& c) {
          e << YAML::Key << "poly" << YAML::Value << YAML::Flow
            << std::vector<double>(c.model.poly.begin(), c.model.poly.end());
        }});
    f.push_back(Field{
        "model", "x_f",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          const double v = scalar<double>(n, "model.x_f", at, "a number");
          check(v > 0.0 && v < 1.0, at, "model.x_f", "must lie in (0, 1)");
          c.model.x_f = v;
        },
        [](YAML::Emitter& e, const RunConfig& c) { e << YAML::Key << "x_f" << YAML::Value << c.model.x_f; }});

    f.push_back(real("integrator", "dt", [](RunConfig& c) -> double& { return c.integrator.dt; }, true));
    f.push_back(real("integrator", "t_end", [](RunConfig& c) -> double& { return c.integrator.t_end; }, true));

    f.push_back(Field{
        "measurement", "x_m",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          const double v = scalar<double>(n, "measurement.x_m", at, "a number");
          check(v > 0.0 && v < 1.0, at, "measurement.x_m", "must lie in (0, 1)");
          c.x_m = v;
        },
        [](YAML::Emitter& e, const RunConfig& c) { e << YAML::Key << "x_m" << YAML::Value << c.x_m; }});

    f.push_back(real("covariance", "b_var", [](RunConfig& c) -> double& { return c.covariance.b_var; }, true));
    f.push_back(real("covariance", "r_var", [](RunConfig& c) -> double& { return c.covariance.r_var; }, true));

    f.push_back(Field{
        "cost", "background",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          const auto s = scalar<std::string>(n, "cost.background", at, "a, b or c");
          const auto kind = parse_background_kind(s);
          check(kind.has_value(), at, "cost.background", "must be a, b or c (got '" + s + "')");
          c.bg_kind = *kind;
        },
        [](YAML::Emitter& e, const RunConfig& c) {
          e << YAML::Key << "background" << YAML::Value << std::string(to_string(c.bg_kind));
        }});
    f.push_back(Field{
        "cost", "observation",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          const auto s = scalar<std::string>(n, "cost.observation", at, "a or b");
          const auto kind = parse_observation_kind(s);
          check(kind.has_value(), at, "cost.observation", "must be a or b (got '" + s + "')");
          c.obs_kind = *kind;
        },
        [](YAML::Emitter& e, const RunConfig& c) {
          e << YAML::Key << "observation" << YAML::Value << std::string(to_string(c.obs_kind));
        }});

    f.push_back(real("twin", "truth_perturbation", [](RunConfig& c) -> double& { return c.truth_perturbation; }, false));
    f.push_back(real("twin", "truth_pressure_perturbation",
                     [](RunConfig& c) -> double& { return c.truth_pressure_perturbation; }, false));
    f.push_back(integer("twin", "n_obs", [](RunConfig& c) -> int& { return c.n_obs; }, 1));
    f.push_back(real("twin", "t_assim", [](RunConfig& c) -> double& { return c.t_assim; }, true));
    f.push_back(real("twin", "t_forecast", [](RunConfig& c) -> double& { return c.t_forecast; }, true));
    f.push_back(Field{
        "twin", "seed",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          c.seed = scalar<std::uint64_t>(n, "twin.seed", at, "a non-negative integer");
        },
        [](YAML::Emitter& e, const RunConfig& c) {
          e << YAML::Key << "seed" << YAML::Value << static_cast<unsigned long long>(c.seed);
        }});
    f.push_back(boolean("twin", "background_noise", [](RunConfig& c) -> bool& { return c.background_noise; }));
    f.push_back(boolean("twin", "observation_noise", [](RunConfig& c) -> bool& { return c.observation_noise; }));

    f.push_back(Field{
        "sweep", "n_obs",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          auto v = sequence<int>(n, "sweep.n_obs", at, "integers");
          check(!v.empty(), at, "sweep.n_obs", "must not be empty");
          for (int x : v) check(x >= 1, at, "sweep.n_obs", "entries must be >= 1");
          c.sweep_n_obs = std::move(v);
        },
        [](YAML::Emitter& e, const RunConfig& c) {
          e << YAML::Key << "n_obs" << YAML::Value << YAML::Flow << c.sweep_n_obs;
        }});

    f.push_back(Field{
        "optimizer", "rel_grad_tol",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          const double v = scalar<double>(n, "optimizer.rel_grad_tol", at, "a number");
          check(v > 0.0 && v < 1.0, at, "optimizer.rel_grad_tol", "must lie in (0, 1)");
          c.optimizer.rel_grad_tol = v;
        },
        [](YAML::Emitter& e, const RunConfig& c) {
          e << YAML::Key << "rel_grad_tol" << YAML::Value << c.optimizer.rel_grad_tol;
        }});
    f.push_back(integer("optimizer", "max_iters", [](RunConfig& c) -> int& { return c.optimizer.max_iters; }, 1));
    f.push_back(integer("optimizer", "max_line_search_evals",
                        [](RunConfig& c) -> int& { return c.optimizer.max_line_search_evals; }, 1));
    f.push_back(integer("optimizer", "restart_period",
                        [](RunConfig& c) -> int& { return c.optimizer.restart_period; }, 0));
    f.push_back(real("optimizer", "initial_step", [](RunConfig& c) -> double& { return c.optimizer.initial_step; }, true));

    f.push_back(real_list("initial_state", "eta", [](RunConfig& c) -> std::vector<double>& { return c.initial_eta; }));
    f.push_back(real_list("initial_state", "eta_dot",
                          [](RunConfig& c) -> std::vector<double>& { return c.initial_eta_dot; }));
    f.push_back(real_list("background", "eta", [](RunConfig& c) -> std::vector<double>& { return c.background_eta; }));
    f.push_back(real_list("background", "eta_dot",
                          [](RunConfig& c) -> std::vector<double>& { return c.background_eta_dot; }));

    f.push_back(Field{
        "observations", "file",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          c.observations_file = scalar<std::string>(n, "observations.file", at, "a path");
        },
        [](YAML::Emitter& e, const RunConfig& c) {
          e << YAML::Key << "file" << YAML::Value << c.observations_file;
        }});

    f.push_back(real("grad_check", "step", [](RunConfig& c) -> double& { return c.grad_check_step; }, true));
    f.push_back(real("grad_check", "tolerance", [](RunConfig& c) -> double& { return c.grad_check_tolerance; }, true));

    f.push_back(Field{
        "output", "dir",
        [](RunConfig& c, const YAML::Node& n, const std::string& at) {
          c.output_dir = scalar<std::string>(n, "output.dir", at, "a path");
        },
        [](YAML::Emitter& e, const RunConfig& c) { e << YAML::Key << "dir" << YAML::Value << c.output_dir; }});
    return f;
  }();
  return registry;
}

inline const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

inline bool known_section(const std::string& section) {
  for (const auto& f : fields())
    if (f.section == section) return true;
  return false;
}

}  // namespace detail

/// Applies every key of a parsed document. `source` names the file in diagnostics.
inline void apply_document(RunConfig& cfg, const YAML::Node& root, const std::string& source) {
  if (!root || root.IsNull()) return;
  if (!root.IsMap()) throw ConfigError(detail::where(root, source) + ": top level must be a mapping");
  for (const auto& section : root) {
    const auto name = section.first.as<std::string>();
    const std::string at = detail::where(section.first, source);
    if (!detail::known_section(name)) throw ConfigError(at + ": unknown section '" + name + "'");
    if (section.second.IsNull()) continue;
    if (!section.second.IsMap())
      throw ConfigError(at + ": section '" + name + "' must be a mapping");
    for (const auto& entry : section.second) {
      const auto key = entry.first.as<std::string>();
      const std::string key_at = detail::where(entry.first, source);
      const auto* field = detail::find_field(name, key);
      if (!field) throw ConfigError(key_at + ": unknown key '" + name + "." + key + "'");
      field->set(cfg, entry.second, key_at);
    }
  }
}

inline RunConfig parse_string(const std::string& text, const std::string& source = "<config>") {
  RunConfig cfg;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  apply_document(cfg, root, source);
  return cfg;
}

inline RunConfig load_file(const std::string& path) {
  RunConfig cfg;
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config file '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  apply_document(cfg, root, path);
  return cfg;
}

/// Applies `section.key=value`; the value is parsed as YAML (so lists work).
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
  const std::string at = "--set " + assignment;
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(at + ": expected section.key=value");
  const std::string path = assignment.substr(0, eq);
  const auto dot = path.find('.');
  if (dot == std::string::npos) throw ConfigError(at + ": expected section.key=value");
  const auto* field = detail::find_field(path.substr(0, dot), path.substr(dot + 1));
  if (!field) throw ConfigError(at + ": unknown key '" + path + "'");
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw ConfigError(at + ": " + e.msg);
  }
  field->set(cfg, value, at);
}

/// Resolved configuration as YAML, loadable again with load_file. The output
/// directory is left out so that artifacts do not depend on where they live.
inline std::string to_yaml(const RunConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  std::string current;
  for (const auto& f : detail::fields()) {
    if (f.section == "output") continue;
    if (f.section != current) {
      if (!current.empty()) out << YAML::EndMap;
      current = f.section;
      out << YAML::Key << current << YAML::Value << YAML::BeginMap;
    }
    f.emit(out, cfg);
  }
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

/// The resolved configuration split into lines, for CSV comment headers.
inline std::vector<std::string> metadata_lines(const RunConfig& cfg) {
  std::vector<std::string> lines;
  std::istringstream in(to_yaml(cfg));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace rijke4dvar::config
