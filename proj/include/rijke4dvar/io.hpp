#pragma once

// CSV persistence. Every file starts with '#' comment lines carrying the
// resolved run configuration, then one header row; numbers are written with
// 17 significant digits so files round-trip bit-exactly.

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cost.hpp"
#include "errors.hpp"
#include "integrator.hpp"
#include "model.hpp"
#include "optimizer.hpp"
#include "twin.hpp"

namespace rijke4dvar::io {

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Comment block prepended to every CSV.
using Metadata = std::vector<std::string>;

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const Metadata& meta, const std::vector<std::string>& columns)
      : out_(out) {
    for (const auto& line : meta) out_ << "# " << line << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
    out_ << '\n';
  }

  /// Row whose first cell is text.
  void row(std::string_view label, const std::vector<double>& values) {
    out_ << label;
    for (double v : values) out_ << ',' << format_number(v);
    out_ << '\n';
  }

 private:
  std::ostream& out_;
};

inline std::vector<std::string> state_columns(int n_modes) {
  std::vector<std::string> cols;
  for (int j = 1; j <= n_modes; ++j) cols.push_back("eta_" + std::to_string(j));
  for (int j = 1; j <= n_modes; ++j) cols.push_back("eta_dot_" + std::to_string(j));
  return cols;
}

/// t, eta_1..eta_N, eta_dot_1..eta_dot_N (scaled), p(x_m), u(x_m).
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, double x_m,
                                 const Metadata& meta = {}) {
  const int n = traj.n_modes();
  std::vector<std::string> cols{"t"};
  for (auto& c : state_columns(n)) cols.push_back(std::move(c));
  cols.push_back("p_xm");
  cols.push_back("u_xm");
  CsvWriter csv(out, meta, cols);
  const Eigen::VectorXd ps = pressure_shape(n, x_m);
  const Eigen::VectorXd us = velocity_shape(n, x_m);
  std::vector<double> row(2 * n + 3);
  for (std::size_t k = 0; k <= traj.n_steps(); ++k) {
    const auto x = traj.states().col(k);
    row[0] = traj.time(k);
    for (int i = 0; i < 2 * n; ++i) row[1 + i] = x[i];
    row[2 * n + 1] = ps.dot(x.tail(n));
    row[2 * n + 2] = us.dot(x.head(n));
    csv.row(row);
  }
}

/// t, p(x_m), u(x_m), share of energy in modes 1..min(3, N).
inline void write_probe_csv(std::ostream& out, const Trajectory& traj, double x_m,
                            const Metadata& meta = {}) {
  const int n = traj.n_modes();
  const int cutoff = std::min(3, n);
  CsvWriter csv(out, meta, {"t", "p_xm", "u_xm", "energy", "energy_share_low_modes"});
  const Eigen::VectorXd ps = pressure_shape(n, x_m);
  const Eigen::VectorXd us = velocity_shape(n, x_m);
  for (std::size_t k = 0; k <= traj.n_steps(); ++k) {
    const StateVector s = traj.state(k);
    const Eigen::VectorXd e = modal_energy(s);
    const double total = e.sum();
    const double share = total > 0.0 ? e.head(cutoff).sum() / total : 0.0;
    csv.row({traj.time(k), ps.dot(s.eta_dot()), us.dot(s.eta()), 0.5 * total, share});
  }
}

/// One row per term: J_bg, J_obs, J, then J_obs,i with its time.
inline void write_cost_csv(std::ostream& out, const CostBreakdown& cost,
                           const ObservationSet& obs, const Metadata& meta = {}) {
  CsvWriter csv(out, meta, {"term", "t", "value"});
  csv.row("J_bg", {0.0, cost.j_bg});
  csv.row("J_obs", {0.0, cost.j_obs});
  csv.row("J", {0.0, cost.total});
  for (std::size_t i = 0; i < cost.obs_terms.size(); ++i)
    csv.row("J_obs_" + std::to_string(i + 1), {obs.records[i].t, cost.obs_terms[i]});
}

inline void write_iterations_csv(std::ostream& out, const std::vector<IterationLog>& log,
                                 const Metadata& meta = {}) {
  CsvWriter csv(out, meta, {"iteration", "J", "J_bg", "J_obs", "grad_norm", "step"});
  for (const auto& it : log)
    csv.row({static_cast<double>(it.iteration), it.j, it.j_bg, it.j_obs, it.grad_norm, it.step});
}

inline void write_errors_csv(std::ostream& out, const TwinResult& r, const Metadata& meta = {}) {
  CsvWriter csv(out, meta, {"t", "bg_error", "analysis_error"});
  for (const auto& e : r.error_series) csv.row({e.t, e.bg_error, e.analysis_error});
}

inline void write_summary_csv(std::ostream& out, const TwinResult& r, const Metadata& meta = {}) {
  CsvWriter csv(out, meta, {"window", "rms_background", "rms_analysis"});
  csv.row("assimilation", {r.summary.assimilation.background, r.summary.assimilation.analysis});
  csv.row("forecast", {r.summary.forecast.background, r.summary.forecast.analysis});
}

/// One labelled row per initial state.
inline void write_states_csv(std::ostream& out, const std::vector<std::string>& labels,
                             const std::vector<const StateVector*>& states,
                             const Metadata& meta = {}) {
  std::vector<std::string> cols{"state"};
  for (auto& c : state_columns(states.front()->n_modes())) cols.push_back(std::move(c));
  CsvWriter csv(out, meta, cols);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& v = states[i]->values();
    csv.row(labels[i], std::vector<double>(v.data(), v.data() + v.size()));
  }
}

/// Reads observations: '#' lines skipped, one header row, then
/// `t,p` (kind a) or `t,y_1..y_N` (kind b) rows.
inline ObservationSet read_observations_csv(std::istream& in, ObservationKind kind, double x_m,
                                            int n_modes) {
  ObservationSet obs;
  obs.kind = kind;
  obs.x_m = x_m;
  const int expected = kind == ObservationKind::PressurePoint ? 1 : n_modes;
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError("observations line " + std::to_string(line_no) + ": bad number '" +
                          cell + "'");
      }
    }
    if (static_cast<int>(cells.size()) != expected + 1)
      throw ConfigError("observations line " + std::to_string(line_no) + ": expected " +
                        std::to_string(expected + 1) + " columns, got " +
                        std::to_string(cells.size()));
    ObservationRecord rec;
    rec.t = cells[0];
    rec.value = Eigen::Map<Eigen::VectorXd>(cells.data() + 1, expected);
    obs.records.push_back(std::move(rec));
  }
  if (obs.records.empty()) throw ConfigError("observation file contains no records");
  return obs;
}

inline void write_observations_csv(std::ostream& out, const ObservationSet& obs,
                                   const Metadata& meta = {}) {
  std::vector<std::string> cols{"t"};
  if (obs.kind == ObservationKind::PressurePoint) {
    cols.push_back("p");
  } else {
    for (Eigen::Index j = 1; j <= obs.records.front().value.size(); ++j)
      cols.push_back("eta_dot_" + std::to_string(j));
  }
  CsvWriter csv(out, meta, cols);
  for (const auto& rec : obs.records) {
    std::vector<double> row{rec.t};
    row.insert(row.end(), rec.value.data(), rec.value.data() + rec.value.size());
    csv.row(row);
  }
}

}  // namespace rijke4dvar::io
