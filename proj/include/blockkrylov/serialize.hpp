#pragma once

// CSV and JSON emission for solver histories, bound reports, and experiment
// tables. All CSV output is UTF-8 with LF line endings and %.17g doubles so
// identical runs serialize byte-identically.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockkrylov/krylov.hpp"
#include "blockkrylov/theory.hpp"

namespace blockkrylov {

using nlohmann::json;

inline std::string history_to_csv(const ConvergenceHistory& h) {
  std::ostringstream os;
  os << "iter,resnorm,factor\n";
  const auto factors = h.convergence_factors();
  for (std::size_t i = 0; i < h.residual_norms.size(); ++i) {
    os << i << ',' << detail::fmt_double(h.residual_norms[i]) << ',';
    if (i > 0) os << detail::fmt_double(factors[i - 1]);
    os << '\n';
  }
  return os.str();
}

inline json history_to_json(const ConvergenceHistory& h) {
  json j;
  j["iterations"] = h.iterations;
  j["converged"] = h.converged;
  j["diverged"] = h.diverged;
  j["degraded"] = h.degraded;
  j["residual_norms"] = h.residual_norms;
  j["convergence_factors"] = h.convergence_factors();
  if (!h.residual_norms.empty() && h.residual_norms.front() > 0.0)
    j["final_relative_residual"] = h.residual_norms.back() / h.residual_norms.front();
  return j;
}

inline json bound_report_to_json(const BoundReport& r) {
  json j;
  j["id"] = r.id;
  j["problem"] = r.problem;
  j["spec"] = r.spec;
  j["seed"] = r.seed;
  j["side"] = r.side == Side::Left ? "left" : "right";
  j["slack"] = r.slack;
  j["slack_mode"] = r.multiplicative_slack ? "multiplicative" : "additive-relative";
  j["lower_asserted"] = r.lower_asserted;
  if (!r.lower_asserted) j["schur_faster_observed"] = r.schur_faster_observed;
  j["all_pass"] = r.all_pass();
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"degree", row.degree},
                    {"lower", row.lower},
                    {"middle", row.middle},
                    {"upper", row.upper},
                    {"scale", row.scale},
                    {"pass", row.pass}});
  }
  j["rows"] = rows;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);  // binary: keep LF endings everywhere
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << content;
}

}  // namespace blockkrylov
