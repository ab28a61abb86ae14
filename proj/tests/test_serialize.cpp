#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "blockkrylov/dense/rng.hpp"
#include "blockkrylov/experiments.hpp"
#include "blockkrylov/problems.hpp"
#include "blockkrylov/serialize.hpp"
#include "blockkrylov/verify.hpp"

using namespace blockkrylov;

TEST_CASE("history CSV has the documented header and is byte-stable") {
  const BlockSystem2x2 sys = random_block(8, 6, 3);
  Rng rng(1);
  const Vector b = rng.normal_vector(sys.size());
  KrylovConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.max_iter = 10;

  const SolveResult r1 = gmres(sys.assemble(), b, Vector(sys.size()), cfg);
  const SolveResult r2 = gmres(sys.assemble(), b, Vector(sys.size()), cfg);
  const std::string csv1 = history_to_csv(r1.history);
  const std::string csv2 = history_to_csv(r2.history);
  CHECK(csv1 == csv2);
  CHECK(csv1.rfind("iter,resnorm,factor\n", 0) == 0);
  CHECK(csv1.find("\r") == std::string::npos);

  const json j = history_to_json(r1.history);
  CHECK(j["residual_norms"].size() == r1.history.residual_norms.size());
  CHECK(j.contains("converged"));
}

TEST_CASE("bound reports serialize with full provenance") {
  VerifyOptions opt;
  opt.systems = 1;
  const VerifyOutcome out = suite_closed_forms(opt);
  REQUIRE(!out.reports.empty());
  const json j = bound_report_to_json(out.reports.front());
  CHECK(j.contains("seed"));
  CHECK(j.contains("problem"));
  CHECK(j.contains("spec"));
  CHECK(j.contains("slack"));
  CHECK(j["rows"].size() == out.reports.front().rows.size());
  for (const auto& row : j["rows"]) {
    CHECK(row.contains("degree"));
    CHECK(row.contains("lower"));
    CHECK(row.contains("middle"));
    CHECK(row.contains("upper"));
    CHECK(row.contains("pass"));
  }
}

TEST_CASE("experiment tables carry the fixed header") {
  std::vector<ExperimentRow> rows{{"LT", 1e-8, 1e-8, 12, true}, {"BD", 0.0, 1e-8, 25, true}};
  const std::string csv = experiment_rows_to_csv(rows);
  CHECK(csv.rfind("family,inner_tol,global_tol,iters,converged\n", 0) == 0);
  CHECK(csv.find("LT,1e-08,1e-08,12,1\n") != std::string::npos);
  CHECK(csv.find("BD,0,") != std::string::npos);
}

TEST_CASE("identical run configurations produce byte-identical experiment CSV") {
  const std::vector<CurvePoint> c1 = nilpotent_curves({12});
  const std::vector<CurvePoint> c2 = nilpotent_curves({12});
  CHECK(curves_to_csv(c1, "run") == curves_to_csv(c2, "run"));
}
