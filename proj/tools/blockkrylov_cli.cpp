// Batch front-end: solve a block system with a chosen preconditioner, run the
// named verification suites, or run the named experiments. Outputs are CSV
// and JSON artifacts; identical (config, seed) pairs write identical bytes.
//
// Exit codes: 0 success, 1 invalid configuration or unknown name,
// 2 non-convergence under --strict, 3 failed verification bound.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "blockkrylov/blockkrylov.hpp"

using namespace blockkrylov;
using nlohmann::json;

namespace {

struct Defaults {
  double tol = 1e-8;
  std::size_t maxiter = 500;
  std::uint64_t seed = kDefaultSeed;
  std::string method = "gmres";
  std::string side = "left";
  std::size_t jobs = 1;
  std::size_t oseen_m = 24;
};

std::uint64_t env_seed_or(std::uint64_t fallback) {
  if (const char* env = std::getenv("BLOCKKRYLOV_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw std::invalid_argument("BLOCKKRYLOV_SEED is not an integer");
    }
  }
  return fallback;
}

// The config file mirrors the flag names; flags given on the command line
// win because file values only replace the built-in defaults.
Defaults load_defaults(int argc, char** argv) {
  Defaults d;
  d.seed = env_seed_or(d.seed);
  std::string path;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") path = argv[i + 1];
  if (path.empty()) return d;
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file: " + path);
  json j;
  is >> j;
  if (j.contains("tol")) d.tol = j["tol"].get<double>();
  if (j.contains("maxiter")) d.maxiter = j["maxiter"].get<std::size_t>();
  if (j.contains("seed")) d.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("method")) d.method = j["method"].get<std::string>();
  if (j.contains("side")) d.side = j["side"].get<std::string>();
  if (j.contains("jobs")) d.jobs = j["jobs"].get<std::size_t>();
  if (j.contains("m")) d.oseen_m = j["m"].get<std::size_t>();
  return d;
}

Problem load_problem(const std::string& problem_spec, const std::string& system_stem,
                     const std::string& matrix_file, std::size_t n1, std::uint64_t seed) {
  if (!problem_spec.empty()) return generate(ProblemSpec::parse(problem_spec), seed);
  if (!system_stem.empty()) {
    Problem p;
    p.id = system_stem;
    p.system = load_block_system(system_stem);
    Rng rng(seed ^ 0xF00DULL);
    p.rhs = rng.normal_vector(p.system->size());
    p.rhs *= 1.0 / norm2(p.rhs);
    return p;
  }
  if (!matrix_file.empty()) {
    if (n1 == 0) throw std::invalid_argument("--matrix requires --n1 split index");
    Problem p;
    p.id = matrix_file;
    p.system = split_monolithic(read_matrix_market(matrix_file), n1);
    Rng rng(seed ^ 0xF00DULL);
    p.rhs = rng.normal_vector(p.system->size());
    p.rhs *= 1.0 / norm2(p.rhs);
    return p;
  }
  throw std::invalid_argument("no problem given: use --problem, --system, or --matrix");
}

std::optional<PreconditionerSpec> resolve_precond(const std::string& text,
                                                  const BlockSystem2x2& sys) {
  if (text.empty()) return std::nullopt;
  PreconditionerSpec spec = PreconditionerSpec::parse(text);
  if (spec.schur_kind == SchurApproxKind::UserMatrix && !spec.user_matrix) {
    if (spec.user_source == "diag") {
      const Matrix s = sys.schur_complement(spec.schur_block);
      Matrix d(s.rows(), s.cols());
      for (std::size_t i = 0; i < s.rows(); ++i) d(i, i) = s(i, i);
      spec.user_matrix = std::move(d);
    } else {
      spec.user_matrix = read_matrix_market(spec.user_source);
    }
  }
  return spec;
}

int run_solve(const Defaults& dft, const std::string& problem_spec,
              const std::string& system_stem, const std::string& matrix_file, std::size_t n1,
              const std::string& precond_text, const std::string& method,
              const std::string& side_name, double tol, std::size_t maxiter,
              std::size_t restart, std::uint64_t seed, const std::string& out_prefix,
              const std::string& dump_stem, bool strict) {
  (void)dft;
  const Problem problem = load_problem(problem_spec, system_stem, matrix_file, n1, seed);
  if (method == "cg" && !problem_spec.empty() &&
      problem_spec.rfind("spd", 0) != 0 && problem_spec.rfind("example11", 0) != 0)
    throw std::invalid_argument("cg requires a symmetric positive definite problem kind");

  if (!dump_stem.empty()) {
    if (problem.system) dump_block_system(dump_stem, *problem.system);
    else write_matrix_market(dump_stem + ".mtx", *problem.monolithic);
    std::ofstream os(dump_stem + ".rhs.mtx");
    Matrix rhs_col(problem.rhs.size(), 1);
    rhs_col.set_col(0, problem.rhs);
    write_matrix_market(os, rhs_col);
  }

  KrylovConfig cfg;
  cfg.rel_tol = tol;
  cfg.max_iter = maxiter;
  if (restart > 0) cfg.restart = restart;
  cfg.side = side_name == "right" ? Side::Right : Side::Left;

  std::optional<PreconditionerSpec> pspec;
  std::optional<Preconditioner> precond;
  if (problem.system) {
    pspec = resolve_precond(precond_text, *problem.system);
    if (pspec) precond = build_preconditioner(*problem.system, *pspec);
  } else if (!precond_text.empty()) {
    throw std::invalid_argument("preconditioners require a block-structured problem");
  }
  if (pspec && pspec->inner == InnerSolveKind::Iterative && method != "fgmres")
    throw std::invalid_argument("iterative inner solves require --method fgmres");

  const Matrix a = problem.matrix();
  const Vector x0(problem.size());
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult res;
  const std::size_t degraded_before = precond ? precond->degraded_count() : 0;
  if (method == "gmres") {
    if (precond) res = gmres(a, *precond, problem.rhs, x0, cfg);
    else res = gmres(a, problem.rhs, x0, cfg);
  } else if (method == "fgmres") {
    if (!precond) throw std::invalid_argument("fgmres requires --precond");
    res = fgmres(a, *precond, problem.rhs, x0, cfg);
  } else if (method == "cg") {
    cfg.method = Method::Cg;
    cfg.side = Side::Left;
    if (precond) res = cg(a, &*precond, problem.rhs, x0, cfg);
    else res = cg<Matrix, detail::IdentityPrecond>(a, nullptr, problem.rhs, x0, cfg);
  } else if (method == "fixed-point") {
    if (precond) res = fixed_point(a, *precond, problem.rhs, x0, cfg);
    else res = fixed_point(a, detail::IdentityPrecond{problem.size()}, problem.rhs, x0, cfg);
  } else {
    throw std::invalid_argument("unknown method: " + method);
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (precond) res.history.degraded = precond->degraded_count() > degraded_before;

  json summary;
  summary["problem"] = problem.id;
  summary["method"] = method;
  summary["preconditioner"] = pspec ? pspec->to_string() : "none";
  summary["seed"] = seed;
  summary["iterations"] = res.history.iterations;
  summary["converged"] = res.history.converged;
  summary["final_relative_residual"] =
      res.history.initial() > 0 ? res.history.final_norm() / res.history.initial() : 0.0;
  summary["wall_seconds"] = wall;
  summary["history"] = history_to_json(res.history);

  if (!out_prefix.empty()) {
    write_text_file(out_prefix + ".csv", history_to_csv(res.history));
    write_text_file(out_prefix + ".json", summary.dump(2) + "\n");
  } else {
    std::cout << summary.dump(2) << "\n";
  }
  if (strict && !res.history.converged) return 2;
  return 0;
}

int run_verify(const std::string& suite, std::uint64_t seed, std::size_t samples,
               std::size_t systems, std::size_t residuals, const std::string& out_path) {
  VerifyOptions opt;
  opt.suite = suite;
  opt.seed = seed;
  opt.samples = samples;
  opt.systems = systems;
  opt.residuals = residuals;
  const VerifyOutcome outcome = run_verify_suite(opt);

  json j;
  j["suite"] = suite;
  j["seed"] = seed;
  j["all_pass"] = outcome.all_pass();
  json reports = json::array();
  std::size_t failed = 0;
  for (const auto& r : outcome.reports) {
    if (!r.all_pass()) ++failed;
    reports.push_back(bound_report_to_json(r));
  }
  j["reports"] = reports;
  if (!out_path.empty()) write_text_file(out_path, j.dump(2) + "\n");

  std::cout << "suite " << suite << ": " << outcome.reports.size() - failed << "/"
            << outcome.reports.size() << " reports pass\n";
  return outcome.all_pass() ? 0 : 3;
}

int run_experiment(const std::string& name, const std::string& out_dir, std::size_t jobs,
                   std::size_t m, double global_tol, std::size_t maxiter) {
  auto path = [&](const std::string& file) {
    return out_dir.empty() ? file : out_dir + "/" + file;
  };

  if (name == "example11") {
    write_text_file(path("example11.csv"), curves_to_csv(tridiagonal_pair_curves(500), "problem"));
  } else if (name == "nilpotent") {
    write_text_file(path("nilpotent.csv"), curves_to_csv(nilpotent_curves({50, 100}), "run"));
  } else if (name == "oseen-sweep") {
    const OseenStudy study = prepare_oseen_study({.m = m});
    const std::vector<Family> families{Family::LowerTriangular, Family::UpperTriangular,
                                       Family::SymTriLowerUpper, Family::SymTriUpperLower,
                                       Family::BlockDiagonal, Family::BlockLdu};
    const std::vector<double> inner_tols{1e-12, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2, 1e-1};
    const auto rows = oseen_report(study, families, inner_tols, global_tol, maxiter, jobs);
    write_text_file(path("oseen_sweep.csv"), experiment_rows_to_csv(rows));
  } else if (name == "sign-study") {
    const OseenStudy study = prepare_oseen_study({.m = m});
    const std::vector<Family> families{Family::BlockDiagonal, Family::LowerTriangular,
                                       Family::UpperTriangular};
    const std::vector<double> inner_tols{0.0, 1e-8, 1e-4, 1e-2, 1e-1};
    const auto rows = sign_study(study, families, inner_tols, global_tol, maxiter, jobs);
    write_text_file(path("sign_study.csv"), sign_study_to_csv(rows));
  } else if (name == "staircase") {
    const OseenStudy study = prepare_oseen_study({.m = m});
    write_text_file(path("staircase.csv"),
                    curves_to_csv(staircase_curves(study, global_tol, maxiter), "run"));
  } else {
    throw std::invalid_argument("unknown experiment: " + name);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const Defaults dft = load_defaults(argc, argv);

    CLI::App app{"2x2 block preconditioning toolkit: solvers, verification suites, experiments"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file of default option values (flags win)");

    // --- solve ---
    auto* solve = app.add_subcommand("solve", "solve one system and emit its history");
    std::string problem_spec, system_stem, matrix_file, precond_text, out_prefix, dump_stem;
    std::string method = dft.method, side = dft.side;
    std::size_t n1 = 0, restart = 0;
    double tol = dft.tol;
    std::size_t maxiter = dft.maxiter;
    std::uint64_t seed = dft.seed;
    bool strict = false;
    solve->add_option("--problem", problem_spec,
                      "problem spec, e.g. example11-a2 | nilpotent:n=100 | "
                      "random:n1=10,n2=6,seed=3 | saddle:... | spd:... | oseen:m=24");
    solve->add_option("--system", system_stem, "stem of <stem>.a11.mtx .. <stem>.a22.mtx files");
    solve->add_option("--matrix", matrix_file, "monolithic Matrix Market file");
    solve->add_option("--n1", n1, "split index for --matrix");
    solve->add_option("--precond", precond_text,
                      "preconditioner spec, e.g. LT:22:exact | BD:jacobi | "
                      "LDU:22:user=shat.mtx:inner=1e-4:neg | LT:22:user-diag");
    solve->add_option("--method", method, "gmres | fgmres | cg | fixed-point (default gmres)");
    solve->add_option("--side", side, "left | right preconditioning (default left)");
    solve->add_option("--tol", tol, "relative residual tolerance (default 1e-8)");
    solve->add_option("--maxiter", maxiter, "maximum iterations (default 500)");
    solve->add_option("--restart", restart, "GMRES restart length (default none)");
    solve->add_option("--seed", seed, "PRNG seed (default BLOCKKRYLOV_SEED or built-in)");
    solve->add_option("--out", out_prefix, "write <out>.csv and <out>.json");
    solve->add_option("--dump", dump_stem, "write the problem blocks as Matrix Market files");
    solve->add_flag("--strict", strict, "exit 2 when the solver does not converge");

    // --- verify ---
    auto* verify = app.add_subcommand("verify", "run a named verification suite");
    std::string suite = "all", verify_out;
    std::size_t samples = 200, systems = 0, residuals = 3;
    std::uint64_t vseed = dft.seed;
    verify->add_option("--suite", suite,
                       "prop21 | prop22 | closedforms | remark23 | thm31 | thm32 | thm33 | "
                       "thm34 | thm35 | all");
    verify->add_option("--seed", vseed, "PRNG seed");
    verify->add_option("--samples", samples, "sampled residuals for estimated norms (default 200)");
    verify->add_option("--systems", systems, "number of seeded systems (0 = suite default)");
    verify->add_option("--residuals", residuals, "residual/error vectors per system (default 3)");
    verify->add_option("--out", verify_out, "write the full JSON report here");

    // --- experiment ---
    auto* experiment = app.add_subcommand("experiment", "run a named experiment");
    std::string exp_name, exp_out;
    std::size_t jobs = dft.jobs, exp_m = dft.oseen_m, exp_maxiter = 600;
    double exp_tol = 1e-8;
    experiment->add_option("name", exp_name,
                           "example11 | nilpotent | oseen-sweep | sign-study | staircase")
        ->required();
    experiment->add_option("--out", exp_out, "output directory (default: current)");
    experiment->add_option("--jobs", jobs, "worker threads for sweeps (default 1)");
    experiment->add_option("--m", exp_m, "Oseen grid size (default 24)");
    experiment->add_option("--global-tol", exp_tol, "outer relative tolerance (default 1e-8)");
    experiment->add_option("--maxiter", exp_maxiter, "outer iteration cap (default 600)");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 1;
    }

    if (solve->parsed())
      return run_solve(dft, problem_spec, system_stem, matrix_file, n1, precond_text, method,
                       side, tol, maxiter, restart, seed, out_prefix, dump_stem, strict);
    if (verify->parsed())
      return run_verify(suite, vseed, samples, systems, residuals, verify_out);
    if (experiment->parsed())
      return run_experiment(exp_name, exp_out, jobs, exp_m, exp_tol, exp_maxiter);
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
