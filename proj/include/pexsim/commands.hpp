#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pexsim/compare.hpp"
#include "pexsim/csv.hpp"
#include "pexsim/design.hpp"
#include "pexsim/errors.hpp"
#include "pexsim/gee.hpp"
#include "pexsim/lmm.hpp"
#include "pexsim/replicate.hpp"
#include "pexsim/report.hpp"
#include "pexsim/simulate.hpp"

namespace pexsim::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kNumericalError = 3, kIoError = 4 };

// Everything a subcommand needs, already resolved from flags, config file and environment.
struct RunConfig {
  std::string input;
  std::string out;
  std::string raw_out;
  bool days_column = false;

  std::uint64_t seed = 1;
  std::string scenario = "pe";
  int n_per_cohort = 100;
  int n_visits = 6;
  std::optional<std::vector<double>> pe_beta5, pe_beta6, pe_beta7;
  std::optional<double> sigma2, rho;

  std::string spec = "no-pe";
  std::string age_coding = "linear";
  std::string pe_coding = "visit";
  int pe_max_level = 5;
  std::string engine = "gee";
  std::string working = "exch";

  int reps = 100;
  unsigned threads = 0;
  double bin_width = 5.0;
  std::optional<double> bin_origin;

  void validate() const {
    if (reps < 1) throw InputError("--reps must be >= 1");
    if (!out.empty() && !input.empty() &&
        std::filesystem::weakly_canonical(out) == std::filesystem::weakly_canonical(input)) {
      throw InputError("output path equals input path: " + out);
    }
    if (!raw_out.empty() && raw_out == out) throw InputError("--raw-out must differ from --out");
  }

  SimulationConfig simulation() const {
    auto c = SimulationConfig::scenario(scenario);
    c.n_per_cohort = n_per_cohort;
    c.n_visits = n_visits;
    c.seed = seed;
    if (pe_beta5) c.pe_beta5 = *pe_beta5;
    if (pe_beta6) c.pe_beta6_dx = *pe_beta6;
    if (pe_beta7) c.pe_beta7_age = *pe_beta7;
    // Level vectors longer than the number of reassessments are truncated.
    for (auto* v : {&c.pe_beta5, &c.pe_beta6_dx, &c.pe_beta7_age}) {
      if (v->size() > static_cast<std::size_t>(std::max(n_visits - 1, 0))) v->resize(static_cast<std::size_t>(std::max(n_visits - 1, 0)));
    }
    if (sigma2) c.sigma2 = *sigma2;
    if (rho) c.rho = *rho;
    c.validate();
    return c;
  }

  ModelSpec model() const {
    auto m = ModelSpec::preset(spec);
    if (age_coding == "binned") {
      m.age_coding = AgeCoding::Binned;
    } else if (age_coding != "linear") {
      throw InputError("unknown --age-coding '" + age_coding + "' (expected linear|binned)");
    }
    if (pe_coding == "cumulative") {
      m.pe_coding = PeCoding::Cumulative;
    } else if (pe_coding != "visit") {
      throw InputError("unknown --pe-coding '" + pe_coding + "' (expected visit|cumulative)");
    }
    m.pe_max_level = pe_max_level;
    m.validate();
    return m;
  }

  Engine engine_kind() const {
    if (engine == "gee") return Engine::Gee;
    if (engine == "lmm") return Engine::Lmm;
    throw InputError("unknown --engine '" + engine + "' (expected lmm|gee)");
  }

  WorkingCorrelation working_kind() const {
    if (working == "exch") return WorkingCorrelation::Exchangeable;
    if (working == "ind") return WorkingCorrelation::Independence;
    throw InputError("unknown --working '" + working + "' (expected ind|exch)");
  }
};

inline LongitudinalDataset load_dataset(const RunConfig& rc, std::ostream& log) {
  if (rc.input.empty()) throw InputError("no input dataset given");
  auto data = validate_dataset(read_dataset_csv(rc.input, CsvReadOptions{rc.days_column}));
  if (!data.dropped_subjects().empty()) {
    log << "excluded " << data.dropped_subjects().size() << " subject(s) without a baseline visit\n";
  }
  return data;
}

inline int cmd_simulate(const RunConfig& rc, std::ostream& out) {
  rc.validate();
  if (rc.out.empty()) throw InputError("simulate: --out is required");
  const auto data = simulate_cohorts(rc.simulation());
  write_dataset_csv(rc.out, data);
  out << "simulated " << data.n_records() << " rows for " << data.n_subjects() << " subjects -> " << rc.out << '\n';
  return kOk;
}

inline int cmd_fit(const RunConfig& rc, std::ostream& out) {
  rc.validate();
  const auto data = load_dataset(rc, out);
  const auto spec = rc.model();
  CoefTable table;
  bool converged = true;
  if (rc.engine_kind() == Engine::Gee) {
    const auto fit = fit_gee(data, spec, rc.working_kind());
    table = make_table(fit, std::string("GEE (") + (rc.working_kind() == WorkingCorrelation::Exchangeable ? "exchangeable" : "independence") + ", spec " + rc.spec + ")");
    out << to_text(table);
    out << "clusters " << fit.n_clusters << ", observations " << fit.n_obs << ", working rho "
        << format_estimate(fit.working_rho, 5) << ", dispersion " << format_estimate(fit.dispersion, 6)
        << ", iterations " << fit.n_iter << '\n';
    for (const auto& w : fit.warnings) out << "warning: " << w << '\n';
    converged = fit.converged;
  } else {
    const auto fit = fit_lmm(data, spec);
    table = make_table(fit, "LMM (REML random intercept, spec " + rc.spec + ")");
    out << to_text(table);
    out << "subjects " << fit.n_subjects << ", observations " << fit.n_obs << ", sigma_b2 "
        << format_estimate(fit.sigma_b2, 6) << ", sigma_e2 " << format_estimate(fit.sigma_e2, 6) << ", ICC "
        << format_estimate(fit.icc, 4) << ", REML logLik " << format_estimate(fit.reml_loglik, 3) << '\n';
    converged = fit.converged;
  }
  if (!rc.out.empty()) write_text_file(rc.out, to_csv(table));
  if (!converged) {
    out << "error: fit did not converge\n";
    return kNumericalError;
  }
  return kOk;
}

inline int cmd_compare(const RunConfig& rc, std::ostream& out) {
  rc.validate();
  const auto data = load_dataset(rc, out);
  const auto report = run_comparison(data, rc.working_kind());
  out << comparison_text(report);
  if (!rc.out.empty()) {
    const std::filesystem::path dir(rc.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + rc.out + "': " + ec.message());
    write_text_file((dir / "comparison.txt").string(), comparison_text(report));
    write_text_file((dir / "comparison.csv").string(), comparison_csv(report));
    write_text_file((dir / "lme_vs_gee.svg").string(), engine_scatter_svg(report));
    write_text_file((dir / "with_vs_without_pe.svg").string(), pe_scatter_svg(report));
    write_text_file((dir / "outcome_by_age.svg").string(), trajectory_svg(report));
    out << "wrote report and figures to " << rc.out << '\n';
  }
  const bool all_ok = report.lmm_no_pe.ok && report.gee_no_pe.ok && report.lmm_pe.ok && report.gee_pe.ok;
  return all_ok ? kOk : kNumericalError;
}

inline int cmd_replicate(const RunConfig& rc, std::ostream& out) {
  rc.validate();
  if (rc.reps < 2) throw InputError("replicate: --reps must be >= 2");
  ReplicationPlan plan;
  plan.sim = rc.simulation();
  plan.model = rc.model();
  plan.engine = rc.engine_kind();
  plan.working = rc.working_kind();
  plan.n_reps = rc.reps;
  plan.first_seed = rc.seed;
  plan.threads = rc.threads;
  const auto res = run_replications(plan);
  const auto summary = summary_csv(res);
  if (rc.out.empty()) {
    out << summary;
  } else {
    write_text_file(rc.out, summary);
  }
  if (!rc.raw_out.empty()) write_text_file(rc.raw_out, replicates_csv(res));
  out << "replicates " << res.fits.size() << " (seeds " << rc.seed << ".." << rc.seed + res.fits.size() - 1
      << "), failed " << res.n_failed << '\n';
  return res.n_failed == 0 ? kOk : kNumericalError;
}

inline std::string aligned_pe_csv(const std::vector<AlignedPeRow>& rows) {
  std::string s = "bin_lower,bin_upper,pe_estimate,n_reassess,n_baseline\n";
  for (const auto& r : rows) {
    s += format_roundtrip(r.bin_lower) + ',' + format_roundtrip(r.bin_upper) + ',' +
         (r.pe_estimate ? format_estimate(*r.pe_estimate, 8, 6) : std::string("NA")) + ',' +
         std::to_string(r.n_reassess) + ',' + std::to_string(r.n_baseline) + '\n';
  }
  return s;
}

inline int cmd_align_pe(const RunConfig& rc, std::ostream& out) {
  rc.validate();
  const auto data = load_dataset(rc, out);
  const auto rows = aligned_pe_estimate(data, rc.bin_width, rc.bin_origin);
  const auto csv = aligned_pe_csv(rows);
  out << csv;
  if (!rc.out.empty()) write_text_file(rc.out, csv);
  return kOk;
}

// Maps library exceptions onto process exit codes.
template <class Fn>
int run_guarded(Fn fn, std::ostream& err) {
  try {
    return fn();
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  }
}

}  // namespace pexsim::cli
