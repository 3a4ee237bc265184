#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pexsim/commands.hpp"

namespace {

using pexsim::cli::RunConfig;

void optional_list(CLI::App& app, const std::string& name, std::optional<std::vector<double>>& target,
                   const std::string& help) {
  app.add_option_function<std::vector<double>>(
         name, [&target](const std::vector<double>& v) { target = v; }, help)
      ->delimiter(',');
}

template <class T>
void optional_value(CLI::App& app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app.add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pexsim: practice-effect simulation and estimation for longitudinal cognitive data"};
  app.set_config("--config", "", "Read key=value options from a file; command-line flags take precedence");
  app.require_subcommand(1);

  RunConfig rc;
  app.add_option("--seed", rc.seed, "Random seed (first seed for replicate)")->envname("PEXSIM_SEED");
  app.add_option("--out", rc.out, "Output path (file, or directory for compare)");
  app.add_option("--raw-out", rc.raw_out, "replicate: per-seed estimates CSV");
  app.add_flag("--days-column", rc.days_column, "Input has days_since_baseline instead of visit_index/years");

  app.add_option("--scenario", rc.scenario, "Simulation scenario")
      ->check(CLI::IsMember({"no-pe", "pe", "pe-by-dx", "pe-by-age"}));
  app.add_option("--n-per-cohort", rc.n_per_cohort, "Subjects per baseline-age cohort");
  app.add_option("--n-visits", rc.n_visits, "Visits per subject, one year apart");
  optional_list(app, "--pe-beta5", rc.pe_beta5, "PE level per reassessment, comma separated");
  optional_list(app, "--pe-beta6", rc.pe_beta6, "Extra PE for SZ per reassessment");
  optional_list(app, "--pe-beta7", rc.pe_beta7, "PE change per year of age per reassessment");
  optional_value<double>(app, "--sigma2", rc.sigma2, "Total residual variance");
  optional_value<double>(app, "--rho", rc.rho, "Within-subject correlation");

  app.add_option("--spec", rc.spec, "Mean model")->check(CLI::IsMember({"no-pe", "pe", "pe-by-dx", "pe-by-age"}));
  app.add_option("--age-coding", rc.age_coding, "Age term")->check(CLI::IsMember({"linear", "binned"}));
  app.add_option("--pe-coding", rc.pe_coding, "PE indicators")->check(CLI::IsMember({"visit", "cumulative"}));
  app.add_option("--pe-max-level", rc.pe_max_level, "Number of PE columns (last one top-coded)");
  app.add_option("--engine", rc.engine, "Estimator")->check(CLI::IsMember({"lmm", "gee"}));
  app.add_option("--working", rc.working, "GEE working correlation")->check(CLI::IsMember({"ind", "exch"}));
  app.add_option("--reps", rc.reps, "Number of replications");
  app.add_option("--threads", rc.threads, "Worker threads for replicate (0 = all cores)");
  app.add_option("--bin-width", rc.bin_width, "align-pe: age bin width in years");
  optional_value<double>(app, "--bin-origin", rc.bin_origin, "align-pe: lower edge of the first bin");

  auto* simulate = app.add_subcommand("simulate", "Simulate a multi-cohort dataset and write it as CSV")->fallthrough();
  auto* fit = app.add_subcommand("fit", "Fit one model and print its coefficient table")->fallthrough();
  auto* compare = app.add_subcommand("compare", "LMM/GEE x with/without PE battery, masking verdict, SVG figures")
                      ->fallthrough();
  auto* replicate = app.add_subcommand("replicate", "Monte Carlo bias / SE / coverage summary")->fallthrough();
  auto* align = app.add_subcommand("align-pe", "First-reassessment PE by age bin")->fallthrough();
  for (auto* sub : {fit, compare, align}) sub->add_option("input", rc.input, "Dataset CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pexsim::cli::kInputError;
  }

  return pexsim::cli::run_guarded(
      [&] {
        if (*simulate) return pexsim::cli::cmd_simulate(rc, std::cout);
        if (*fit) return pexsim::cli::cmd_fit(rc, std::cout);
        if (*compare) return pexsim::cli::cmd_compare(rc, std::cout);
        if (*replicate) return pexsim::cli::cmd_replicate(rc, std::cout);
        return pexsim::cli::cmd_align_pe(rc, std::cout);
      },
      std::cerr);
}
