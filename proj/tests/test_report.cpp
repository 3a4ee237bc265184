#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pexsim/commands.hpp"
#include "pexsim/pexsim.hpp"

using namespace pexsim;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("pexsim_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(CoefTable, GeeTextAndCsvRoundTrip) {
  const auto data = simulate_cohorts(SimulationConfig::no_pe());
  const auto fit = fit_gee(data, ModelSpec::preset("no-pe"));
  const auto table = make_table(fit, "GEE");
  ASSERT_EQ(table.rows.size(), 7u);
  for (const char* term : {"(Intercept)", "age_visit", "dx_bin", "educ", "gender", "race_lat", "dx_bin:t"}) {
    EXPECT_NE(table.find(term), nullptr) << term;
  }
  const auto text = to_text(table);
  EXPECT_NE(text.find("Std. Err"), std::string::npos);
  EXPECT_NE(text.find("Wald"), std::string::npos);
  EXPECT_NE(text.find("<2e-16"), std::string::npos);  // dx_bin

  std::istringstream in(to_csv(table));
  const auto back = parse_table_csv(in);
  ASSERT_EQ(back.rows.size(), table.rows.size());
  EXPECT_EQ(back.engine, Engine::Gee);
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].term, table.rows[i].term);
    EXPECT_NEAR(back.rows[i].estimate, table.rows[i].estimate, 5e-9);
    EXPECT_NEAR(back.rows[i].se, table.rows[i].se, 5e-9);
    if (table.rows[i].p >= 2e-16) EXPECT_NEAR(back.rows[i].p, table.rows[i].p, 5e-6);
  }
}

TEST(CoefTable, LmmHasDf) {
  const auto fit = fit_lmm(oracle::small_no_pe(20, 2), ModelSpec::preset("no-pe"));
  const auto table = make_table(fit);
  EXPECT_NE(to_text(table).find("DF"), std::string::npos);
  std::istringstream in(to_csv(table));
  const auto back = parse_table_csv(in);
  EXPECT_EQ(back.engine, Engine::Lmm);
  ASSERT_TRUE(back.rows[0].df);
  EXPECT_EQ(*back.rows[0].df, fit.df[0]);
}

TEST(CoefTable, ParseErrors) {
  std::istringstream empty("");
  EXPECT_THROW(parse_table_csv(empty), InputError);
  std::istringstream missing("term,estimate\nx,1\n");
  EXPECT_THROW(parse_table_csv(missing), InputError);
}

TEST(Replicate, GeneratingValues) {
  const auto sim = SimulationConfig::scenario("pe");
  const auto pe = ModelSpec::preset("pe");
  EXPECT_EQ(*generating_value(sim, pe, "prac1"), 0.2);
  EXPECT_EQ(*generating_value(sim, pe, "prac5"), 0.5);
  EXPECT_EQ(*generating_value(sim, pe, "dx_bin:t"), 0.013);
  auto cum = pe;
  cum.pe_coding = PeCoding::Cumulative;
  EXPECT_NEAR(*generating_value(sim, cum, "prac2plus"), 0.1, 1e-15);
  EXPECT_NEAR(*generating_value(sim, cum, "prac5plus"), 0.0, 1e-15);
  auto top = pe;
  top.pe_max_level = 3;  // pools visits 4..6 with levels 0.4, 0.5, 0.5
  EXPECT_FALSE(generating_value(sim, top, "prac3"));
  auto binned = ModelSpec::preset("no-pe");
  binned.age_coding = AgeCoding::Binned;
  EXPECT_FALSE(generating_value(sim, binned, "(Intercept)"));
}

TEST(Replicate, TwoReps) {
  ReplicationPlan plan;
  plan.sim = SimulationConfig::no_pe();
  plan.sim.n_per_cohort = 20;
  plan.model = ModelSpec::preset("no-pe");
  plan.n_reps = 2;
  plan.threads = 2;
  const auto res = run_replications(plan);
  ASSERT_EQ(res.fits.size(), 2u);
  EXPECT_EQ(res.n_failed, 0u);
  EXPECT_EQ(res.fits[0].seed, 1u);
  EXPECT_EQ(res.fits[1].seed, 2u);
  const auto raw = replicates_csv(res);
  EXPECT_EQ(count_lines(raw), 3u);
  EXPECT_EQ(raw.rfind("seed,ok,converged,(Intercept),(Intercept)_se", 0), 0u);
  const auto summary = summary_csv(res);
  EXPECT_EQ(count_lines(summary), 8u);

  // Thread count does not change results.
  plan.threads = 1;
  EXPECT_EQ(replicates_csv(run_replications(plan)), raw);
}

TEST(Compare, PeDataShowsMasking) {
  auto cfg = SimulationConfig::scenario("pe");
  cfg.seed = 3;
  const auto rep = run_comparison(simulate_cohorts(cfg));
  EXPECT_TRUE(rep.lmm_no_pe.ok && rep.gee_no_pe.ok && rep.lmm_pe.ok && rep.gee_pe.ok);
  ASSERT_TRUE(rep.age_slope_no_pe && rep.age_slope_with_pe);
  EXPECT_GT(*rep.age_slope_no_pe, *rep.age_slope_with_pe);
  EXPECT_LT(*rep.age_slope_with_pe, 0.0);
  EXPECT_TRUE(rep.masking);
  EXPECT_NE(rep.verdict.find("age slope no-PE > age slope with-PE"), std::string::npos) << rep.verdict;
  for (const auto& d : rep.pe_deltas) EXPECT_DOUBLE_EQ(d.delta, d.second - d.first);
}

TEST(Compare, NoPeDataNullShift) {
  auto cfg = SimulationConfig::no_pe();
  cfg.seed = 3;
  const auto rep = run_comparison(simulate_cohorts(cfg));
  ASSERT_TRUE(rep.age_slope_no_pe && rep.age_slope_with_pe);
  EXPECT_NEAR(*rep.age_slope_no_pe - *rep.age_slope_with_pe, 0.0, 0.003);
  ASSERT_TRUE(rep.max_engine_abs_diff);
  EXPECT_LT(*rep.max_engine_abs_diff, 0.01);
  EXPECT_EQ(rep.engine_deltas.size(), 7u);
}

TEST(Compare, SvgStructure) {
  const auto rep = run_comparison(oracle::small_no_pe(20, 4));
  const auto scatter = engine_scatter_svg(rep);
  EXPECT_EQ(scatter.rfind("<svg", 0), 0u);
  EXPECT_EQ(count_of(scatter, "<circle"), rep.engine_deltas.size());
  EXPECT_EQ(count_of(scatter, "class=\"diagonal\""), 1u);
  EXPECT_NE(scatter.find("<title>dx_bin</title>"), std::string::npos);

  // Axis ranges enclose every plotted value.
  std::smatch m;
  ASSERT_TRUE(std::regex_search(scatter, m, std::regex("class=\"x-ticks\" data-min=\"([^\"]+)\" data-max=\"([^\"]+)\"")));
  const double lo = std::stod(m[1]), hi = std::stod(m[2]);
  for (const auto& d : rep.engine_deltas) {
    EXPECT_LE(lo, d.first);
    EXPECT_GE(hi, d.first);
  }

  const auto traj = trajectory_svg(rep);
  EXPECT_GE(count_of(traj, "<polyline"), 2u);
  EXPECT_NE(traj.find("stroke-dasharray=\"6 4\""), std::string::npos);
  EXPECT_EQ(count_of(pe_scatter_svg(rep), "<circle"), rep.pe_deltas.size());
  EXPECT_EQ(svg::escape("a<b&\"c\""), "a&lt;b&amp;&quot;c&quot;");
}

TEST(Compare, NeedsThreeVisits) {
  auto cfg = SimulationConfig::no_pe();
  cfg.n_visits = 2;
  cfg.n_per_cohort = 5;
  EXPECT_THROW(run_comparison(simulate_cohorts(cfg)), InputError);
}

TEST(Commands, SimulateFiles) {
  TempDir tmp;
  cli::RunConfig rc;
  rc.out = tmp.file("a.csv");
  std::ostringstream log;
  EXPECT_EQ(cli::cmd_simulate(rc, log), cli::kOk);
  const auto a = slurp(rc.out);
  EXPECT_EQ(count_lines(a), 3001u);
  rc.out = tmp.file("b.csv");
  EXPECT_EQ(cli::cmd_simulate(rc, log), cli::kOk);
  EXPECT_EQ(slurp(rc.out), a);

  rc.n_per_cohort = 1;
  rc.out = tmp.file("c.csv");
  cli::cmd_simulate(rc, log);
  EXPECT_EQ(count_lines(slurp(rc.out)), 31u);

  rc.out.clear();
  EXPECT_EQ(cli::run_guarded([&] { return cli::cmd_simulate(rc, log); }, log), cli::kInputError);
}

TEST(Commands, FitTables) {
  TempDir tmp;
  cli::RunConfig rc;
  rc.scenario = "no-pe";
  rc.out = tmp.file("data.csv");
  std::ostringstream log;
  cli::cmd_simulate(rc, log);

  rc.input = rc.out;
  rc.out = tmp.file("gee.csv");
  std::ostringstream console;
  ASSERT_EQ(cli::cmd_fit(rc, console), cli::kOk);
  std::ifstream gee_in(rc.out);
  const auto gee = parse_table_csv(gee_in);
  EXPECT_EQ(gee.rows.size(), 7u);
  EXPECT_NE(console.str().find("working rho"), std::string::npos);

  rc.spec = "pe";
  rc.out = tmp.file("gee_pe.csv");
  ASSERT_EQ(cli::cmd_fit(rc, console), cli::kOk);
  std::ifstream pe_in(rc.out);
  const auto pe = parse_table_csv(pe_in);
  EXPECT_EQ(pe.rows.size(), 12u);
  for (int k = 1; k <= 5; ++k) {
    const auto* r = pe.find("prac" + std::to_string(k));
    ASSERT_NE(r, nullptr);
    EXPECT_LT(std::abs(r->estimate), 2.0 * r->se) << r->term;
  }

  rc.engine = "lmm";
  rc.spec = "no-pe";
  rc.out = tmp.file("lmm.csv");
  ASSERT_EQ(cli::cmd_fit(rc, console), cli::kOk);
  EXPECT_NE(console.str().find("ICC"), std::string::npos);

  rc.out = rc.input;
  EXPECT_EQ(cli::run_guarded([&] { return cli::cmd_fit(rc, console); }, console), cli::kInputError);
}

TEST(Commands, ErrorExitCodes) {
  TempDir tmp;
  std::ostringstream err;
  cli::RunConfig rc;
  rc.input = tmp.file("empty.csv");
  std::ofstream(rc.input).close();
  EXPECT_EQ(cli::run_guarded([&] { return cli::cmd_fit(rc, err); }, err), cli::kInputError);
  EXPECT_NE(err.str().find("schema mismatch"), std::string::npos);

  rc.input = tmp.file("missing.csv");
  EXPECT_EQ(cli::run_guarded([&] { return cli::cmd_fit(rc, err); }, err), cli::kIoError);

  rc.engine = "bogus";
  rc.input.clear();
  rc.out = tmp.file("x.csv");
  EXPECT_EQ(cli::run_guarded([&] { return cli::cmd_replicate(rc, err); }, err), cli::kInputError);
  rc.engine = "gee";
  rc.reps = 1;
  EXPECT_EQ(cli::run_guarded([&] { return cli::cmd_replicate(rc, err); }, err), cli::kInputError);
}

TEST(Commands, CompareWritesFigures) {
  TempDir tmp;
  cli::RunConfig rc;
  rc.n_per_cohort = 30;
  rc.out = tmp.file("pe.csv");
  std::ostringstream log;
  cli::cmd_simulate(rc, log);
  rc.input = rc.out;
  rc.out = tmp.file("report");
  std::ostringstream console;
  ASSERT_EQ(cli::cmd_compare(rc, console), cli::kOk);
  for (const char* f : {"comparison.txt", "comparison.csv", "lme_vs_gee.svg", "with_vs_without_pe.svg", "outcome_by_age.svg"}) {
    EXPECT_TRUE(fs::exists(fs::path(rc.out) / f)) << f;
  }
  EXPECT_NE(console.str().find("Masking:"), std::string::npos);
  const auto csv = slurp((fs::path(rc.out) / "comparison.csv").string());
  EXPECT_EQ(csv.rfind("kind,term,first,second,delta\n", 0), 0u);
}

TEST(Commands, ReplicateAndAlign) {
  TempDir tmp;
  cli::RunConfig rc;
  rc.scenario = "no-pe";
  rc.n_per_cohort = 10;
  rc.reps = 2;
  rc.out = tmp.file("summary.csv");
  rc.raw_out = tmp.file("raw.csv");
  std::ostringstream console;
  ASSERT_EQ(cli::cmd_replicate(rc, console), cli::kOk);
  EXPECT_EQ(count_lines(slurp(rc.raw_out)), 3u);
  EXPECT_EQ(slurp(rc.out).rfind("term,truth,n,mean_estimate,mean_bias,empirical_se,mean_se,coverage\n", 0), 0u);

  cli::RunConfig sim;
  sim.out = tmp.file("pe.csv");
  cli::cmd_simulate(sim, console);
  cli::RunConfig al;
  al.input = sim.out;
  al.bin_origin = 25.0;
  std::ostringstream out;
  ASSERT_EQ(cli::cmd_align_pe(al, out), cli::kOk);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "bin_lower,bin_upper,pe_estimate,n_reassess,n_baseline");
  int populated = 0;
  while (std::getline(lines, line)) {
    const auto f = detail::split_csv_line(line);
    ASSERT_EQ(f.size(), 5u);
    if (f[2] == "NA") continue;
    ++populated;
    EXPECT_NEAR(parse_double(f[2]), 0.2, 0.1);
  }
  EXPECT_GE(populated, 5);
}

TEST(RunConfig, Resolution) {
  cli::RunConfig rc;
  rc.n_visits = 3;
  const auto sim = rc.simulation();
  EXPECT_EQ(sim.pe_beta5.size(), 2u);
  rc.age_coding = "binned";
  rc.pe_coding = "cumulative";
  rc.spec = "pe";
  const auto m = rc.model();
  EXPECT_EQ(m.age_coding, AgeCoding::Binned);
  EXPECT_EQ(m.pe_coding, PeCoding::Cumulative);
  rc.age_coding = "cubic";
  EXPECT_THROW(rc.model(), InputError);
  rc.working = "ar1";
  EXPECT_THROW(rc.working_kind(), InputError);
}
