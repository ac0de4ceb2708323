#include <catch2/catch_amalgamated.hpp>

#include <armadillo>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "bsve/analysis.hpp"
#include "bsve/gibbs.hpp"
#include "bsve/io.hpp"
#include "bsve/simulate.hpp"

using namespace bsve;
namespace fs = std::filesystem;

namespace {

std::string cli() {
  const char* p = std::getenv("BSVE_CLI");
  REQUIRE(p != nullptr);
  return p;
}

int run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

int exit_code(int system_status) { return WEXITSTATUS(system_status); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("bsve_test_" + std::to_string(Rng(std::random_device{}()).raw()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

PosteriorDraws sample_run(Family family, std::uint64_t seed, int S = 40) {
  SimulationConfig cfg;
  cfg.N = 2;
  cfg.p = 1;
  cfg.T0 = 61;
  cfg.family = family;
  auto [raw, truth] = simulate_data(cfg, seed);
  const ModelSpec spec =
      make_model_spec(raw, 1, family, family_is_regime(family) ? 2 : 0);
  return estimate(spec, S, seed + 1);
}

}  // namespace

TEST_CASE("csv round trip is exact", "[io]") {
  TempDir tmp;
  arma::arma_rng::set_seed(3);
  arma::mat m(17, 3, arma::fill::randn);
  m(0, 0) = 1.0 / 3.0;
  m(1, 1) = 1e-308;
  m(2, 2) = -123456789.123456789;
  write_csv(tmp / "m.csv", m, {"a", "b", "c"});
  std::vector<std::string> heads;
  const arma::mat back = read_csv_matrix(tmp / "m.csv", &heads);
  REQUIRE(heads == std::vector<std::string>{"a", "b", "c"});
  CHECK(arma::approx_equal(back, m, "absdiff", 0.0));  // %.17g round-trips doubles

  // re-parsed values match the in-memory matrix far below 1e-12
  CHECK(arma::abs(back - m).max() <= 1e-12 * std::max(1.0, arma::abs(m).max()));
}

TEST_CASE("csv error paths", "[io]") {
  TempDir tmp;
  CHECK_THROWS_AS(read_csv_matrix(tmp / "missing.csv"), std::invalid_argument);
  {
    std::ofstream out(tmp / "bad.csv");
    out << "a,b\n1,2\n3\n";
  }
  CHECK_THROWS_AS(read_csv_matrix(tmp / "bad.csv"), std::invalid_argument);
  {
    std::ofstream out(tmp / "hole.csv");
    out << "a,b\n1,\n";
  }
  CHECK_THROWS_AS(read_csv_matrix(tmp / "hole.csv"), std::invalid_argument);
  const arma::mat with_nan = read_csv_matrix(tmp / "hole.csv", nullptr, true);
  CHECK(std::isnan(with_nan(0, 1)));
}

TEST_CASE("draw container round trip is bit exact for every family", "[io]") {
  TempDir tmp;
  int idx = 0;
  for (Family f : {Family::homo, Family::sv, Family::sv_centred, Family::msh,
                   Family::mix_sparse, Family::student_t}) {
    const PosteriorDraws post = sample_run(f, 100 + idx);
    const std::string p1 = tmp / ("draws" + std::to_string(idx) + ".bsve");
    const std::string p2 = tmp / ("again" + std::to_string(idx) + ".bsve");
    write_draws_file(p1, post);
    const DrawsFile file = read_draws_file(p1);
    REQUIRE(file.chains.size() == 1);
    const PosteriorDraws& back = file.chains[0];
    CHECK(arma::approx_equal(back.A, post.A, "absdiff", 0.0));
    CHECK(arma::approx_equal(back.B, post.B, "absdiff", 0.0));
    CHECK(back.rng_state == post.rng_state);
    CHECK(back.seed == post.seed);
    // write-after-read reproduces the byte stream
    write_draws_file(p2, back);
    CHECK(slurp(p1) == slurp(p2));
    // continuation from the file matches continuation from memory
    const PosteriorDraws cont_mem = estimate(post, 10);
    const PosteriorDraws cont_file = estimate(back, 10);
    CHECK(arma::approx_equal(cont_mem.A, cont_file.A, "absdiff", 0.0));
    ++idx;
  }
}

TEST_CASE("append adds chain segments without rewriting", "[io]") {
  TempDir tmp;
  const PosteriorDraws a = sample_run(Family::homo, 7, 30);
  const std::string path = tmp / "draws.bsve";
  write_draws_file(path, a);
  const PosteriorDraws b = estimate(a, 20);
  append_draws_chunks(path, {b});
  const DrawsFile file = read_draws_file(path);
  REQUIRE(file.chains.size() == 1);
  CHECK(file.chains[0].n_draws() == 50);
  CHECK(arma::approx_equal(file.chains[0].A.slice(30), b.A.slice(0), "absdiff", 0.0));
  CHECK(file.chains[0].rng_state == b.rng_state);
}

TEST_CASE("bad draw files are rejected", "[io]") {
  TempDir tmp;
  {
    std::ofstream out(tmp / "junk.bsve", std::ios::binary);
    out << "NOTBSVE_WHATSOEVER";
  }
  CHECK_THROWS_AS(read_draws_file(tmp / "junk.bsve"), std::invalid_argument);
  // a truncated but well-prefixed file errors instead of misreading
  const PosteriorDraws post = sample_run(Family::homo, 5, 10);
  write_draws_file(tmp / "full.bsve", post);
  const std::string bytes = slurp(tmp / "full.bsve");
  {
    std::ofstream out(tmp / "cut.bsve", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(read_draws_file(tmp / "cut.bsve"), std::invalid_argument);
}

TEST_CASE("cli: simulate then estimate is deterministic byte for byte", "[cli]") {
  TempDir tmp;
  REQUIRE(exit_code(run(cli() + " simulate --family homo --vars 2 --obs 121 --seed 5 --output " +
                        (tmp / "sim"))) == 0);
  const std::string base = cli() + " estimate --data " + (tmp / "sim/data.csv") +
                           " --lags 1 --family homo --burn 50 --draws 120 --seed 9 --quiet";
  REQUIRE(exit_code(run(base + " --output " + (tmp / "a"))) == 0);
  REQUIRE(exit_code(run(base + " --output " + (tmp / "b"))) == 0);
  CHECK(slurp(tmp / "a/draws.bsve") == slurp(tmp / "b/draws.bsve"));
  CHECK(slurp(tmp / "a/estimate_summary.csv") == slurp(tmp / "b/estimate_summary.csv"));

  // post-estimation outputs are deterministic too
  for (const std::string sub : {"irf", "fevd", "shocks"}) {
    REQUIRE(exit_code(run(cli() + " compute " + sub + " --draws-file " + (tmp / "a/draws.bsve") +
                          " --horizon 3 --output " + (tmp / ("qa_" + sub)))) == 0);
    REQUIRE(exit_code(run(cli() + " compute " + sub + " --draws-file " + (tmp / "a/draws.bsve") +
                          " --horizon 3 --output " + (tmp / ("qb_" + sub)))) == 0);
    CHECK(slurp(tmp / ("qa_" + sub) + "/" + sub + "_summary.csv") ==
          slurp(tmp / ("qb_" + sub) + "/" + sub + "_summary.csv"));
  }
  REQUIRE(exit_code(run(cli() + " forecast --draws-file " + (tmp / "a/draws.bsve") +
                        " --horizon 3 --seed 2 --output " + (tmp / "f1"))) == 0);
  REQUIRE(exit_code(run(cli() + " forecast --draws-file " + (tmp / "a/draws.bsve") +
                        " --horizon 3 --seed 2 --output " + (tmp / "f2"))) == 0);
  CHECK(slurp(tmp / "f1/forecast_summary.csv") == slurp(tmp / "f2/forecast_summary.csv"));
}

TEST_CASE("cli: two-step workflow mirrors burn-in continuation", "[cli]") {
  TempDir tmp;
  REQUIRE(exit_code(run(cli() + " simulate --family homo --vars 2 --obs 121 --seed 6 --output " +
                        (tmp / "sim"))) == 0);
  // one-call burn+retain
  REQUIRE(exit_code(run(cli() + " estimate --data " + (tmp / "sim/data.csv") +
                        " --family homo --burn 40 --draws 80 --seed 11 --quiet --output " +
                        (tmp / "joint"))) == 0);
  // explicit two-step: burn-only run, then continue
  REQUIRE(exit_code(run(cli() + " estimate --data " + (tmp / "sim/data.csv") +
                        " --family homo --burn 0 --draws 40 --seed 11 --quiet --output " +
                        (tmp / "burn"))) == 0);
  REQUIRE(exit_code(run(cli() + " estimate --continue-from " + (tmp / "burn/draws.bsve") +
                        " --draws 80 --quiet --output " + (tmp / "cont"))) == 0);
  const DrawsFile joint = read_draws_file(tmp / "joint/draws.bsve");
  const DrawsFile cont = read_draws_file(tmp / "cont/draws.bsve");
  REQUIRE(joint.chains[0].n_draws() == 80);
  REQUIRE(cont.chains[0].n_draws() == 80);
  // burn-only run used normalise=false in the joint path; raw chains align
  CHECK(arma::approx_equal(joint.chains[0].gamma_A, cont.chains[0].gamma_A, "absdiff", 0.0));

  // --append extends the stored file in place
  REQUIRE(exit_code(run(cli() + " estimate --continue-from " + (tmp / "cont/draws.bsve") +
                        " --draws 30 --append --quiet --output " + (tmp / "cont"))) == 0);
  CHECK(read_draws_file(tmp / "cont/draws.bsve").chains[0].n_draws() == 110);
}

TEST_CASE("cli: multi-chain estimation merges draws", "[cli]") {
  TempDir tmp;
  REQUIRE(exit_code(run(cli() + " simulate --family homo --vars 2 --obs 121 --seed 8 --output " +
                        (tmp / "sim"))) == 0);
  REQUIRE(exit_code(run(cli() + " estimate --data " + (tmp / "sim/data.csv") +
                        " --family homo --burn 20 --draws 50 --seed 13 --chains 3 --quiet"
                        " --output " + (tmp / "mc"))) == 0);
  const DrawsFile file = read_draws_file(tmp / "mc/draws.bsve");
  REQUIRE(file.chains.size() == 3);
  CHECK(file.merged().n_draws() == 150);
  // distinct chains draw distinct sequences
  CHECK_FALSE(arma::approx_equal(file.chains[0].A, file.chains[1].A, "absdiff", 1e-12));
  // parallel execution does not break byte-level determinism
  REQUIRE(exit_code(run(cli() + " estimate --data " + (tmp / "sim/data.csv") +
                        " --family homo --burn 20 --draws 50 --seed 13 --chains 3 --quiet"
                        " --output " + (tmp / "mc2"))) == 0);
  CHECK(slurp(tmp / "mc/draws.bsve") == slurp(tmp / "mc2/draws.bsve"));
}

TEST_CASE("cli: conditional forecast honors the projection file", "[cli]") {
  TempDir tmp;
  REQUIRE(exit_code(run(cli() + " simulate --family homo --vars 2 --obs 121 --seed 10"
                        " --output " + (tmp / "sim"))) == 0);
  REQUIRE(exit_code(run(cli() + " estimate --data " + (tmp / "sim/data.csv") +
                        " --family homo --burn 30 --draws 60 --seed 15 --quiet --output " +
                        (tmp / "est"))) == 0);
  {
    std::ofstream cond(tmp / "cond.csv");
    cond << "y1,y2\n0.25,\n,\n";  // pin y1 one step ahead, everything else free
  }
  REQUIRE(exit_code(run(cli() + " forecast --draws-file " + (tmp / "est/draws.bsve") +
                        " --horizon 2 --conditional " + (tmp / "cond.csv") +
                        " --seed 4 --output " + (tmp / "fc"))) == 0);
  // the pinned entry is exact in the summary: all quantiles equal 0.25
  std::ifstream in(tmp / "fc/forecast_summary.csv");
  std::string line;
  std::getline(in, line);
  bool found = false;
  while (std::getline(in, line)) {
    const auto cells = split_csv_line(line);
    if (cells[0] == "y1" && cells[1] == "1") {
      CHECK(std::stod(cells[2]) == 0.25);
      CHECK(std::stod(cells[3]) == 0.25);
      CHECK(std::stod(cells[4]) == 0.25);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("cli: exit codes distinguish usage and numerical failures", "[cli]") {
  TempDir tmp;
  // missing data file -> 1
  CHECK(exit_code(run(cli() + " estimate --data " + (tmp / "nope.csv") +
                      " --family homo --quiet --output " + (tmp / "x"))) == 1);
  // unknown subcommand -> CLI usage error
  CHECK(exit_code(run(cli() + " frobnicate")) != 0);
  // unknown family -> 1
  REQUIRE(exit_code(run(cli() + " simulate --family homo --vars 2 --obs 61 --seed 2 --output " +
                        (tmp / "sim"))) == 0);
  CHECK(exit_code(run(cli() + " estimate --data " + (tmp / "sim/data.csv") +
                      " --family banana --quiet --output " + (tmp / "x"))) == 1);
  // restrictions forcing a singular structural matrix -> numerical failure (2)
  {
    std::ofstream bmask(tmp / "bmask.csv");
    bmask << "c1,c2\n1,0\n1,0\n";
  }
  CHECK(exit_code(run(cli() + " estimate --data " + (tmp / "sim/data.csv") +
                      " --family homo --burn 0 --draws 5 --restrictions " +
                      (tmp / "bmask.csv") + " --quiet --output " + (tmp / "x"))) == 2);
}

TEST_CASE("cli: config file supplies defaults, flags override", "[cli]") {
  TempDir tmp;
  REQUIRE(exit_code(run(cli() + " simulate --family homo --vars 2 --obs 121 --seed 3 --output " +
                        (tmp / "sim"))) == 0);
  {
    std::ofstream cfg(tmp / "run.cfg");
    cfg << "# estimation configuration\n"
        << "[estimate]\n"
        << "data=" << (tmp / "sim/data.csv") << "\n"
        << "family=homo\n"
        << "burn=20\n"
        << "draws=40\n"
        << "seed=21\n"
        << "quiet=true\n";
  }
  REQUIRE(exit_code(run(cli() + " --config " + (tmp / "run.cfg") + " estimate --output " +
                        (tmp / "c1"))) == 0);
  const DrawsFile f1 = read_draws_file(tmp / "c1/draws.bsve");
  CHECK(f1.chains[0].n_draws() == 40);
  // command line wins over the file
  REQUIRE(exit_code(run(cli() + " --config " + (tmp / "run.cfg") + " estimate --draws 25 " +
                        "--output " + (tmp / "c2"))) == 0);
  CHECK(read_draws_file(tmp / "c2/draws.bsve").chains[0].n_draws() == 25);
}

TEST_CASE("cli: geweke subcommand reports and gates", "[cli][slow]") {
  TempDir tmp;
  REQUIRE(exit_code(run(cli() + " geweke --family homo --sweeps 8000 --prior-draws 8000"
                        " --seed 5 --output " + (tmp / "g"))) == 0);
  CHECK(fs::exists(tmp / "g/geweke_report.csv"));
  // an injected fault must be detected (exit 3 = ran and rejected)
  CHECK(exit_code(run(cli() + " geweke --family homo --sweeps 8000 --prior-draws 8000"
                      " --seed 5 --corrupt-gamma 0.5 --output " + (tmp / "gbad"))) == 3);
}
