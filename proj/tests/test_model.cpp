#include <catch2/catch_amalgamated.hpp>

#include <armadillo>

#include "bsve/model.hpp"
#include "bsve/simulate.hpp"

using namespace bsve;

TEST_CASE("build_design_matrices shapes and alignment", "[model]") {
  // N=3, T0=10, p=1, constant only
  arma::mat raw(10, 3);
  for (arma::uword t = 0; t < 10; ++t)
    for (arma::uword n = 0; n < 3; ++n) raw(t, n) = 10.0 * t + n;
  const TimeSeriesData d = build_design_matrices(raw, 1);
  CHECK(d.Y.n_rows == 3);
  CHECK(d.Y.n_cols == 9);
  CHECK(d.X.n_rows == 4);
  CHECK(d.X.n_cols == 9);
  CHECK(d.D == 1);
  // column t of X holds [y_{t-1}; 1]
  for (int t = 0; t < d.T; ++t) {
    CHECK(arma::approx_equal(d.X.col(t).subvec(0, 2), raw.row(t).t(), "absdiff", 0.0));
    CHECK(d.X(3, t) == 1.0);
    CHECK(arma::approx_equal(d.Y.col(t), raw.row(t + 1).t(), "absdiff", 0.0));
  }
}

TEST_CASE("build_design_matrices rejects bad input", "[model]") {
  arma::mat raw(10, 2, arma::fill::randn);
  CHECK_THROWS_WITH(build_design_matrices(raw, 0), Catch::Matchers::ContainsSubstring("lag order"));
  raw(3, 1) = arma::datum::nan;
  CHECK_THROWS_AS(build_design_matrices(raw, 1), std::invalid_argument);
  arma::mat tiny(4, 3, arma::fill::randn);
  CHECK_THROWS_AS(build_design_matrices(tiny, 1), std::invalid_argument);
}

TEST_CASE("round trip: un-lagging the design recovers the raw series", "[model]") {
  arma::arma_rng::set_seed(1);
  arma::mat raw(40, 2, arma::fill::randn);
  for (int p : {1, 3}) {
    const TimeSeriesData d = build_design_matrices(raw, p);
    arma::mat rebuilt(raw.n_rows, raw.n_cols);
    rebuilt.rows(0, p - 1) = raw.rows(0, p - 1);
    for (int t = 0; t < d.T; ++t) rebuilt.row(p + t) = d.Y.col(t).t();
    CHECK(arma::approx_equal(rebuilt, raw, "absdiff", 0.0));
    // lag-1 block of X equals the previous dependent column
    for (int t = 1; t < d.T; ++t)
      CHECK(arma::approx_equal(d.X.col(t).subvec(0, d.N - 1), d.Y.col(t - 1), "absdiff", 0.0));
  }
}

TEST_CASE("deterministic terms: constant first, exogenous appended", "[model]") {
  arma::mat raw(30, 2, arma::fill::randn);
  arma::mat exog(1, 30);
  for (int t = 0; t < 30; ++t) exog(0, t) = std::sin(0.2 * t);
  const TimeSeriesData d = build_design_matrices(raw, 2, exog);
  CHECK(d.D == 2);
  CHECK(arma::all(d.X.row(d.N * d.p) == 1.0));
  for (int t = 0; t < d.T; ++t) CHECK(d.X(d.N * d.p + 1, t) == exog(0, t + d.p));
  // a supplied constant row is not duplicated
  arma::mat with_const = arma::join_vert(arma::ones<arma::rowvec>(30), exog);
  const TimeSeriesData d2 = build_design_matrices(raw, 2, with_const);
  CHECK(d2.D == 2);
}

TEST_CASE("default restrictions give a lower-triangular structural pattern", "[model]") {
  const RestrictionPattern r = default_restrictions(3, 4);
  CHECK(r.VB(0).n_rows == 1);
  CHECK(r.VB(1).n_rows == 2);
  CHECK(r.VB(2).n_rows == 3);
  for (int n = 0; n < 3; ++n) {
    const arma::mat vvt = r.VB(n) * r.VB(n).t();
    CHECK(arma::approx_equal(vvt, arma::eye(n + 1, n + 1), "absdiff", 0.0));
    CHECK(arma::approx_equal(r.VA(n), arma::eye(4, 4), "absdiff", 0.0));
  }
  const RestrictionPattern r1 = default_restrictions(1, 2);
  CHECK(r1.VB(0).n_rows == 1);
  CHECK(r1.VB(0)(0, 0) == 1.0);
}

TEST_CASE("minnesota defaults", "[model]") {
  SECTION("scale decays with the squared lag, deterministic terms get 100") {
    auto [mean, scale] = minnesota_prior_defaults(2, 2, 1, arma::uvec{1, 1});
    const arma::vec want = {1.0, 1.0, 0.25, 0.25, 100.0};
    CHECK(arma::approx_equal(scale, want, "absdiff", 1e-15));
    CHECK(mean(0, 0) == 1.0);
    CHECK(mean(1, 1) == 1.0);
    CHECK(arma::accu(arma::abs(mean)) == 2.0);
  }
  SECTION("stationary flags zero the mean") {
    auto [mean, scale] = minnesota_prior_defaults(3, 1, 1, arma::uvec{0, 0, 0});
    CHECK(arma::accu(arma::abs(mean)) == 0.0);
  }
  SECTION("lag decay holds up to p = 12") {
    auto [mean, scale] = minnesota_prior_defaults(2, 12, 1, arma::uvec{1, 1});
    for (int l = 1; l <= 12; ++l)
      for (int k = 0; k < 2; ++k)
        CHECK(scale((l - 1) * 2 + k) == Catch::Approx(1.0 / (l * l)).margin(1e-15));
  }
}

TEST_CASE("validate_specification enforces the invariants", "[model]") {
  arma::arma_rng::set_seed(2);
  arma::mat raw(60, 2, arma::fill::randn);
  ModelSpec spec = make_model_spec(raw, 1, Family::homo);
  CHECK_NOTHROW(validate_specification(spec));

  SECTION("shape bound on the structural prior") {
    spec.prior.nu_B = spec.data.N - 1.0;
    CHECK_THROWS_WITH(validate_specification(spec),
                      Catch::Matchers::ContainsSubstring("nu_B >= N"));
  }
  SECTION("selection rows with two unit entries are rejected") {
    spec.restrictions.VB(1)(0, 0) = 1.0;
    spec.restrictions.VB(1)(0, 1) = 1.0;
    CHECK_THROWS_AS(validate_specification(spec), std::invalid_argument);
  }
  SECTION("regime families need M >= 2") {
    spec.family = Family::msh;
    spec.M = 1;
    CHECK_THROWS_AS(validate_specification(spec), std::invalid_argument);
  }
  SECTION("M rejected for non-regime families") {
    spec.M = 2;
    CHECK_THROWS_AS(validate_specification(spec), std::invalid_argument);
  }
}

TEST_CASE("restriction reconstruction reproduces the requested zero pattern", "[model]") {
  arma::arma_rng::set_seed(3);
  arma::mat raw(80, 3, arma::fill::randn);
  arma::mat bmask = {{1, 0, 0}, {1, 1, 0}, {0, 1, 1}};
  arma::mat amask(3, 4, arma::fill::ones);
  amask(0, 1) = 0;  // exclude one lag coefficient
  ModelSpec spec = make_model_spec(raw, 1, Family::homo);
  spec.restrictions = restrictions_from_masks(bmask, amask);
  spec.prior = default_prior(spec.data, spec.restrictions, spec.unit_root);
  CHECK_NOTHROW(validate_specification(spec));
  // free elements placed through V land exactly on the mask support
  for (int n = 0; n < 3; ++n) {
    const arma::uvec ib = RestrictionPattern::selected(spec.restrictions.VB(n));
    arma::rowvec b(ib.n_elem, arma::fill::ones);
    arma::rowvec row = b * spec.restrictions.VB(n);
    for (int j = 0; j < 3; ++j) CHECK((row(j) != 0.0) == (bmask(n, j) != 0.0));
  }
  const arma::uvec ia = RestrictionPattern::selected(spec.restrictions.VA(0));
  CHECK(ia.n_elem == 3);
  CHECK(arma::all(ia != 1));
}

TEST_CASE("simulate_data basics", "[model][simulate]") {
  SECTION("same seed reproduces the sample") {
    SimulationConfig cfg;
    cfg.N = 2;
    cfg.T0 = 50;
    auto [raw1, t1] = simulate_data(cfg, 9);
    auto [raw2, t2] = simulate_data(cfg, 9);
    CHECK(arma::approx_equal(raw1, raw2, "absdiff", 0.0));
  }
  SECTION("white noise covariance converges to identity") {
    SimulationConfig cfg;
    cfg.N = 2;
    cfg.p = 1;
    cfg.T0 = 100001;
    cfg.A = arma::mat(2, 3, arma::fill::zeros);
    cfg.B0 = arma::eye(2, 2);
    auto [raw, truth] = simulate_data(cfg, 4);
    const arma::mat cov = arma::cov(raw.rows(1, 100000));
    const double se = 3.0 / std::sqrt(100000.0);
    CHECK(cov(0, 0) == Catch::Approx(1.0).margin(se));
    CHECK(cov(1, 1) == Catch::Approx(1.0).margin(se));
    CHECK(cov(0, 1) == Catch::Approx(0.0).margin(se));
  }
  SECTION("explosive systems are refused without the override") {
    SimulationConfig cfg;
    cfg.N = 1;
    cfg.T0 = 30;
    cfg.A = arma::mat{{1.05, 0.0}};
    CHECK_THROWS_AS(simulate_data(cfg, 1), std::invalid_argument);
    cfg.allow_explosive = true;
    CHECK_NOTHROW(simulate_data(cfg, 1));
  }
  SECTION("sv shocks show excess kurtosis") {
    SimulationConfig cfg;
    cfg.N = 1;
    cfg.T0 = 40001;
    cfg.family = Family::sv;
    cfg.A = arma::mat{{0.0, 0.0}};
    cfg.B0 = arma::eye(1, 1);
    cfg.rho = arma::vec{0.95};
    cfg.omega = arma::vec{0.8};
    auto [raw, truth] = simulate_data(cfg, 12);
    const arma::vec u = truth.shocks.row(0).t();
    const double m2 = arma::mean(arma::square(u));
    const double m4 = arma::mean(arma::square(arma::square(u)));
    CHECK(m4 / (m2 * m2) > 3.5);
  }
}

TEST_CASE("init_state satisfies the state invariants", "[model]") {
  arma::arma_rng::set_seed(4);
  arma::mat raw(60, 2, arma::fill::randn);
  for (Family f : {Family::homo, Family::sv, Family::sv_centred, Family::msh,
                   Family::msh_sparse, Family::mix, Family::mix_sparse, Family::student_t}) {
    const ModelSpec spec = make_model_spec(raw, 1, f, family_is_regime(f) ? 3 : 0);
    const ParameterState st = init_state(spec);
    CHECK_NOTHROW(validate_state(st, spec));
  }
}
