#include <catch2/catch_amalgamated.hpp>

#include <armadillo>
#include <cmath>

#include "bsve/prior.hpp"
#include "bsve/simulate.hpp"
#include "bsve/verification.hpp"

using namespace bsve;

namespace {

ModelSpec sim_spec(Family data_family, Family model_family, int N, int T0,
                   std::uint64_t seed, SimulationConfig base = {}) {
  base.N = N;
  base.p = 1;
  base.T0 = T0;
  base.family = data_family;
  auto [raw, truth] = simulate_data(base, seed);
  return make_model_spec(raw, 1, model_family,
                         family_is_regime(model_family) ? 2 : 0);
}

}  // namespace

TEST_CASE("simplex kernel mass reduces to the Dirichlet normalizer", "[sddr][oracle]") {
  using detail::log_simplex_kernel_mass;
  const auto log_beta_fn = [](const arma::vec& a) {
    double out = -std::lgamma(arma::accu(a));
    for (const double v : a) out += std::lgamma(v);
    return out;
  };
  CHECK(log_simplex_kernel_mass(arma::vec{1.0, 1.0}, arma::zeros(2), 1.0) ==
        Catch::Approx(0.0).margin(1e-8));
  const arma::vec a2 = {2.0, 3.5};
  CHECK(log_simplex_kernel_mass(a2, arma::zeros(2), 1.0) ==
        Catch::Approx(log_beta_fn(a2)).margin(1e-7));
  const arma::vec a3 = {2.0, 3.5, 1.2};
  CHECK(log_simplex_kernel_mass(a3, arma::zeros(3), 1.0) ==
        Catch::Approx(log_beta_fn(a3)).margin(1e-4));
  const arma::vec a4 = {1.5, 2.0, 2.5, 3.0};
  CHECK(log_simplex_kernel_mass(a4, arma::zeros(4), 1.0) ==
        Catch::Approx(log_beta_fn(a4)).margin(5e-3));
}

TEST_CASE("empty restriction set gives SDDR = 1", "[sddr]") {
  const ModelSpec spec = sim_spec(Family::homo, Family::homo, 2, 80, 3);
  const PosteriorDraws post = estimate(spec, 40, 5);
  const arma::mat S(0, 2 * spec.data.K());
  const SddrResult r = sddr_autoregression(post, S, arma::vec());
  CHECK(r.log_sddr == 0.0);
  CHECK(r.log_nse == 0.0);
}

TEST_CASE("restrictions on excluded elements are rejected", "[sddr]") {
  arma::arma_rng::set_seed(7);
  arma::mat raw(80, 2, arma::fill::randn);
  ModelSpec spec = make_model_spec(raw, 1, Family::homo);
  arma::mat amask(2, spec.data.K(), arma::fill::ones);
  amask(0, 1) = 0;
  spec.restrictions = restrictions_from_masks(
      arma::trimatl(arma::ones(2, 2)), amask);
  spec.prior = default_prior(spec.data, spec.restrictions, spec.unit_root);
  const PosteriorDraws post = estimate(spec, 30, 7);
  arma::mat H(2, spec.data.K(), arma::fill::value(arma::datum::nan));
  H(0, 1) = 0.0;  // targets the element the pattern already fixes to zero
  CHECK_THROWS_AS(sddr_autoregression(post, H), std::invalid_argument);
}

TEST_CASE("conjugate scalar model matches the analytic Savage-Dickey ratio",
          "[sddr][oracle]") {
  SimulationConfig cfg;
  cfg.N = 1;
  cfg.p = 1;
  cfg.T0 = 201;
  cfg.A = arma::mat{{0.45, 0.2}};
  cfg.B0 = arma::eye(1, 1);
  auto [raw, truth] = simulate_data(cfg, 11);
  ModelSpec spec = make_model_spec(raw, 1, Family::homo);

  // pin the shrinkage hierarchy (nearly) at gamma*: the analytic oracle below
  // conditions on exactly gamma*
  const double gamma_star = 0.5;
  spec.prior.nu_A = 4e6;
  spec.prior.a_A = 1e6;
  spec.prior.nu_sA = 1e6;
  spec.prior.s_sA = gamma_star * (spec.prior.nu_sA - 2.0) * (spec.prior.nu_A - 2.0) /
                    spec.prior.a_A;

  // draws: fixed B0 = 1, unit variances, gamma = gamma*
  PosteriorDraws post;
  post.spec = spec;
  detail::allocate_draws(post, spec, 50);
  ParameterState st = init_state(spec);
  st.B0 = arma::eye(1, 1);
  st.gamma_A.fill(gamma_star);
  for (int s = 0; s < 50; ++s) detail::store_draw(post, st, spec, s);
  post.last_state = st;
  post.rng_state = Rng(1).serialize();

  const double r0 = 0.3;  // hypothesis: first own lag equals 0.3
  arma::mat H(1, 2, arma::fill::value(arma::datum::nan));
  H(0, 0) = r0;
  const SddrResult got = sddr_autoregression(post, H, 99);

  // analytic conjugate posterior for the full coefficient vector
  const arma::mat& X = spec.data.X;
  const arma::mat& Y = spec.data.Y;
  const arma::vec prior_mean = spec.prior.A_mean.col(0);
  const arma::vec prior_prec = 1.0 / (gamma_star * spec.prior.A_scale_diag);
  arma::mat P = X * X.t();
  P.diag() += prior_prec;
  const arma::vec rhs = prior_prec % prior_mean + X * Y.row(0).t();
  const arma::mat cov = arma::inv_sympd(P);
  const arma::vec mu = cov * rhs;
  const double log_post = log_normal_pdf(r0, mu(0), cov(0, 0));
  const double log_prior =
      log_normal_pdf(r0, prior_mean(0), gamma_star * spec.prior.A_scale_diag(0));
  const double want = log_post - log_prior;
  CHECK(std::abs(got.log_sddr - want) < 0.02 * std::max(1.0, std::abs(want)));
}

TEST_CASE("prior-only SDDRs equal one within three numerical standard errors",
          "[sddr][calibration]") {
  SECTION("autoregression") {
    const ModelSpec spec = sim_spec(Family::homo, Family::homo, 2, 60, 13);
    const PosteriorDraws prior = make_prior_draws(spec, 4000, 17);
    arma::mat H(2, spec.data.K(), arma::fill::value(arma::datum::nan));
    H(0, 0) = 0.5;
    H(1, 2) = 0.0;
    const SddrResult r = sddr_autoregression(prior, H, 21);
    INFO("log sddr " << r.log_sddr << " nse " << r.log_nse);
    CHECK(std::abs(r.log_sddr) <= 3.0 * r.log_nse + 1e-3);
  }
  SECTION("sv identification") {
    const ModelSpec spec = sim_spec(Family::homo, Family::sv, 2, 60, 19);
    const PosteriorDraws prior = make_prior_draws(spec, 4000, 23);
    const SddrResult r = sddr_identification_sv(prior, 0, 29);
    INFO("log sddr " << r.log_sddr << " nse " << r.log_nse);
    CHECK(std::abs(r.log_sddr) <= 3.0 * r.log_nse + 1e-3);
  }
  SECTION("regime identification") {
    const ModelSpec spec = sim_spec(Family::msh, Family::msh, 2, 60, 31);
    const PosteriorDraws prior = make_prior_draws(spec, 2000, 37);
    const SddrResult r = sddr_identification_regimes(prior, 1);
    INFO("log sddr " << r.log_sddr << " nse " << r.log_nse);
    CHECK(std::abs(r.log_sddr) <= 3.0 * r.log_nse + 1e-3);
  }
  SECTION("student-t identification") {
    const ModelSpec spec = sim_spec(Family::student_t, Family::student_t, 2, 60, 41);
    const PosteriorDraws prior = make_prior_draws(spec, 4000, 43);
    const SddrResult r = sddr_identification_t(prior, 0);
    INFO("log sddr " << r.log_sddr << " nse " << r.log_nse);
    CHECK(std::abs(r.log_sddr) <= 3.0 * r.log_nse + 0.05);
  }
}

TEST_CASE("ordinates stay finite and errors shrink on nested subsamples", "[sddr]") {
  SimulationConfig cfg;
  cfg.N = 2;
  cfg.p = 1;
  cfg.T0 = 301;
  cfg.family = Family::sv;
  auto [raw, truth] = simulate_data(cfg, 71);
  ModelSpec spec = make_model_spec(raw, 1, Family::sv);
  const PosteriorDraws post = estimate(estimate(spec, 200, 7), 2000);
  PosteriorDraws head = post;
  head.A = post.A.slices(0, 499);
  head.B = post.B.slices(0, 499);
  head.h = post.h.slices(0, 499);
  head.gamma_A = post.gamma_A.cols(0, 499);
  head.s_An = post.s_An.cols(0, 499);
  head.s_A = post.s_A.cols(0, 499);
  head.gamma_B = post.gamma_B.cols(0, 499);
  head.s_Bn = post.s_Bn.cols(0, 499);
  head.s_B = post.s_B.cols(0, 499);
  head.sv_rho = post.sv_rho.cols(0, 499);
  head.sv_omega = post.sv_omega.cols(0, 499);
  head.sv_sigma2_omega = post.sv_sigma2_omega.cols(0, 499);
  head.sv_sigma_v2 = post.sv_sigma_v2.cols(0, 499);
  head.sv_s_sigma = post.sv_s_sigma.cols(0, 499);
  head.sv_s_v = post.sv_s_v.cols(0, 499);
  const SddrResult small = sddr_identification_sv(head, 0, 3);
  const SddrResult big = sddr_identification_sv(post, 0, 3);
  CHECK(std::isfinite(small.log_sddr));
  CHECK(std::isfinite(small.log_posterior_ordinate));
  CHECK(std::isfinite(big.log_sddr));
  // four times the draws should roughly halve the numerical standard error
  INFO("nse at 500 draws " << small.log_nse << ", at 2000 draws " << big.log_nse);
  CHECK(big.log_nse < small.log_nse);
}

TEST_CASE("guards of the identification tests", "[sddr]") {
  const ModelSpec centred = sim_spec(Family::sv_centred, Family::sv_centred, 2, 60, 47);
  const PosteriorDraws post = estimate(centred, 30, 11);
  CHECK_THROWS_AS(sddr_identification_sv(post, 0), std::invalid_argument);

  const ModelSpec tspec = sim_spec(Family::student_t, Family::student_t, 2, 80, 53);
  const PosteriorDraws tiny = estimate(tspec, 100, 13);
  CHECK_THROWS_AS(sddr_identification_t(tiny, 0), std::invalid_argument);

  const ModelSpec homo = sim_spec(Family::homo, Family::homo, 2, 60, 59);
  const PosteriorDraws hpost = estimate(homo, 30, 17);
  CHECK_THROWS_AS(verify_identification(hpost), std::invalid_argument);
}

TEST_CASE("direction checks on one replication per design", "[sddr][slow]") {
  SECTION("autoregression: true restriction attracts support") {
    SimulationConfig cfg;
    cfg.N = 2;
    cfg.p = 1;
    cfg.T0 = 1001;
    cfg.A = arma::mat{{0.5, 0.0, 0.1}, {0.2, 0.4, -0.1}};  // A(0,1) = 0 true
    auto [raw, truth] = simulate_data(cfg, 61);
    ModelSpec spec = make_model_spec(raw, 1, Family::homo);
    const PosteriorDraws burn = estimate(spec, 300, 19);
    const PosteriorDraws post = estimate(burn, 800);
    arma::mat H(2, spec.data.K(), arma::fill::value(arma::datum::nan));
    H(0, 1) = 0.0;
    const SddrResult r = sddr_autoregression(post, H);
    INFO("log sddr " << r.log_sddr);
    CHECK(r.log_sddr > 0.0);
  }
  SECTION("sv: homoskedastic data favor the restriction, strong sv rejects it") {
    const ModelSpec homo_data = sim_spec(Family::homo, Family::sv, 2, 401, 67);
    const PosteriorDraws post1 = estimate(estimate(homo_data, 400, 23), 800);
    const SddrResult r1 = sddr_identification_sv(post1, 0, 71);
    INFO("homoskedastic data: log sddr " << r1.log_sddr);
    CHECK(r1.log_sddr > 0.0);

    SimulationConfig cfg;
    cfg.omega = arma::vec{1.0, 1.0};
    cfg.rho = arma::vec{0.95, 0.95};
    const ModelSpec sv_data = sim_spec(Family::sv, Family::sv, 2, 401, 73, cfg);
    const PosteriorDraws post2 = estimate(estimate(sv_data, 400, 29), 800);
    const SddrResult r2 = sddr_identification_sv(post2, 0, 79);
    INFO("sv data: log sddr " << r2.log_sddr);
    CHECK(r2.log_sddr < 0.0);
  }
  SECTION("regimes: homoskedastic vs strongly separated two-regime data") {
    const ModelSpec homo_data = sim_spec(Family::homo, Family::msh, 2, 301, 83);
    const PosteriorDraws post1 = estimate(estimate(homo_data, 400, 31), 800);
    const SddrResult r1 = sddr_identification_regimes(post1, 0);
    INFO("homoskedastic data: log sddr " << r1.log_sddr);
    CHECK(r1.log_sddr > 0.0);

    SimulationConfig cfg;
    cfg.sigma2_regime = {{1.0, 16.0}, {1.0, 16.0}};
    cfg.P = {{0.9, 0.1}, {0.1, 0.9}};
    const ModelSpec msh_data = sim_spec(Family::msh, Family::msh, 2, 301, 89, cfg);
    const PosteriorDraws post2 = estimate(estimate(msh_data, 400, 37), 800);
    const SddrResult r2 = sddr_identification_regimes(post2, 0);
    INFO("two-regime data: log sddr " << r2.log_sddr);
    CHECK(r2.log_sddr < 0.0);
  }
  SECTION("student-t: normal data favor normality, fat tails reject it") {
    const ModelSpec normal_data = sim_spec(Family::homo, Family::student_t, 2, 2001, 97);
    const PosteriorDraws post1 = estimate(estimate(normal_data, 300, 41), 800);
    const SddrResult r1 = sddr_identification_t(post1, 0);
    INFO("normal data: log sddr " << r1.log_sddr);
    CHECK(r1.log_sddr > 0.0);

    SimulationConfig cfg;
    cfg.nu = arma::vec{4.0, 4.0};
    const ModelSpec t_data = sim_spec(Family::student_t, Family::student_t, 2, 2001, 101, cfg);
    const PosteriorDraws post2 = estimate(estimate(t_data, 300, 43), 800);
    const SddrResult r2 = sddr_identification_t(post2, 0);
    INFO("t(4) data: log sddr " << r2.log_sddr);
    CHECK(r2.log_sddr < 0.0);
  }
}

TEST_CASE("identification verdict aggregates per-shock tests", "[sddr][slow]") {
  SimulationConfig cfg;
  cfg.omega = arma::vec{1.2, 1.2};
  cfg.rho = arma::vec{0.95, 0.95};
  const ModelSpec spec = sim_spec(Family::sv, Family::sv, 2, 401, 103, cfg);
  const PosteriorDraws post = estimate(estimate(spec, 400, 47), 800);
  const IdentificationVerdict v = verify_identification(post, 107);
  REQUIRE(v.shocks.size() == 2);
  CHECK(v.globally_identified == (v.n_favoring_restriction <= 1));
}
