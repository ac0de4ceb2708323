#include <catch2/catch_amalgamated.hpp>

#include <armadillo>
#include <cmath>

#include "bsve/geweke.hpp"
#include "bsve/prior.hpp"
#include "bsve/simulate.hpp"
#include "bsve/volatility.hpp"
#include "support/oracles.hpp"

using namespace bsve;

TEST_CASE("ffbs degenerate cases", "[regimes]") {
  Rng rng(3);
  SECTION("single regime gives a constant path with unit probabilities") {
    const arma::mat le(1, 6, arma::fill::value(-1.3));
    arma::mat filtered, smoothed;
    const arma::uvec path = ffbs_states(le, arma::zeros(1, 1), arma::zeros(1), rng,
                                        &filtered, &smoothed);
    CHECK(arma::all(path == 0));
    CHECK(arma::approx_equal(filtered, arma::ones(1, 6), "absdiff", 1e-14));
    CHECK(arma::approx_equal(smoothed, arma::ones(1, 6), "absdiff", 1e-14));
  }
  SECTION("symmetric inputs give uniform smoothed probabilities") {
    const int M = 3, T = 5;
    const arma::mat le(M, T, arma::fill::value(-0.7));
    const arma::mat log_P(M, M, arma::fill::value(std::log(1.0 / M)));
    const arma::vec log_pi0(M, arma::fill::value(std::log(1.0 / M)));
    arma::mat filtered, smoothed;
    ffbs_states(le, log_P, log_pi0, rng, &filtered, &smoothed);
    CHECK(arma::abs(smoothed - 1.0 / M).max() < 1e-12);
    CHECK(arma::abs(filtered - 1.0 / M).max() < 1e-12);
  }
  SECTION("vanishing emission column is reported") {
    arma::mat le(2, 3, arma::fill::value(-0.5));
    le.col(1).fill(-arma::datum::inf);
    CHECK_THROWS_AS(ffbs_states(le, arma::mat(2, 2, arma::fill::value(std::log(0.5))),
                                arma::vec(2, arma::fill::value(std::log(0.5))), rng),
                    numerical_error);
  }
}

TEST_CASE("ffbs matches brute-force path enumeration at T=4, M=2", "[regimes][oracle]") {
  const int M = 2, T = 4;
  arma::mat le = {{-0.2, -1.7, -0.4, -2.2}, {-1.1, -0.3, -0.9, -0.25}};
  arma::mat P = {{0.85, 0.15}, {0.35, 0.65}};
  arma::vec pi0 = {0.6, 0.4};

  arma::vec exact(16, arma::fill::zeros);
  arma::mat smooth_exact(M, T, arma::fill::zeros);
  for (int code = 0; code < 16; ++code) {
    int s[4];
    for (int t = 0; t < 4; ++t) s[t] = (code >> t) & 1;
    double lp = std::log(pi0(s[0])) + le(s[0], 0);
    for (int t = 1; t < 4; ++t) lp += std::log(P(s[t - 1], s[t])) + le(s[t], t);
    exact(code) = std::exp(lp);
  }
  exact /= arma::accu(exact);
  for (int code = 0; code < 16; ++code)
    for (int t = 0; t < 4; ++t) smooth_exact((code >> t) & 1, t) += exact(code);

  Rng rng(7);
  const int n = 100000;
  arma::vec freq(16, arma::fill::zeros);
  arma::mat filtered, smoothed;
  for (int i = 0; i < n; ++i) {
    const arma::uvec path =
        ffbs_states(le, arma::log(P), arma::log(pi0), rng, nullptr, nullptr);
    int code = 0;
    for (int t = 0; t < 4; ++t) code |= static_cast<int>(path(t)) << t;
    freq(code) += 1.0;
  }
  freq /= n;
  for (int code = 0; code < 16; ++code) {
    const double se = std::sqrt(exact(code) * (1 - exact(code)) / n);
    CHECK(freq(code) == Catch::Approx(exact(code)).margin(3.0 * se + 1e-12));
  }
  // smoothed probabilities agree with the enumeration exactly
  ffbs_states(le, arma::log(P), arma::log(pi0), rng, &filtered, &smoothed);
  CHECK(arma::abs(smoothed - smooth_exact).max() < 1e-10);
}

TEST_CASE("transition-matrix posterior matches the Dirichlet mean formula", "[regimes][oracle]") {
  Rng rng(11);
  // path with known transition counts
  const arma::uvec path = {0, 0, 1, 0, 1, 1, 1, 0, 0, 0};
  arma::mat counts(2, 2, arma::fill::zeros);
  for (arma::uword t = 1; t < path.n_elem; ++t) counts(path(t - 1), path(t)) += 1.0;

  const int n = 50000;
  arma::mat mean_P(2, 2, arma::fill::zeros);
  arma::vec mean_pi0(2, arma::fill::zeros);
  for (int i = 0; i < n; ++i) {
    auto [log_P, log_pi0] = sample_transition_matrix(path, 2, 1.0, 1.0, rng);
    mean_P += arma::exp(log_P);
    mean_pi0 += arma::exp(log_pi0);
    if (i < 100) {
      CHECK(std::abs(arma::accu(arma::exp(log_P.row(0))) - 1.0) < 1e-12);
      CHECK(std::abs(arma::accu(arma::exp(log_P.row(1))) - 1.0) < 1e-12);
    }
  }
  mean_P /= n;
  mean_pi0 /= n;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double want = (counts(i, j) + 1.0) / (arma::accu(counts.row(i)) + 2.0);
      CHECK(mean_P(i, j) == Catch::Approx(want).epsilon(0.02));
    }
  CHECK(mean_pi0(0) == Catch::Approx(2.0 / 3.0).epsilon(0.02));  // e0 + indicator(s1=0)
}

TEST_CASE("regime variances: constraint, prior moments, quadrature oracle", "[regimes][oracle]") {
  Rng rng(13);

  SECTION("every draw satisfies the sum-to-M constraint exactly") {
    const int N = 2, M = 3;
    arma::mat s2(N, M, arma::fill::ones);
    const arma::mat ssq = {{4.0, 30.0, 2.5}, {9.0, 1.0, 12.0}};
    const arma::vec occ = {5.0, 9.0, 6.0};
    for (int i = 0; i < 2000; ++i) {
      sample_regime_variances(s2, ssq, occ, 1.0, rng);
      for (int n = 0; n < N; ++n) {
        CHECK(std::abs(arma::accu(s2.row(n)) - M) < 1e-12);
        CHECK(s2.row(n).min() > 0.0);
      }
    }
  }

  SECTION("M = 1 pins the variance at one") {
    arma::mat s2(2, 1, arma::fill::value(3.0));
    sample_regime_variances(s2, arma::mat(2, 1, arma::fill::value(5.0)),
                            arma::vec{7.0}, 1.0, rng);
    CHECK(arma::approx_equal(s2, arma::ones(2, 1), "absdiff", 0.0));
  }

  SECTION("prior-only draws have mean one per regime") {
    const int M = 4;
    arma::mat acc(1, M, arma::fill::zeros);
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      arma::mat s2(1, M, arma::fill::ones);
      sample_regime_variances(s2, arma::zeros(1, M), arma::zeros(M), 1.0, rng);
      acc += s2;
    }
    for (int m = 0; m < M; ++m) CHECK(acc(0, m) / n == Catch::Approx(1.0).epsilon(0.02));
  }

  SECTION("stationary law matches 1-D quadrature at M = 2") {
    const double e_sigma = 1.0;
    const arma::vec occ = {12.0, 8.0};
    const arma::mat ssq = {{9.0, 30.0}};
    const double a1 = e_sigma - 0.5 * occ(0), a2 = e_sigma - 0.5 * occ(1);
    const double b1 = ssq(0, 0) / 4.0, b2 = ssq(0, 1) / 4.0;
    const auto logf = [&](double w) {
      return (a1 - 1.0) * std::log(w) + (a2 - 1.0) * std::log1p(-w) - b1 / w -
             b2 / (1.0 - w);
    };
    // normalize on a grid then integrate moments
    double fmax = -arma::datum::inf;
    for (double w = 0.001; w < 1.0; w += 0.001) fmax = std::max(fmax, logf(w));
    const auto dens = [&](double w) { return std::exp(logf(w) - fmax); };
    const double z = oracle::integrate(dens, 1e-9, 1.0 - 1e-9, 1e-12);
    const double want_mean =
        oracle::integrate([&](double w) { return w * dens(w); }, 1e-9, 1.0 - 1e-9, 1e-12) / z;
    const double want_m2 =
        oracle::integrate([&](double w) { return w * w * dens(w); }, 1e-9, 1.0 - 1e-9,
                          1e-12) / z;

    arma::mat s2(1, 2, arma::fill::ones);
    const int n = 200000;
    double s = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
      sample_regime_variances(s2, ssq, occ, e_sigma, rng);
      const double w = s2(0, 0) / 2.0;
      s += w;
      sq += w * w;
    }
    CHECK(s / n == Catch::Approx(want_mean).epsilon(0.01));
    CHECK(sq / n == Catch::Approx(want_m2).epsilon(0.015));
  }
}

TEST_CASE("mixture allocations follow the exact conditional", "[regimes][oracle]") {
  Rng rng(17);
  SECTION("equal regime variances reduce to the weights") {
    const arma::mat u(1, 1, arma::fill::value(0.3));
    const arma::vec pi0 = {0.2, 0.5, 0.3};
    const arma::mat s2(1, 3, arma::fill::ones);
    arma::vec freq(3, arma::fill::zeros);
    const int n = 100000;
    for (int i = 0; i < n; ++i) freq(sample_mixture_allocations(u, arma::log(pi0), s2, rng)(0)) += 1;
    freq /= n;
    for (int m = 0; m < 3; ++m)
      CHECK(freq(m) == Catch::Approx(pi0(m)).margin(3 * std::sqrt(pi0(m) / n) + 1e-12));
  }
  SECTION("allocation probabilities match the density ratio") {
    const arma::mat u(1, 1, arma::fill::value(2.0));
    const arma::vec pi0 = {0.5, 0.5};
    arma::mat s2(1, 2);
    s2(0, 0) = 0.25;
    s2(0, 1) = 1.75;
    arma::vec exact(2);
    for (int m = 0; m < 2; ++m)
      exact(m) = pi0(m) * std::exp(log_normal_pdf(2.0, 0.0, s2(0, m)));
    exact /= arma::accu(exact);
    arma::vec freq(2, arma::fill::zeros);
    const int n = 100000;
    for (int i = 0; i < n; ++i) freq(sample_mixture_allocations(u, arma::log(pi0), s2, rng)(0)) += 1;
    freq /= n;
    CHECK(freq(0) == Catch::Approx(exact(0)).margin(3 * std::sqrt(0.25 / n)));
  }
  SECTION("finite mixture enforces occupancy") {
    SimulationConfig cfg;
    cfg.N = 1;
    cfg.T0 = 41;
    cfg.family = Family::mix;
    auto [raw, truth] = simulate_data(cfg, 3);
    const arma::mat u = truth.shocks;
    const arma::vec pi0 = {0.95, 0.05};
    arma::mat s2(1, 2, arma::fill::ones);
    for (int i = 0; i < 200; ++i) {
      const arma::uvec path = sample_mixture_allocations(u, arma::log(pi0), s2, rng, 1);
      arma::vec occ;
      detail::occupancy_counts(path, 2, occ);
      CHECK(occ.min() >= 1);
    }
  }
}

TEST_CASE("sparse concentration update matches quadrature", "[regimes][oracle]") {
  Rng rng(19);
  PriorSpec prior;
  prior.sparse_s_e = 1.0;
  prior.sparse_nu_e = 10.0;
  // two fixed transition rows from a Dirichlet(0.5) draw
  arma::mat log_rows(2, 3);
  log_rows.row(0) = rng.dirichlet_log(arma::vec{0.5, 0.5, 0.5}).t();
  log_rows.row(1) = rng.dirichlet_log(arma::vec{0.5, 0.5, 0.5}).t();
  const double row_sum = arma::accu(log_rows);
  const int M = 3;
  const auto log_target = [&](double e) {
    return log_ig2_pdf(e, prior.sparse_s_e, prior.sparse_nu_e) +
           2.0 * (std::lgamma(M * e) - M * std::lgamma(e)) + (e - 1.0) * row_sum;
  };
  double fmax = -arma::datum::inf;
  for (double e = 1e-4; e < 4.0; e += 1e-4) fmax = std::max(fmax, log_target(e));
  const auto dens = [&](double e) { return std::exp(log_target(e) - fmax); };
  const double z = oracle::integrate(dens, 1e-8, 20.0, 1e-12);
  const double want = oracle::integrate([&](double e) { return e * dens(e); }, 1e-8, 20.0,
                                        1e-12) / z;
  double e_cur = 1.0, acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    e_cur = detail::sample_sparse_concentration(e_cur, log_rows, prior, rng);
    acc += e_cur;
  }
  CHECK(acc / n == Catch::Approx(want).epsilon(0.02));
}

TEST_CASE("msh update keeps the stationary-model occupancy floor", "[regimes]") {
  const ModelSpec spec = make_geweke_spec(Family::msh, 2, 30, 2);
  Rng rng(23);
  ParameterState st = sample_prior_state(spec, rng);
  const GibbsWorkspace ws(spec);
  for (int i = 0; i < 300; ++i) {
    gibbs_sweep(st, spec, rng, ws);
    arma::vec occ;
    detail::occupancy_counts(st.regime.path, spec.M, occ);
    CHECK(occ.min() >= effective_min_occupancy(spec));
    CHECK(std::abs(arma::accu(st.regime.sigma2_regime.row(0)) - spec.M) < 1e-12);
    CHECK_NOTHROW(validate_state(st, spec));
  }
}

TEST_CASE("sparse msh collapses to the true number of regimes", "[regimes][slow]") {
  SimulationConfig cfg;
  cfg.N = 2;
  cfg.p = 1;
  cfg.T0 = 1001;
  cfg.family = Family::msh;
  cfg.M = 2;
  cfg.P = {{0.95, 0.05}, {0.1, 0.9}};
  cfg.sigma2_regime = {{1.0, 16.0}, {1.0, 16.0}};
  auto [raw, truth] = simulate_data(cfg, 31);
  ModelSpec spec = make_model_spec(raw, 1, Family::msh_sparse, 20);
  const PosteriorDraws burn = estimate(spec, 3000, 11);
  const PosteriorDraws post = estimate(burn, 800);
  arma::vec hist(21, arma::fill::zeros);
  for (int s = 0; s < post.n_draws(); ++s) {
    arma::vec occ;
    detail::occupancy_counts(post.path.col(s), 20, occ);
    hist(arma::accu(occ > 0.0)) += 1.0;
  }
  INFO("occupied-count histogram: " << hist.t());
  CHECK(hist.index_max() == 2);
  // the concentration hyper-parameter adapts below its prior mean
  CHECK(arma::mean(post.dirichlet_e) < 0.125);
}

TEST_CASE("sparse mix collapses to the true number of components", "[regimes][slow]") {
  SimulationConfig cfg;
  cfg.N = 2;
  cfg.p = 1;
  cfg.T0 = 1001;
  cfg.family = Family::mix;
  cfg.M = 2;
  cfg.pi0 = arma::vec{0.7, 0.3};
  cfg.sigma2_regime = {{1.0, 16.0}, {1.0, 16.0}};
  auto [raw, truth] = simulate_data(cfg, 37);
  ModelSpec spec = make_model_spec(raw, 1, Family::mix_sparse, 20);
  // a single weight vector informs e far less than the M transition rows of
  // the Markov variant, so the mixture needs a sparser hyper-prior to empty
  // the surplus components
  spec.prior.sparse_s_e = 0.1;
  const PosteriorDraws burn = estimate(spec, 3000, 13);
  const PosteriorDraws post = estimate(burn, 800);
  arma::vec hist(21, arma::fill::zeros);
  for (int s = 0; s < post.n_draws(); ++s) {
    arma::vec occ;
    detail::occupancy_counts(post.path.col(s), 20, occ);
    hist(arma::accu(occ > 0.0)) += 1.0;
  }
  INFO("occupied-component histogram: " << hist.t());
  CHECK(hist.index_max() == 2);
}

TEST_CASE("geweke passes for the msh sampler", "[regimes][geweke][slow]") {
  const ModelSpec spec = make_geweke_spec(Family::msh, 2, 30, 2);
  const GewekeReport r = geweke_joint_test(spec, 40000, 13);
  for (const auto& m : r.moments)
    UNSCOPED_INFO(m.name << ": prior " << m.prior_mean << ", chain " << m.chain_mean
                         << ", z = " << m.z);
  CHECK(r.pass());
}

TEST_CASE("geweke passes for the mix sampler", "[regimes][geweke][slow]") {
  const ModelSpec spec = make_geweke_spec(Family::mix, 2, 30, 2);
  const GewekeReport r = geweke_joint_test(spec, 40000, 17);
  for (const auto& m : r.moments)
    UNSCOPED_INFO(m.name << ": prior " << m.prior_mean << ", chain " << m.chain_mean
                         << ", z = " << m.z);
  CHECK(r.pass());
}

TEST_CASE("geweke passes for the sparse variants", "[regimes][geweke][slow]") {
  for (Family f : {Family::msh_sparse, Family::mix_sparse}) {
    const ModelSpec spec = make_geweke_spec(f, 2, 30, 3);
    const GewekeReport r = geweke_joint_test(spec, 40000, 19);
    for (const auto& m : r.moments)
      UNSCOPED_INFO(family_name(f) << " " << m.name << ": prior " << m.prior_mean
                                   << ", chain " << m.chain_mean << ", z = " << m.z);
    CHECK(r.pass());
  }
}
