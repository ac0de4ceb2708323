#pragma once

#include <armadillo>

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "bsve/gibbs.hpp"
#include "bsve/model.hpp"
#include "bsve/random.hpp"
#include "bsve/types.hpp"
#include "bsve/volatility.hpp"

namespace bsve {

// Exact draw from the joint prior of all parameters and latents. Requires
// nu_B = N, where the structural prior is row-wise normal; regime families
// honor the same occupancy truncation as the path update.
inline ParameterState sample_prior_state(const ModelSpec& spec, Rng& rng) {
  if (spec.prior.nu_B != static_cast<double>(spec.data.N))
    throw std::invalid_argument(
        "sample_prior_state: exact prior draws need the default shape nu_B = N");
  const int N = spec.data.N, T = spec.data.T, M = spec.M;
  const auto& pr = spec.prior;
  ParameterState st = init_state(spec);

  st.s_A = rng.inv_gamma2(pr.s_sA, pr.nu_sA);
  st.s_B = rng.inv_gamma2(pr.s_sB, pr.nu_sB);
  for (int n = 0; n < N; ++n) {
    st.s_An(n) = rng.gamma(pr.a_A, st.s_A);
    st.gamma_A(n) = rng.inv_gamma2(st.s_An(n), pr.nu_A);
    st.s_Bn(n) = rng.gamma(pr.a_B, st.s_B);
    st.gamma_B(n) = rng.inv_gamma2(st.s_Bn(n), pr.nu_b);

    const arma::uvec ia = RestrictionPattern::selected(spec.restrictions.VA(n));
    arma::rowvec arow(spec.data.K(), arma::fill::zeros);
    for (arma::uword k = 0; k < ia.n_elem; ++k)
      arow(ia(k)) = pr.A_mean(ia(k), n) +
                    std::sqrt(st.gamma_A(n) * pr.A_scale_diag(ia(k))) * rng.normal();
    st.A.row(n) = arow;

    const arma::uvec ib = RestrictionPattern::selected(spec.restrictions.VB(n));
    const arma::mat L = arma::chol(pr.B_scale(n), "lower");
    const arma::vec b = std::sqrt(st.gamma_B(n)) * (L * rng.normal_vec(ib.n_elem));
    arma::rowvec brow(N, arma::fill::zeros);
    for (arma::uword k = 0; k < ib.n_elem; ++k) brow(ib(k)) = b(k);
    st.B0.row(n) = brow;
  }

  if (family_is_sv(spec.family)) {
    const bool centred = spec.family == Family::sv_centred;
    st.sv.s_sigma = rng.inv_gamma2(pr.sv_s, pr.sv_nu);
    if (centred) st.sv.s_v = rng.gamma(pr.sv_a_sigma, st.sv.s_sigma);
    for (int n = 0; n < N; ++n) {
      st.sv.rho(n) = rng.uniform(-1.0, 1.0);
      double state_sd = 1.0;
      if (centred) {
        st.sv.sigma_v2(n) = rng.inv_gamma2(st.sv.s_v, pr.sv_a_v);
        state_sd = std::sqrt(st.sv.sigma_v2(n));
      } else {
        st.sv.sigma2_omega(n) = rng.gamma(pr.sv_a_sigma, st.sv.s_sigma);
        st.sv.omega(n) = std::sqrt(st.sv.sigma2_omega(n)) * rng.normal();
      }
      double prev = 0.0;
      for (int t = 0; t < T; ++t) {
        prev = st.sv.rho(n) * prev + state_sd * rng.normal();
        st.sv.h(n, t) = prev;
        const double lv = centred ? prev : st.sv.omega(n) * prev;
        st.sigma2(n, t) = std::exp(std::clamp(lv, -700.0, 700.0));
      }
    }
  } else if (family_is_regime(spec.family)) {
    if (family_is_sparse(spec.family))
      st.regime.e = rng.inv_gamma2(pr.sparse_s_e, pr.sparse_nu_e);
    const int min_occ = effective_min_occupancy(spec);
    for (int n = 0; n < N; ++n)
      st.regime.sigma2_regime.row(n) =
          static_cast<double>(M) * rng.dirichlet(arma::vec(M, arma::fill::value(pr.e_sigma))).t();
    const double pi0_conc = spec.family == Family::mix_sparse ? st.regime.e : pr.e0;
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      if (family_is_markov(spec.family)) {
        for (int m = 0; m < M; ++m)
          st.regime.log_P.row(m) =
              rng.dirichlet_log(arma::vec(M, arma::fill::value(st.regime.e))).t();
        st.regime.log_pi0 = rng.dirichlet_log(arma::vec(M, arma::fill::value(pr.e0)));
        int s = rng.categorical(st.regime.pi0());
        const arma::mat P = st.regime.P();
        for (int t = 0; t < T; ++t) {
          if (t > 0) s = rng.categorical(P.row(s).t());
          st.regime.path(t) = s;
        }
      } else {
        st.regime.log_pi0 = rng.dirichlet_log(arma::vec(M, arma::fill::value(pi0_conc)));
        const arma::vec pi0 = st.regime.pi0();
        for (int t = 0; t < T; ++t) st.regime.path(t) = rng.categorical(pi0);
      }
      arma::vec occ;
      detail::occupancy_counts(st.regime.path, M, occ);
      ok = min_occ == 0 || occ.min() >= min_occ;
    }
    if (!ok) throw numerical_error("sample_prior_state: occupancy truncation unsatisfiable");
    detail::map_regime_sigma2(st);
  } else if (spec.family == Family::student_t) {
    for (int n = 0; n < N; ++n) {
      st.st.nu(n) = 1.0 + 1.0 / rng.uniform();  // lambda = 1/(nu-1) uniform on (0,1)
      for (int t = 0; t < T; ++t)
        st.sigma2(n, t) = rng.inv_gamma2(st.st.nu(n) - 2.0, st.st.nu(n));
    }
  } else {
    st.sigma2.ones();
  }
  return st;
}

// Dependent data simulated from a full parameter state, holding the p
// pre-sample rows of the existing data fixed.
inline TimeSeriesData simulate_from_state(const ModelSpec& spec, const ParameterState& st,
                                          Rng& rng) {
  const int N = spec.data.N, p = spec.data.p, T = spec.data.T, D = spec.data.D;
  if (D != 1)
    throw std::invalid_argument("simulate_from_state: constant-only deterministic terms");
  arma::mat raw(spec.data.raw.n_rows, N);
  raw.rows(0, p - 1) = spec.data.raw.rows(0, p - 1);
  const arma::mat B0_inv = arma::inv(st.B0);
  arma::vec x(N * p + 1);
  for (int t = 0; t < T; ++t) {
    for (int l = 1; l <= p; ++l) x.subvec((l - 1) * N, l * N - 1) = raw.row(p + t - l).t();
    x(N * p) = 1.0;
    arma::vec u(N);
    for (int n = 0; n < N; ++n) u(n) = std::sqrt(st.sigma2(n, t)) * rng.normal();
    raw.row(p + t) = (st.A * x + B0_inv * u).t();
  }
  return build_design_matrices(raw, p);
}

// Prior-simulated draw container for SDDR calibration; no data conditioning.
inline PosteriorDraws make_prior_draws(const ModelSpec& spec, int S, std::uint64_t seed) {
  validate_specification(spec);
  Rng rng(seed);
  PosteriorDraws out;
  out.spec = spec;
  out.seed = seed;
  out.prior_only = true;
  detail::allocate_draws(out, spec, S);
  for (int s = 0; s < S; ++s) {
    const ParameterState st = sample_prior_state(spec, rng);
    detail::store_draw(out, st, spec, s);
  }
  out.last_state = sample_prior_state(spec, rng);
  out.rng_state = rng.serialize();
  return out;
}

}  // namespace bsve
