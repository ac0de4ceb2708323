#pragma once

#include <armadillo>

#include <cmath>
#include <stdexcept>

#include "bsve/model.hpp"
#include "bsve/random.hpp"
#include "bsve/types.hpp"
#include "bsve/util.hpp"

namespace bsve {

// Ten-component normal mixture approximation to the log chi-square(1)
// density; constants from Omori, Chib, Shephard & Nakajima (2007), Table 1.
struct AuxMixtureTable {
  static constexpr int size = 10;
  static constexpr double prob[size] = {0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
                                        0.18842, 0.12047, 0.05591, 0.01575, 0.00115};
  static constexpr double mean[size] = {1.92677,  1.34744,  0.73504,  0.02266,  -0.85173,
                                        -1.97278, -3.46788, -5.55246, -8.68384, -14.65000};
  static constexpr double var[size] = {0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
                                       0.98583, 1.57469, 2.54498, 4.16591, 7.33342};
};

constexpr double kLogSquareOffset = 1e-10;  // guards log(u^2) at u = 0

inline void update_homoskedastic(ParameterState& state) { state.sigma2.ones(); }

// Mixture-component labels given the linearized observations log_sq and the
// current log-volatility level (omega*h or h-tilde).
inline arma::uvec sample_aux_indicators(const arma::vec& log_sq, const arma::vec& level,
                                        Rng& rng) {
  const arma::uword T = log_sq.n_elem;
  arma::uvec ind(T);
  arma::vec lw(AuxMixtureTable::size);
  for (arma::uword t = 0; t < T; ++t) {
    const double resid = log_sq(t) - level(t);
    for (int j = 0; j < AuxMixtureTable::size; ++j)
      lw(j) = std::log(AuxMixtureTable::prob[j]) +
              log_normal_pdf(resid, AuxMixtureTable::mean[j], AuxMixtureTable::var[j]);
    ind(t) = static_cast<arma::uword>(rng.categorical_log(lw));
  }
  return ind;
}

// Cholesky factor of a symmetric tridiagonal positive definite matrix and the
// associated O(T) solves.
struct TridiagChol {
  arma::vec d;  // diagonal of L
  arma::vec e;  // subdiagonal of L

  TridiagChol(const arma::vec& diag, const arma::vec& off) {
    const arma::uword T = diag.n_elem;
    d.set_size(T);
    e.set_size(T > 0 ? T - 1 : 0);
    double prev = diag(0);
    if (prev <= 0.0) throw numerical_error("tridiagonal factorization failed");
    d(0) = std::sqrt(prev);
    for (arma::uword t = 1; t < T; ++t) {
      e(t - 1) = off(t - 1) / d(t - 1);
      const double v = diag(t) - e(t - 1) * e(t - 1);
      if (v <= 0.0) throw numerical_error("tridiagonal factorization failed");
      d(t) = std::sqrt(v);
    }
  }

  arma::vec solve_lower(const arma::vec& b) const {
    arma::vec x(b.n_elem);
    x(0) = b(0) / d(0);
    for (arma::uword t = 1; t < b.n_elem; ++t) x(t) = (b(t) - e(t - 1) * x(t - 1)) / d(t);
    return x;
  }

  arma::vec solve_upper(const arma::vec& b) const {
    const arma::uword T = b.n_elem;
    arma::vec x(T);
    x(T - 1) = b(T - 1) / d(T - 1);
    for (arma::uword i = T - 1; i-- > 0;) x(i) = (b(i) - e(i) * x(i + 1)) / d(i);
    return x;
  }
};

// Joint draw of the log-volatility path from its Gaussian posterior via the
// banded-precision factorization; cost is linear in T.
// Observation: obs_t = loading * h_t + e_t, e_t ~ N(0, obs_var_t);
// state: h_t = rho h_{t-1} + w_t, w_t ~ N(0, state_var), h_0 = 0.
inline arma::vec sample_log_volatility(const arma::vec& obs, const arma::vec& obs_var,
                                       double loading, double rho, double state_var,
                                       Rng& rng) {
  if (!(std::abs(rho) < 1.0))
    throw std::invalid_argument("sample_log_volatility: autoregression must be stationary");
  if (!(state_var > 0.0))
    throw std::invalid_argument("sample_log_volatility: state variance must be positive");
  const arma::uword T = obs.n_elem;
  const double isv = 1.0 / state_var;
  arma::vec diag(T), off(T > 0 ? T - 1 : 0), rhs(T);
  for (arma::uword t = 0; t < T; ++t) {
    diag(t) = (t + 1 < T ? (1.0 + rho * rho) : 1.0) * isv + loading * loading / obs_var(t);
    rhs(t) = loading * obs(t) / obs_var(t);
  }
  off.fill(-rho * isv);
  const TridiagChol chol(diag, off);
  const arma::vec mean = chol.solve_upper(chol.solve_lower(rhs));
  return mean + chol.solve_upper(rng.normal_vec(T));
}

// rho draw restricted to (-1,1) given the latent path (uniform prior).
inline double sample_sv_rho(const arma::vec& h, double state_var, Rng& rng) {
  double prec = 0.0, cross = 0.0;
  for (arma::uword t = 1; t < h.n_elem; ++t) {
    prec += h(t - 1) * h(t - 1);
    cross += h(t) * h(t - 1);
  }
  prec /= state_var;
  cross /= state_var;
  if (prec <= 0.0) return rng.uniform(-1.0, 1.0);
  return rng.trunc_normal(cross / prec, 1.0 / std::sqrt(prec), -1.0, 1.0);
}

// Scale and hierarchy updates of one SV equation, with the interweaving move
// on the scale parameter. `ystar` is log(u^2 + offset); `ind` the current
// mixture labels. Updates h/rho/omega (non-centred) or h/rho/sigma_v2
// (centred) in place.
inline void sample_sv_parameters(SvBlock& sv, int n, const arma::vec& ystar,
                                 const arma::uvec& ind, const PriorSpec& prior, bool centred,
                                 Rng& rng) {
  const arma::uword T = ystar.n_elem;
  arma::vec obs(T), ovar(T);
  for (arma::uword t = 0; t < T; ++t) {
    obs(t) = ystar(t) - AuxMixtureTable::mean[ind(t)];
    ovar(t) = AuxMixtureTable::var[ind(t)];
  }
  arma::vec h = sv.h.row(n).t();

  if (!centred) {
    h = sample_log_volatility(obs, ovar, sv.omega(n), sv.rho(n), 1.0, rng);
    sv.rho(n) = sample_sv_rho(h, 1.0, rng);
    // loading draw: Gaussian in omega with N(0, sigma2_omega) prior
    double prec = 1.0 / sv.sigma2_omega(n), lin = 0.0;
    for (arma::uword t = 0; t < T; ++t) {
      prec += h(t) * h(t) / ovar(t);
      lin += h(t) * obs(t) / ovar(t);
    }
    sv.omega(n) = rng.normal(lin / prec, 1.0 / std::sqrt(prec));

    // interweave: redraw the scale in the centred parameterisation
    arma::vec ht = sv.omega(n) * h;
    double q = 0.0, prev = 0.0;
    for (arma::uword t = 0; t < T; ++t) {
      const double dlt = ht(t) - sv.rho(n) * prev;
      q += dlt * dlt;
      prev = ht(t);
    }
    if (q > 1e-280) {
      const double psi =
          rng.gig(0.5 * (1.0 - static_cast<double>(T)), 1.0 / sv.sigma2_omega(n), q);
      sv.omega(n) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::sqrt(psi);
      h = ht / sv.omega(n);
    }
    sv.sigma2_omega(n) =
        rng.gig(prior.sv_a_sigma - 0.5, 2.0 / sv.s_sigma, sv.omega(n) * sv.omega(n));
  } else {
    h = sample_log_volatility(obs, ovar, 1.0, sv.rho(n), sv.sigma_v2(n), rng);
    sv.rho(n) = sample_sv_rho(h, sv.sigma_v2(n), rng);
    double q = 0.0, prev = 0.0;
    for (arma::uword t = 0; t < T; ++t) {
      const double dlt = h(t) - sv.rho(n) * prev;
      q += dlt * dlt;
      prev = h(t);
    }
    sv.sigma_v2(n) = rng.inv_gamma2(sv.s_v + q, prior.sv_a_v + static_cast<double>(T));

    // interweave: Metropolis redraw of the scale in the non-centred view,
    // proposal = observation-equation Gaussian, acceptance = prior ratio
    const double sd_cur = std::sqrt(sv.sigma_v2(n));
    const arma::vec hstar = h / sd_cur;
    double prec = 0.0, lin = 0.0;
    for (arma::uword t = 0; t < T; ++t) {
      prec += hstar(t) * hstar(t) / ovar(t);
      lin += hstar(t) * obs(t) / ovar(t);
    }
    if (prec > 0.0) {
      const double cand = rng.normal(lin / prec, 1.0 / std::sqrt(prec));
      if (cand > 0.0) {
        const auto log_prior = [&](double x) {
          return -(prior.sv_a_v + 1.0) * std::log(x) - 0.5 * sv.s_v / (x * x);
        };
        if (std::log(rng.uniform()) <= log_prior(cand) - log_prior(sd_cur)) {
          sv.sigma_v2(n) = cand * cand;
          h = cand * hstar;
        }
      }
    }
  }
  sv.h.row(n) = h.t();
}

// Shared levels of the SV hierarchies.
inline void sample_sv_hierarchy(SvBlock& sv, const PriorSpec& prior, bool centred, int N,
                                Rng& rng) {
  if (!centred) {
    sv.s_sigma = rng.inv_gamma2(prior.sv_s + 2.0 * arma::accu(sv.sigma2_omega),
                                prior.sv_nu + 2.0 * N * prior.sv_a_sigma);
  } else {
    const double rate = 1.0 / sv.s_sigma + 0.5 * arma::accu(1.0 / sv.sigma_v2);
    sv.s_v = rng.gamma(prior.sv_a_sigma + 0.5 * N * prior.sv_a_v, 1.0 / rate);
    sv.s_sigma =
        rng.inv_gamma2(prior.sv_s + 2.0 * sv.s_v, prior.sv_nu + 2.0 * prior.sv_a_sigma);
  }
}

// Forward filter and backward smoother of the discrete-state chain, in log
// space throughout. Returns log filtered probabilities; lpred holds the
// one-step-ahead log predictive state probabilities.
inline arma::mat hmm_log_filter(const arma::mat& log_emission, const arma::mat& log_P,
                                const arma::vec& log_pi0, arma::mat& lpred) {
  const int M = static_cast<int>(log_emission.n_rows);
  const int T = static_cast<int>(log_emission.n_cols);
  arma::mat lf(M, T);
  lpred.set_size(M, T);
  lpred.col(0) = log_pi0;
  for (int t = 0; t < T; ++t) {
    if (t > 0)
      for (int j = 0; j < M; ++j)
        lpred(j, t) = logsumexp(lf.col(t - 1) + log_P.col(j));
    arma::vec la = lpred.col(t) + log_emission.col(t);
    const double norm = logsumexp(la);
    if (!std::isfinite(norm))
      throw numerical_error("hmm filter: emission column vanished at t = " +
                            std::to_string(t));
    lf.col(t) = la - norm;
  }
  return lf;
}

inline arma::mat hmm_log_smooth(const arma::mat& lf, const arma::mat& lpred,
                                const arma::mat& log_P) {
  const int M = static_cast<int>(lf.n_rows);
  const int T = static_cast<int>(lf.n_cols);
  arma::mat ls(M, T);
  ls.col(T - 1) = lf.col(T - 1);
  for (int t = T - 2; t >= 0; --t)
    for (int i = 0; i < M; ++i)
      ls(i, t) = lf(i, t) + logsumexp(log_P.row(i).t() + ls.col(t + 1) - lpred.col(t + 1));
  return ls;
}

// Exact joint draw of the regime path; optionally returns filtered and
// smoothed probabilities.
inline arma::uvec ffbs_states(const arma::mat& log_emission, const arma::mat& log_P,
                              const arma::vec& log_pi0, Rng& rng,
                              arma::mat* filtered = nullptr, arma::mat* smoothed = nullptr) {
  const int T = static_cast<int>(log_emission.n_cols);
  arma::mat lpred;
  const arma::mat lf = hmm_log_filter(log_emission, log_P, log_pi0, lpred);

  arma::uvec path(T);
  path(T - 1) = static_cast<arma::uword>(rng.categorical_log(lf.col(T - 1)));
  for (int t = T - 2; t >= 0; --t)
    path(t) =
        static_cast<arma::uword>(rng.categorical_log(lf.col(t) + log_P.col(path(t + 1))));

  if (filtered) *filtered = arma::exp(lf);
  if (smoothed) *smoothed = arma::exp(hmm_log_smooth(lf, lpred, log_P));
  return path;
}

// Dirichlet conjugate updates of the transition rows and the initial-state
// probabilities.
inline std::pair<arma::mat, arma::vec> sample_transition_matrix(const arma::uvec& path, int M,
                                                                double e, double e0,
                                                                Rng& rng) {
  arma::mat counts(M, M, arma::fill::zeros);
  for (arma::uword t = 1; t < path.n_elem; ++t) counts(path(t - 1), path(t)) += 1.0;
  arma::mat log_P(M, M);
  for (int m = 0; m < M; ++m)
    log_P.row(m) = rng.dirichlet_log(e + counts.row(m).t()).t();
  arma::vec first(M, arma::fill::zeros);
  first(path(0)) = 1.0;
  return {log_P, rng.dirichlet_log(e0 + first)};
}

// Normalized variance draw under the sum-to-M constraint: the Dirichlet prior
// combined with the normal likelihood gives, per equation, the density
// prod_m w_m^{e_sigma - T_m/2 - 1} exp{-(S_nm / 2M) / w_m} on the simplex.
// Sampled by pairwise slice updates that hold w_i + w_j fixed; exact Dirichlet
// draw when no observation is allocated (prior case).
inline void sample_regime_variances(arma::mat& sigma2_regime, const arma::mat& shock_sq_sum,
                                    const arma::vec& occupancy, double e_sigma, Rng& rng) {
  const int N = static_cast<int>(sigma2_regime.n_rows);
  const int M = static_cast<int>(sigma2_regime.n_cols);
  if (M == 1) {
    sigma2_regime.ones();
    return;
  }
  const bool prior_only = arma::accu(occupancy) == 0.0;
  for (int n = 0; n < N; ++n) {
    arma::vec w = sigma2_regime.row(n).t() / static_cast<double>(M);
    w /= arma::accu(w);
    if (prior_only) {
      w = rng.dirichlet(arma::vec(M, arma::fill::value(e_sigma)));
    } else {
      for (int i = 0; i < M; ++i) {
        int j = rng.categorical(arma::ones(M - 1));
        if (j >= i) ++j;
        const double c = w(i) + w(j);
        const double ai = e_sigma - 0.5 * occupancy(i), aj = e_sigma - 0.5 * occupancy(j);
        const double bi = shock_sq_sum(n, i) / (2.0 * M * c);
        const double bj = shock_sq_sum(n, j) / (2.0 * M * c);
        double v;
        if (bi == 0.0 && bj == 0.0) {
          v = rng.beta(ai, aj);  // both regimes empty
          v = std::clamp(v, 1e-300, 1.0 - 1e-16);
        } else {
          const auto logf = [&](double x) {
            return (ai - 1.0) * std::log(x) + (aj - 1.0) * std::log1p(-x) - bi / x -
                   bj / (1.0 - x);
          };
          v = slice_sample(logf, std::clamp(w(i) / c, 1e-12, 1.0 - 1e-12), 0.0, 1.0, 0.1,
                           rng);
        }
        w(i) = c * v;
        w(j) = c * (1.0 - v);
      }
      w /= arma::accu(w);
    }
    sigma2_regime.row(n) = static_cast<double>(M) * w.t();
  }
}

// Independent allocation draw for the mixture families; the finite variant
// requires every component to stay occupied. When no admissible draw appears
// within the retry budget and a valid current path exists, the update keeps
// it: proposing from the unconstrained conditional and accepting only
// admissible draws is an independence-Metropolis kernel for the truncated
// conditional, so the fallback is exact, not a shortcut.
inline arma::uvec sample_mixture_allocations(const arma::mat& shocks,
                                             const arma::vec& log_pi0,
                                             const arma::mat& sigma2_regime, Rng& rng,
                                             int min_occupancy = 0, int max_retries = 100,
                                             const arma::uvec* current = nullptr) {
  const int T = static_cast<int>(shocks.n_cols);
  const int N = static_cast<int>(shocks.n_rows);
  const int M = static_cast<int>(log_pi0.n_elem);
  arma::mat lw(M, T);
  for (int m = 0; m < M; ++m) {
    double base = log_pi0(m);
    for (int n = 0; n < N; ++n)
      base -= 0.5 * std::log(2.0 * arma::datum::pi * sigma2_regime(n, m));
    for (int t = 0; t < T; ++t) {
      double v = base;
      for (int n = 0; n < N; ++n)
        v -= 0.5 * shocks(n, t) * shocks(n, t) / sigma2_regime(n, m);
      lw(m, t) = v;
    }
  }
  arma::uvec path(T);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    for (int t = 0; t < T; ++t)
      path(t) = static_cast<arma::uword>(rng.categorical_log(lw.col(t)));
    if (min_occupancy == 0) return path;
    arma::vec occ(M, arma::fill::zeros);
    for (int t = 0; t < T; ++t) occ(path(t)) += 1.0;
    if (occ.min() >= min_occupancy) return path;
  }
  if (current != nullptr && current->n_elem == static_cast<arma::uword>(T)) {
    arma::vec occ(M, arma::fill::zeros);
    for (int t = 0; t < T; ++t) occ((*current)(t)) += 1.0;
    if (occ.min() >= min_occupancy) return *current;
  }
  throw numerical_error("mixture allocation: occupancy constraint unsatisfiable");
}

// Latent scale draws of the Student-t construction, one IG2 per observation.
inline arma::mat sample_t_latent_variances(const arma::mat& shocks, const arma::vec& nu,
                                           Rng& rng) {
  arma::mat out(shocks.n_rows, shocks.n_cols);
  for (arma::uword n = 0; n < shocks.n_rows; ++n) {
    if (!(nu(n) > 2.0)) throw std::invalid_argument("degrees of freedom must exceed 2");
    for (arma::uword t = 0; t < shocks.n_cols; ++t)
      out(n, t) = rng.inv_gamma2(nu(n) - 2.0 + shocks(n, t) * shocks(n, t), nu(n) + 1.0);
  }
  return out;
}

// Random-walk Metropolis step for the degrees of freedom on the transformed
// coordinate logit(1/(nu-1)); the prior (nu-1)^{-2} is uniform in 1/(nu-1).
// Targets the conditional given the shocks with the latent scales integrated
// out (the zero-mean unit-variance t likelihood): conditioning on the latents
// instead leaves the chain diffusing near the normality boundary.
inline void sample_t_dof(StudentTBlock& st, const arma::mat& shocks, Rng& rng) {
  const int N = static_cast<int>(st.nu.n_elem);
  const double T = static_cast<double>(shocks.n_cols);
  for (int n = 0; n < N; ++n) {
    const arma::rowvec u2 = arma::square(shocks.row(n));
    const auto log_target = [&](double z) {
      const double lam = inv_logit(z);
      const double nu = 1.0 + 1.0 / lam;
      double loglik = T * (std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                           0.5 * std::log((nu - 2.0) * arma::datum::pi));
      loglik -= 0.5 * (nu + 1.0) * arma::accu(arma::log1p(u2 / (nu - 2.0)));
      return loglik + std::log(lam) + std::log1p(-lam);
    };
    const double z0 = logit(1.0 / (st.nu(n) - 1.0));
    const double z1 = z0 + std::exp(st.mh_log_scale(n)) * rng.normal();
    const double logr = log_target(z1) - log_target(z0);
    st.mh_draws(n) += 1.0;
    const bool accept = std::log(rng.uniform()) <= logr;
    if (accept) {
      st.mh_accepts(n) += 1.0;
      st.nu(n) = 1.0 + 1.0 / inv_logit(z1);
    }
    if (st.adapt) {  // diminishing Robbins-Monro adaptation toward 0.44 acceptance
      const double step = std::min(0.05, 1.0 / std::sqrt(st.mh_draws(n)));
      st.mh_log_scale(n) += step * ((accept ? 1.0 : 0.0) - 0.44);
    }
  }
}

namespace detail {

inline arma::mat structural_shocks(const ParameterState& st, const TimeSeriesData& d) {
  return st.B0 * (d.Y - st.A * d.X);
}

inline arma::mat regime_log_emissions(const arma::mat& shocks, const arma::mat& sigma2_regime) {
  const int N = static_cast<int>(shocks.n_rows);
  const int T = static_cast<int>(shocks.n_cols);
  const int M = static_cast<int>(sigma2_regime.n_cols);
  arma::mat le(M, T);
  for (int m = 0; m < M; ++m) {
    double base = 0.0;
    for (int n = 0; n < N; ++n)
      base -= 0.5 * std::log(2.0 * arma::datum::pi * sigma2_regime(n, m));
    for (int t = 0; t < T; ++t) {
      double v = base;
      for (int n = 0; n < N; ++n)
        v -= 0.5 * shocks(n, t) * shocks(n, t) / sigma2_regime(n, m);
      le(m, t) = v;
    }
  }
  return le;
}

inline void occupancy_counts(const arma::uvec& path, int M, arma::vec& occ) {
  occ.zeros(M);
  for (arma::uword t = 0; t < path.n_elem; ++t) occ(path(t)) += 1.0;
}

// Concentration update of the sparse models: IG2 prior times the Dirichlet
// normalizing constants of the rows it governs; slice sampling on log e.
inline double sample_sparse_concentration(double e_cur, const arma::mat& log_rows,
                                          const PriorSpec& prior, Rng& rng) {
  const int M = static_cast<int>(log_rows.n_cols);
  const double row_log_sum = arma::accu(log_rows);
  const double n_rows = static_cast<double>(log_rows.n_rows);
  const auto log_target = [&](double log_e) {
    const double e = std::exp(log_e);
    return log_ig2_pdf(e, prior.sparse_s_e, prior.sparse_nu_e) + log_e +
           n_rows * (std::lgamma(M * e) - M * std::lgamma(e)) + (e - 1.0) * row_log_sum;
  };
  const double out = slice_sample(log_target, std::log(e_cur), -40.0, 40.0, 1.0, rng);
  return std::exp(out);
}

inline void map_regime_sigma2(ParameterState& st) {
  for (arma::uword t = 0; t < st.regime.path.n_elem; ++t)
    st.sigma2.col(t) = st.regime.sigma2_regime.col(st.regime.path(t));
}

}  // namespace detail

constexpr int kPathMaxRetries = 100;

// Full family-specific variance block of one Gibbs sweep, conditioning on the
// current (A, B0).
inline void update_volatility(ParameterState& st, const ModelSpec& spec, Rng& rng) {
  const int N = spec.data.N, T = spec.data.T, M = spec.M;
  switch (spec.family) {
    case Family::homo:
      update_homoskedastic(st);
      return;

    case Family::sv:
    case Family::sv_centred: {
      const bool centred = spec.family == Family::sv_centred;
      const arma::mat u = detail::structural_shocks(st, spec.data);
      for (int n = 0; n < N; ++n) {
        const arma::vec ystar =
            arma::log(arma::square(u.row(n).t()) + kLogSquareOffset);
        arma::vec level(T);
        for (int t = 0; t < T; ++t)
          level(t) = centred ? st.sv.h(n, t) : st.sv.omega(n) * st.sv.h(n, t);
        const arma::uvec ind = sample_aux_indicators(ystar, level, rng);
        sample_sv_parameters(st.sv, n, ystar, ind, spec.prior, centred, rng);
      }
      sample_sv_hierarchy(st.sv, spec.prior, centred, N, rng);
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t) {
          const double lv = centred ? st.sv.h(n, t) : st.sv.omega(n) * st.sv.h(n, t);
          st.sigma2(n, t) = std::exp(std::clamp(lv, -700.0, 700.0));
        }
      return;
    }

    case Family::msh:
    case Family::msh_sparse: {
      const arma::mat u = detail::structural_shocks(st, spec.data);
      const arma::mat le = detail::regime_log_emissions(u, st.regime.sigma2_regime);
      const int min_occ = effective_min_occupancy(spec);
      arma::vec occ;
      arma::uvec path;
      bool ok = false;
      for (int attempt = 0; attempt < kPathMaxRetries && !ok; ++attempt) {
        path = ffbs_states(le, st.regime.log_P, st.regime.log_pi0, rng);
        detail::occupancy_counts(path, M, occ);
        ok = min_occ == 0 || occ.min() >= min_occ;
      }
      if (!ok) {
        // exhausted retry budget: keeping an admissible current path is the
        // exact independence-Metropolis fallback for the truncated conditional
        detail::occupancy_counts(st.regime.path, M, occ);
        if (occ.min() < min_occ)
          throw numerical_error("regime path: minimum-occupancy constraint unsatisfiable");
        path = st.regime.path;
      }
      st.regime.path = path;
      auto [log_P, log_pi0] =
          sample_transition_matrix(path, M, st.regime.e, spec.prior.e0, rng);
      st.regime.log_P = log_P;
      st.regime.log_pi0 = log_pi0;
      arma::mat ssq(N, M, arma::fill::zeros);
      for (int t = 0; t < T; ++t)
        for (int n = 0; n < N; ++n) ssq(n, path(t)) += u(n, t) * u(n, t);
      sample_regime_variances(st.regime.sigma2_regime, ssq, occ, spec.prior.e_sigma, rng);
      if (spec.family == Family::msh_sparse)
        st.regime.e =
            detail::sample_sparse_concentration(st.regime.e, st.regime.log_P, spec.prior, rng);
      detail::map_regime_sigma2(st);
      return;
    }

    case Family::mix:
    case Family::mix_sparse: {
      const arma::mat u = detail::structural_shocks(st, spec.data);
      const int min_occ = effective_min_occupancy(spec);
      st.regime.path = sample_mixture_allocations(u, st.regime.log_pi0,
                                                  st.regime.sigma2_regime, rng, min_occ,
                                                  kPathMaxRetries, &st.regime.path);
      arma::vec occ;
      detail::occupancy_counts(st.regime.path, M, occ);
      const double conc = family_is_sparse(spec.family) ? st.regime.e : spec.prior.e0;
      st.regime.log_pi0 = rng.dirichlet_log(conc + occ);
      arma::mat ssq(N, M, arma::fill::zeros);
      for (int t = 0; t < T; ++t)
        for (int n = 0; n < N; ++n) ssq(n, st.regime.path(t)) += u(n, t) * u(n, t);
      sample_regime_variances(st.regime.sigma2_regime, ssq, occ, spec.prior.e_sigma, rng);
      if (spec.family == Family::mix_sparse)
        st.regime.e = detail::sample_sparse_concentration(st.regime.e,
                                                          st.regime.log_pi0.t(), spec.prior,
                                                          rng);
      detail::map_regime_sigma2(st);
      return;
    }

    case Family::student_t: {
      const arma::mat u = detail::structural_shocks(st, spec.data);
      // collapsed order: degrees of freedom first (latents integrated out),
      // then the latent scales given the fresh nu
      sample_t_dof(st.st, u, rng);
      st.sigma2 = sample_t_latent_variances(u, st.st.nu, rng);
      return;
    }
  }
}

}  // namespace bsve
