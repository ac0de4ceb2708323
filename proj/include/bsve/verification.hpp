#pragma once

#include <armadillo>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsve/gibbs.hpp"
#include "bsve/random.hpp"
#include "bsve/types.hpp"
#include "bsve/util.hpp"
#include "bsve/volatility.hpp"

namespace bsve {

// Posterior-to-prior ordinate ratio at a sharp restriction; exp(log_sddr)
// estimates the posterior odds of the restriction.
struct SddrResult {
  double log_sddr = 0;
  double log_nse = 0;  // numerical standard error of log_sddr
  double log_posterior_ordinate = 0;
  double log_prior_ordinate = 0;
  std::string hypothesis;
};

namespace detail {

// mean and batch-mean NSE of exp(l) on the log scale: returns
// {log mean, relative nse}
inline std::pair<double, double> log_mean_with_nse(const arma::vec& logs,
                                                   int n_batches = 20) {
  const double lmax = logs.max();
  if (!std::isfinite(lmax)) throw numerical_error("ordinate estimate degenerated to zero");
  const arma::vec scaled = arma::exp(logs - lmax);
  const double mean = arma::mean(scaled);
  const double nse = batch_means_nse(scaled, n_batches);
  return {lmax + std::log(mean), nse / mean};
}

inline double log_mvnorm_pdf(const arma::vec& x, const arma::vec& mean,
                             const arma::mat& cov) {
  const arma::uword q = x.n_elem;
  const arma::mat L = arma::chol(0.5 * (cov + cov.t()), "lower");
  const arma::vec z = arma::solve(arma::trimatl(L), x - mean);
  double logdet = 0;
  for (arma::uword i = 0; i < q; ++i) logdet += std::log(L(i, i));
  return -0.5 * q * std::log(2.0 * arma::datum::pi) - logdet - 0.5 * arma::dot(z, z);
}

// multivariate t density with dof nu, location m, diagonal scale s_diag
inline double log_mvt_pdf_diag(const arma::vec& x, const arma::vec& m,
                               const arma::vec& s_diag, double nu) {
  const double q = static_cast<double>(x.n_elem);
  double logdet = 0, d = 0;
  for (arma::uword i = 0; i < x.n_elem; ++i) {
    logdet += std::log(s_diag(i));
    d += (x(i) - m(i)) * (x(i) - m(i)) / s_diag(i);
  }
  return std::lgamma(0.5 * (nu + q)) - std::lgamma(0.5 * nu) -
         0.5 * q * std::log(nu * arma::datum::pi) - 0.5 * logdet -
         0.5 * (nu + q) * std::log1p(d / nu);
}

// local adaptive Simpson (kept here so the header has no test dependencies)
template <class F>
inline double simpson_rec_(const F& f, double a, double b, double fa, double fm, double fb,
                           double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec_(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec_(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
inline double oracle_free_integrate_(const F& f, double a, double b, int pieces = 64) {
  // pre-split the domain so narrow interior peaks are not missed
  double total = 0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + (b - a) * i / pieces;
    const double hi = a + (b - a) * (i + 1) / pieces;
    const double m = 0.5 * (lo + hi);
    const double flo = f(lo), fm = f(m), fhi = f(hi);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    total += simpson_rec_(f, lo, hi, flo, fm, fhi, whole, 1e-12, 28);
  }
  return total;
}

// Normalizing constant of prod_m w_m^{alpha_m - 1} exp(-beta_m / w_m) over
// the simplex scaled to total mass c, by recursive mode-centred quadrature.
inline double log_simplex_kernel_mass(const arma::vec& alpha, const arma::vec& beta,
                                      double c, int depth = 0) {
  const arma::uword M = alpha.n_elem;
  if (M == 2) {
    const auto logf = [&](double w) {
      return (alpha(0) - 1.0) * std::log(w) + (alpha(1) - 1.0) * std::log(c - w) -
             beta(0) / w - beta(1) / (c - w);
    };
    const int grid = 512;
    double fmax = -arma::datum::inf;
    for (int i = 1; i < grid; ++i)
      fmax = std::max(fmax, logf(c * static_cast<double>(i) / grid));
    if (!std::isfinite(fmax)) return -arma::datum::inf;
    const auto dens = [&](double w) {
      const double v = logf(w) - fmax;
      return v > -745.0 ? std::exp(v) : 0.0;
    };
    const double eps = c * 1e-12;
    double mass = 0;
    // refine around the grid mode: adaptive Simpson handles the peak
    mass = oracle_free_integrate_(dens, eps, c - eps);
    return fmax + std::log(mass);
  }
  // integrate out the first coordinate; the rest is the same kernel on the
  // remaining mass
  const auto outer = [&](double w) {
    return (alpha(0) - 1.0) * std::log(w) - beta(0) / w +
           log_simplex_kernel_mass(alpha.tail(M - 1), beta.tail(M - 1), c - w, depth + 1);
  };
  const int grid = 64;
  double fmax = -arma::datum::inf;
  for (int i = 1; i < grid; ++i)
    fmax = std::max(fmax, outer(c * static_cast<double>(i) / grid));
  if (!std::isfinite(fmax)) return -arma::datum::inf;
  const auto dens = [&](double w) {
    const double v = outer(w) - fmax;
    return v > -745.0 ? std::exp(v) : 0.0;
  };
  const double eps = c * 1e-12;
  return fmax + std::log(oracle_free_integrate_(dens, eps, c - eps, 16));
}

}  // namespace detail

// Restrictions on the free autoregressive coefficients: S vec(A) = r, with S
// an element-selection matrix. Ordinates are Rao-Blackwellized conditional
// normal densities averaged over the retained draws; the prior ordinate
// integrates the local shrinkage level analytically (multivariate t given
// the middle hierarchy level, simulated from its prior).
inline SddrResult sddr_autoregression(const PosteriorDraws& draws, const arma::mat& S,
                                      const arma::vec& r_values,
                                      std::uint64_t seed = 0x5dd7a) {
  const auto& spec = draws.spec;
  const int N = spec.data.N, K = spec.data.K();
  if (S.n_rows != r_values.n_elem)
    throw std::invalid_argument("restriction matrix and value vector sizes differ");
  if (static_cast<int>(S.n_cols) != N * K)
    throw std::invalid_argument("restriction matrix must have N(Np+D) columns");

  SddrResult out;
  out.hypothesis = "S vec(A) = r (" + std::to_string(S.n_rows) + " restrictions)";
  if (S.n_rows == 0) return out;  // empty restriction: SDDR = 1 exactly

  // map vec(A) indices (column-major) to positions in the free-coefficient
  // stack; restricted-to-zero elements are not part of the parameter
  const GibbsWorkspace ws(spec);
  arma::ivec free_pos(N * K);
  free_pos.fill(-1);
  arma::uvec offset(N, arma::fill::zeros);
  int R = 0;
  for (int n = 0; n < N; ++n) {
    offset(n) = R;
    for (arma::uword k = 0; k < ws.A_idx(n).n_elem; ++k)
      free_pos(ws.A_idx(n)(k) * N + n) = R + static_cast<int>(k);
    R += static_cast<int>(ws.A_idx(n).n_elem);
  }
  arma::uvec sel(S.n_rows);
  arma::uvec sel_eq(S.n_rows);
  for (arma::uword i = 0; i < S.n_rows; ++i) {
    const arma::uvec hits = arma::find(S.row(i) != 0.0);
    if (hits.n_elem != 1 || S(i, hits(0)) != 1.0)
      throw std::invalid_argument("restriction rows must select single elements");
    if (free_pos(hits(0)) < 0)
      throw std::invalid_argument(
          "hypothesis targets an element already excluded by the identification pattern");
    sel(i) = static_cast<arma::uword>(free_pos(hits(0)));
    sel_eq(i) = hits(0) % N;
  }

  // posterior ordinate: exact conditional normal of the selected elements
  // given each draw's (B0, variances, shrinkage)
  const int S_draws = draws.n_draws();
  arma::vec log_post(S_draws);
  arma::vec prior_mean_full(R), prior_scale_full(R);
  for (int n = 0; n < N; ++n) {
    prior_mean_full.subvec(offset(n), offset(n) + ws.A_idx(n).n_elem - 1) =
        ws.A_prior_mean(n);
    prior_scale_full.subvec(offset(n), offset(n) + ws.A_idx(n).n_elem - 1) =
        ws.A_prior_scale(n);
  }
  for (int s = 0; s < S_draws; ++s) {
    arma::vec prior_prec(R);
    for (int n = 0; n < N; ++n)
      prior_prec.subvec(offset(n), offset(n) + ws.A_idx(n).n_elem - 1) =
          1.0 / (draws.gamma_A(n, s) * ws.A_prior_scale(n));
    arma::mat P;
    arma::vec rhs;
    if (draws.prior_only) {
      P = arma::diagmat(prior_prec);
      rhs = prior_prec % prior_mean_full;
    } else {
      const arma::mat inv_s2 = 1.0 / draws.sigma2_draw(s);
      const arma::mat& B0 = draws.B.slice(s);
      P.zeros(R, R);
      rhs = prior_prec % prior_mean_full;
      const arma::mat V = (B0 * spec.data.Y) % inv_s2;
      for (int n = 0; n < N; ++n) {
        const arma::rowvec qn = B0.col(n).t() * V;
        rhs.subvec(offset(n), offset(n) + ws.A_idx(n).n_elem - 1) += ws.W(n) * qn.t();
        for (int m = n; m < N; ++m) {
          const arma::rowvec c = (B0.col(n) % B0.col(m)).t() * inv_s2;
          const arma::mat block = (ws.W(n).each_row() % c) * ws.W(m).t();
          P.submat(offset(n), offset(m), offset(n) + ws.A_idx(n).n_elem - 1,
                   offset(m) + ws.A_idx(m).n_elem - 1) = block;
          if (m != n)
            P.submat(offset(m), offset(n), offset(m) + ws.A_idx(m).n_elem - 1,
                     offset(n) + ws.A_idx(n).n_elem - 1) = block.t();
        }
      }
      P.diag() += prior_prec;
    }
    const arma::mat U = detail::chol_upper_jittered(P, "sddr_autoregression");
    const arma::vec mu = arma::solve(arma::trimatu(U),
                                     arma::solve(arma::trimatl(U.t()), rhs));
    arma::mat E(R, sel.n_elem, arma::fill::zeros);
    for (arma::uword i = 0; i < sel.n_elem; ++i) E(sel(i), i) = 1.0;
    const arma::mat Z = arma::solve(arma::trimatu(U), arma::solve(arma::trimatl(U.t()), E));
    const arma::mat cov_q = E.t() * Z;
    log_post(s) = detail::log_mvnorm_pdf(r_values, mu.elem(sel), cov_q);
  }

  // prior ordinate: per equation, the selected block given s_An is
  // multivariate t with dof nu_A
  const int n_prior = 100000;
  Rng rng(seed);
  arma::vec log_prior(n_prior);
  for (int i = 0; i < n_prior; ++i) {
    const double s_A = rng.inv_gamma2(spec.prior.s_sA, spec.prior.nu_sA);
    double lp = 0;
    for (int n = 0; n < N; ++n) {
      const arma::uvec in_eq = arma::find(sel_eq == static_cast<arma::uword>(n));
      if (in_eq.is_empty()) continue;
      const double s_An = rng.gamma(spec.prior.a_A, s_A);
      const arma::uvec rows = sel.elem(in_eq);
      lp += detail::log_mvt_pdf_diag(
          r_values.elem(in_eq), prior_mean_full.elem(rows),
          (s_An / spec.prior.nu_A) * prior_scale_full.elem(rows), spec.prior.nu_A);
    }
    log_prior(i) = lp;
  }

  auto [lpost, nse_post] = detail::log_mean_with_nse(log_post);
  auto [lprior, nse_prior] = detail::log_mean_with_nse(log_prior);
  out.log_posterior_ordinate = lpost;
  out.log_prior_ordinate = lprior;
  out.log_sddr = lpost - lprior;
  out.log_nse = std::sqrt(nse_post * nse_post + nse_prior * nse_prior);
  return out;
}

// Convenience: hypothesis matrix of restricted values (NaN = unrestricted).
inline SddrResult sddr_autoregression(const PosteriorDraws& draws, const arma::mat& H,
                                      std::uint64_t seed = 0x5dd7a) {
  const int N = draws.spec.data.N, K = draws.spec.data.K();
  if (static_cast<int>(H.n_rows) != N || static_cast<int>(H.n_cols) != K)
    throw std::invalid_argument("hypothesis matrix must be N x (Np+D)");
  std::vector<arma::uword> idx;
  std::vector<double> vals;
  for (int k = 0; k < K; ++k)
    for (int n = 0; n < N; ++n)
      if (std::isfinite(H(n, k))) {
        idx.push_back(static_cast<arma::uword>(k * N + n));
        vals.push_back(H(n, k));
      }
  arma::mat S(idx.size(), N * K, arma::fill::zeros);
  arma::vec r(idx.size());
  for (arma::uword i = 0; i < idx.size(); ++i) {
    S(i, idx[i]) = 1.0;
    r(i) = vals[i];
  }
  return sddr_autoregression(draws, S, r, seed);
}

// Homoskedasticity of shock n in the non-centred SV model: omega_n = 0.
inline SddrResult sddr_identification_sv(const PosteriorDraws& draws, int n,
                                         std::uint64_t seed = 0x5dd7b) {
  const auto& spec = draws.spec;
  if (spec.family != Family::sv)
    throw std::invalid_argument(
        "the homoskedasticity restriction lives in the non-centred SV parameterisation");
  if (n < 0 || n >= spec.data.N) throw std::invalid_argument("shock index out of range");
  if (!(spec.prior.sv_a_sigma > 0.5))
    throw std::invalid_argument("prior ordinate diverges unless a_sigma > 1/2");

  SddrResult out;
  out.hypothesis = "omega_" + std::to_string(n + 1) + " = 0";
  const int S = draws.n_draws();
  Rng rng(seed);
  arma::vec log_post(S);
  const double lgam_ratio =
      std::lgamma(spec.prior.sv_a_sigma - 0.5) - std::lgamma(spec.prior.sv_a_sigma);
  for (int s = 0; s < S; ++s) {
    if (draws.prior_only) {
      // integrate the scale level analytically given the draw's s_sigma
      log_post(s) = -0.5 * std::log(2.0 * arma::datum::pi) + lgam_ratio -
                    0.5 * std::log(draws.sv_s_sigma(s));
      continue;
    }
    const arma::mat u = draws.B.slice(s) * (spec.data.Y - draws.A.slice(s) * spec.data.X);
    const arma::vec ystar = arma::log(arma::square(u.row(n).t()) + kLogSquareOffset);
    arma::vec level(spec.data.T);
    for (int t = 0; t < spec.data.T; ++t) level(t) = draws.sv_omega(n, s) * draws.h(n, t, s);
    const arma::uvec ind = sample_aux_indicators(ystar, level, rng);
    double prec = 1.0 / draws.sv_sigma2_omega(n, s), lin = 0.0;
    for (int t = 0; t < spec.data.T; ++t) {
      const double ov = AuxMixtureTable::var[ind(t)];
      prec += draws.h(n, t, s) * draws.h(n, t, s) / ov;
      lin += draws.h(n, t, s) * (ystar(t) - AuxMixtureTable::mean[ind(t)]) / ov;
    }
    log_post(s) = log_normal_pdf(0.0, lin / prec, 1.0 / prec);
  }
  auto [lpost, nse_post] = detail::log_mean_with_nse(log_post);
  // analytic prior ordinate through the omega hierarchy
  const double lprior = -0.5 * std::log(2.0 * arma::datum::pi) + lgam_ratio +
                        0.5 * std::log(2.0 / spec.prior.sv_s) +
                        std::lgamma(0.5 * (spec.prior.sv_nu + 1.0)) -
                        std::lgamma(0.5 * spec.prior.sv_nu);
  out.log_posterior_ordinate = lpost;
  out.log_prior_ordinate = lprior;
  out.log_sddr = lpost - lprior;
  out.log_nse = nse_post;
  return out;
}

// Homoskedasticity (MSH) or normality (MIX) of shock n: all regime variances
// equal one, evaluated jointly on the sum-to-M simplex.
inline SddrResult sddr_identification_regimes(const PosteriorDraws& draws, int n) {
  const auto& spec = draws.spec;
  if (!family_is_regime(spec.family))
    throw std::invalid_argument("regime-variance restriction needs an MSH or MIX model");
  if (n < 0 || n >= spec.data.N) throw std::invalid_argument("shock index out of range");
  const int M = spec.M;
  if (M == 1) throw std::invalid_argument("the restriction is vacuous for M = 1");
  if (M > 4)
    throw std::invalid_argument(
        "the joint regime-variance ordinate uses nested quadrature, supported for M <= 4");

  SddrResult out;
  out.hypothesis = "sigma2_regime row " + std::to_string(n + 1) + " = (1,...,1)";
  // the nested quadrature is the cost driver above M = 2; thin the draws there
  const int S_all = draws.n_draws();
  const int limit = M <= 2 ? S_all : (M == 3 ? 400 : 50);
  const int stride = std::max(1, S_all / limit);
  const int S = S_all / stride;
  const double e_sigma = spec.prior.e_sigma;
  arma::vec log_post(S);
  for (int si = 0; si < S; ++si) {
    const int s = si * stride;
    arma::vec alpha(M, arma::fill::value(e_sigma));
    arma::vec beta(M, arma::fill::zeros);
    if (!draws.prior_only) {
      const arma::mat u = draws.B.slice(s) * (spec.data.Y - draws.A.slice(s) * spec.data.X);
      for (int t = 0; t < spec.data.T; ++t) {
        const int m = static_cast<int>(draws.path(t, s));
        alpha(m) -= 0.5;
        beta(m) += u(n, t) * u(n, t) / (2.0 * M);
      }
    }
    double lf_center = 0;
    for (int m = 0; m < M; ++m)
      lf_center += (alpha(m) - 1.0) * std::log(1.0 / M) - beta(m) * M;
    log_post(si) = lf_center - detail::log_simplex_kernel_mass(alpha, beta, 1.0);
  }
  auto [lpost, nse_post] = detail::log_mean_with_nse(log_post);
  const double lprior = std::lgamma(M * e_sigma) - M * std::lgamma(e_sigma) +
                        (e_sigma - 1.0) * M * std::log(1.0 / M);
  out.log_posterior_ordinate = lpost;
  out.log_prior_ordinate = lprior;
  out.log_sddr = lpost - lprior;
  out.log_nse = nse_post;
  return out;
}

// Normality of shock n in the Student-t model: nu -> infinity, evaluated as
// lambda = 1/(nu-1) = 0 with a reflection-corrected kernel density.
inline SddrResult sddr_identification_t(const PosteriorDraws& draws, int n) {
  const auto& spec = draws.spec;
  if (spec.family != Family::student_t)
    throw std::invalid_argument("the normality restriction needs the Student-t model");
  if (n < 0 || n >= spec.data.N) throw std::invalid_argument("shock index out of range");
  const int S = draws.n_draws();
  if (S < 500)
    throw std::invalid_argument(
        "the boundary ordinate needs at least 500 retained draws; run a longer chain");

  SddrResult out;
  out.hypothesis = "nu_" + std::to_string(n + 1) + " -> infinity";
  arma::vec lam(S);
  for (int s = 0; s < S; ++s) lam(s) = 1.0 / (draws.t_nu(n, s) - 1.0);
  const double sd = arma::stddev(lam);
  const double iqr = quantile(lam, 0.75) - quantile(lam, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0)) spread = std::max(sd, 1e-8);
  const double h = 0.9 * spread * std::pow(static_cast<double>(S), -0.2);
  // reflection at the boundary: f(0) = mean of 2 phi(lam / h) / h
  arma::vec vals(S);
  for (int s = 0; s < S; ++s)
    vals(s) = 2.0 * std::exp(log_normal_pdf(lam(s), 0.0, h * h));
  const double post = arma::mean(vals);
  const double nse = batch_means_nse(vals, 20);
  out.log_posterior_ordinate = std::log(post);
  out.log_prior_ordinate = 0.0;  // induced prior on lambda is uniform on (0,1)
  out.log_sddr = out.log_posterior_ordinate;
  out.log_nse = nse / post;
  return out;
}

struct IdentificationVerdict {
  std::vector<SddrResult> shocks;
  bool globally_identified = false;
  int n_favoring_restriction = 0;
};

// Runs the family's per-shock identification test; the system is globally
// identified iff at most one shock favors its homoskedasticity/normality
// restriction.
inline IdentificationVerdict verify_identification(const PosteriorDraws& draws,
                                                   std::uint64_t seed = 0x1de5) {
  IdentificationVerdict out;
  const int N = draws.spec.data.N;
  for (int n = 0; n < N; ++n) {
    switch (draws.spec.family) {
      case Family::sv:
        out.shocks.push_back(sddr_identification_sv(draws, n, seed + n));
        break;
      case Family::msh:
      case Family::msh_sparse:
      case Family::mix:
      case Family::mix_sparse:
        out.shocks.push_back(sddr_identification_regimes(draws, n));
        break;
      case Family::student_t:
        out.shocks.push_back(sddr_identification_t(draws, n));
        break;
      default:
        throw std::invalid_argument(
            "identification verification needs a heteroskedastic or non-normal model");
    }
  }
  for (const auto& s : out.shocks)
    if (s.log_sddr > 0.0) ++out.n_favoring_restriction;
  out.globally_identified = out.n_favoring_restriction <= 1;
  return out;
}

}  // namespace bsve
