#pragma once

#include <armadillo>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsve/types.hpp"
#include "bsve/util.hpp"

namespace bsve {

// Stacks lagged observations over deterministic terms. `deterministic` is
// D' x T0 (possibly empty); a constant row is prepended unless row 0 already
// is one, so the constant is always the first deterministic entry.
inline TimeSeriesData build_design_matrices(const arma::mat& raw, int p,
                                            const arma::mat& deterministic = arma::mat()) {
  if (p < 1) throw std::invalid_argument("lag order must be >= 1");
  if (!raw.is_finite()) throw std::invalid_argument("data contain non-finite values");
  const int T0 = static_cast<int>(raw.n_rows);
  const int N = static_cast<int>(raw.n_cols);
  if (N < 1) throw std::invalid_argument("data must contain at least one variable");

  arma::mat det = deterministic;
  if (!det.is_empty() && static_cast<int>(det.n_cols) != T0)
    throw std::invalid_argument("deterministic terms must have one column per observation");
  if (!det.is_finite()) throw std::invalid_argument("deterministic terms contain non-finite values");
  const bool has_constant = !det.is_empty() && arma::all(det.row(0) == 1.0);
  if (!has_constant) det = arma::join_vert(arma::ones<arma::rowvec>(T0), det);
  const int D = static_cast<int>(det.n_rows);

  const int K = N * p + D;
  if (T0 <= K + p)
    throw std::invalid_argument("insufficient observations: need T0 > N p + D + p");
  const int T = T0 - p;

  TimeSeriesData out;
  out.raw = raw;
  out.N = N;
  out.p = p;
  out.D = D;
  out.T = T;
  out.Y = raw.rows(p, T0 - 1).t();
  out.X.set_size(K, T);
  for (int t = 0; t < T; ++t) {
    for (int l = 1; l <= p; ++l)
      out.X.col(t).subvec((l - 1) * N, l * N - 1) = raw.row(p + t - l).t();
    out.X.col(t).subvec(N * p, K - 1) = det.col(p + t);
  }
  return out;
}

// Lower-triangular structural matrix, unrestricted autoregressive rows.
inline RestrictionPattern default_restrictions(int N, int K) {
  if (N < 1 || K < 1) throw std::invalid_argument("default_restrictions: invalid dimensions");
  RestrictionPattern out;
  out.VA.set_size(N);
  out.VB.set_size(N);
  for (int n = 0; n < N; ++n) {
    out.VA(n) = arma::eye(K, K);
    out.VB(n) = arma::eye(n + 1, N);  // first n+1 columns free
  }
  return out;
}

// Builds a pattern from 0/1 free-coefficient masks (1 = estimated).
inline RestrictionPattern restrictions_from_masks(const arma::mat& B_mask,
                                                  const arma::mat& A_mask) {
  const int N = static_cast<int>(B_mask.n_rows);
  if (static_cast<int>(B_mask.n_cols) != N)
    throw std::invalid_argument("structural mask must be square");
  if (static_cast<int>(A_mask.n_rows) != N)
    throw std::invalid_argument("autoregressive mask must have one row per equation");
  RestrictionPattern out;
  out.VA.set_size(N);
  out.VB.set_size(N);
  const auto selector = [](const arma::rowvec& mask) {
    const arma::uvec idx = arma::find(mask != 0.0);
    if (idx.is_empty())
      throw std::invalid_argument("each equation needs at least one free element");
    arma::mat V(idx.n_elem, mask.n_elem, arma::fill::zeros);
    for (arma::uword r = 0; r < idx.n_elem; ++r) V(r, idx(r)) = 1.0;
    return V;
  };
  for (int n = 0; n < N; ++n) {
    out.VB(n) = selector(B_mask.row(n));
    out.VA(n) = selector(A_mask.row(n));
  }
  return out;
}

// Prior mean and scale of the autoregressive rows: unit first own lag for
// flagged variables, scale decaying as lag^{-2}, variance 100 on
// deterministic terms.
inline std::pair<arma::mat, arma::vec> minnesota_prior_defaults(int N, int p, int D,
                                                                const arma::uvec& unit_root) {
  if (static_cast<int>(unit_root.n_elem) != N)
    throw std::invalid_argument("minnesota_prior_defaults: flag length must equal N");
  const int K = N * p + D;
  arma::mat mean(K, N, arma::fill::zeros);
  for (int n = 0; n < N; ++n)
    if (unit_root(n)) mean(n, n) = 1.0;
  arma::vec scale(K);
  for (int l = 1; l <= p; ++l)
    scale.subvec((l - 1) * N, l * N - 1).fill(1.0 / (static_cast<double>(l) * l));
  scale.subvec(N * p, K - 1).fill(100.0);
  return {mean, scale};
}

inline PriorSpec default_prior(const TimeSeriesData& data, const RestrictionPattern& restr,
                               const arma::uvec& unit_root) {
  PriorSpec prior;
  auto [mean, scale] = minnesota_prior_defaults(data.N, data.p, data.D, unit_root);
  prior.A_mean = mean;
  prior.A_scale_diag = scale;
  prior.nu_B = static_cast<double>(data.N);
  prior.B_scale.set_size(data.N);
  for (int n = 0; n < data.N; ++n) prior.B_scale(n) = arma::eye(restr.VB(n).n_rows, restr.VB(n).n_rows);
  return prior;
}

inline const ModelSpec& validate_specification(const ModelSpec& spec) {
  const auto& d = spec.data;
  const int N = d.N, K = d.K();
  if (N < 1 || d.T < 1) throw std::invalid_argument("specification has empty data");
  if (static_cast<int>(d.Y.n_rows) != N || static_cast<int>(d.Y.n_cols) != d.T ||
      static_cast<int>(d.X.n_rows) != K || static_cast<int>(d.X.n_cols) != d.T)
    throw std::invalid_argument("design matrices are inconsistent with stated dimensions");
  if (d.T < K + 1) throw std::invalid_argument("too few observations: need T >= N p + D + 1");
  if (!d.Y.is_finite() || !d.X.is_finite())
    throw std::invalid_argument("design matrices contain non-finite values");

  if (spec.restrictions.n_eq() != N || static_cast<int>(spec.restrictions.VA.n_elem) != N)
    throw std::invalid_argument("restriction pattern must cover every equation");
  for (int n = 0; n < N; ++n) {
    const arma::mat& VA = spec.restrictions.VA(n);
    const arma::mat& VB = spec.restrictions.VB(n);
    if (static_cast<int>(VA.n_cols) != K || VA.n_rows < 1 || static_cast<int>(VA.n_rows) > K)
      throw std::invalid_argument("autoregressive selection matrix has invalid shape");
    if (static_cast<int>(VB.n_cols) != N || VB.n_rows < 1 || static_cast<int>(VB.n_rows) > N)
      throw std::invalid_argument("structural selection matrix has invalid shape");
    const arma::uvec ia = RestrictionPattern::selected(VA);
    const arma::uvec ib = RestrictionPattern::selected(VB);
    if (arma::uvec(arma::unique(ia)).n_elem != ia.n_elem ||
        arma::uvec(arma::unique(ib)).n_elem != ib.n_elem)
      throw std::invalid_argument("selection rows must pick distinct elements");
  }

  const auto& pr = spec.prior;
  if (static_cast<int>(pr.A_mean.n_rows) != K || static_cast<int>(pr.A_mean.n_cols) != N)
    throw std::invalid_argument("prior mean matrix must be K x N");
  if (static_cast<int>(pr.A_scale_diag.n_elem) != K || arma::any(pr.A_scale_diag <= 0.0))
    throw std::invalid_argument("prior scale diagonal must be positive with K entries");
  if (pr.nu_B < static_cast<double>(N))
    throw std::invalid_argument("structural shape parameter requires nu_B >= N");
  for (double v : {pr.nu_A, pr.a_A, pr.s_sA, pr.nu_sA, pr.nu_b, pr.a_B, pr.s_sB, pr.nu_sB,
                   pr.sv_a_v, pr.sv_a_sigma, pr.sv_s, pr.sv_nu, pr.e_sigma, pr.e, pr.e0,
                   pr.sparse_s_e, pr.sparse_nu_e})
    if (!(v > 0.0)) throw std::invalid_argument("prior constants must be strictly positive");
  if (static_cast<int>(pr.B_scale.n_elem) != N)
    throw std::invalid_argument("structural prior needs one scale matrix per equation");
  for (int n = 0; n < N; ++n) {
    const arma::uword r = spec.restrictions.VB(n).n_rows;
    if (pr.B_scale(n).n_rows != r || pr.B_scale(n).n_cols != r)
      throw std::invalid_argument("structural scale matrix size must match free elements");
    if (!pr.B_scale(n).is_sympd())
      throw std::invalid_argument("structural scale matrix must be positive definite");
  }

  if (family_is_regime(spec.family)) {
    if (spec.M < 2) throw std::invalid_argument("regime families require M >= 2");
    if (spec.M * effective_min_occupancy(spec) > d.T)
      throw std::invalid_argument(
          "occupancy floor unattainable: M regimes cannot each hold the required share of T");
  } else if (spec.M != 0) {
    throw std::invalid_argument("M is only meaningful for regime families");
  }
  if (static_cast<int>(spec.unit_root.n_elem) != N)
    throw std::invalid_argument("unit-root flags must have one entry per variable");
  return spec;
}

// Assembles a validated specification with default identification and priors.
inline ModelSpec make_model_spec(const arma::mat& raw, int p, Family family, int M = 0,
                                 const arma::mat& deterministic = arma::mat(),
                                 std::vector<std::string> var_names = {}) {
  ModelSpec spec;
  spec.data = build_design_matrices(raw, p, deterministic);
  spec.restrictions = default_restrictions(spec.data.N, spec.data.K());
  spec.unit_root = arma::ones<arma::uvec>(spec.data.N);
  spec.prior = default_prior(spec.data, spec.restrictions, spec.unit_root);
  spec.family = family;
  if (family_is_regime(family)) spec.M = M > 0 ? M : (family_is_sparse(family) ? 20 : 2);
  spec.var_names = std::move(var_names);
  if (spec.var_names.empty())
    for (int n = 0; n < spec.data.N; ++n) spec.var_names.push_back("y" + std::to_string(n + 1));
  validate_specification(spec);
  return spec;
}

// Deterministic starting point for the Gibbs chain.
inline ParameterState init_state(const ModelSpec& spec) {
  const int N = spec.data.N, K = spec.data.K(), T = spec.data.T, M = spec.M;
  ParameterState st;
  st.A.set_size(N, K);
  st.B0.zeros(N, N);
  for (int n = 0; n < N; ++n) {
    const arma::uvec ia = RestrictionPattern::selected(spec.restrictions.VA(n));
    arma::rowvec row(K, arma::fill::zeros);
    for (arma::uword r = 0; r < ia.n_elem; ++r) row(ia(r)) = spec.prior.A_mean(ia(r), n);
    st.A.row(n) = row;
    const arma::uvec ib = RestrictionPattern::selected(spec.restrictions.VB(n));
    bool diag_free = false;
    for (arma::uword r = 0; r < ib.n_elem; ++r)
      if (static_cast<int>(ib(r)) == n) {
        st.B0(n, n) = 1.0;
        diag_free = true;
      }
    if (!diag_free) st.B0(n, ib(0)) = 1.0;
  }
  st.gamma_A.set_size(N);
  st.gamma_A.fill(spec.prior.s_sA / spec.prior.nu_sA);
  st.s_An.set_size(N);
  st.s_An.fill(spec.prior.s_sA / spec.prior.nu_sA);
  st.s_A = spec.prior.s_sA / spec.prior.nu_sA;
  st.gamma_B.ones(N);
  st.s_Bn.ones(N);
  st.s_B = 1.0;
  st.sigma2.ones(N, T);

  if (family_is_sv(spec.family)) {
    st.sv.h.zeros(N, T);
    st.sv.rho.zeros(N);
    st.sv.omega.zeros(N);
    st.sv.sigma2_omega.ones(N);
    st.sv.s_sigma = spec.prior.sv_s;
    st.sv.sigma_v2.ones(N);
    st.sv.s_v = spec.prior.sv_s;
  }
  if (family_is_regime(spec.family)) {
    st.regime.path.set_size(T);
    for (int t = 0; t < T; ++t) st.regime.path(t) = t % M;
    st.regime.log_P = arma::log(arma::mat(M, M, arma::fill::value(1.0 / M)));
    st.regime.log_pi0 = arma::log(arma::vec(M, arma::fill::value(1.0 / M)));
    st.regime.sigma2_regime.ones(N, M);
    st.regime.e = spec.prior.e;
  }
  if (spec.family == Family::student_t) {
    st.st.nu = arma::vec(N, arma::fill::value(10.0));
    st.st.mh_log_scale = arma::vec(N, arma::fill::value(std::log(0.5)));
    st.st.mh_draws.zeros(N);
    st.st.mh_accepts.zeros(N);
  }
  return st;
}

// Structural-invariant check used by tests and the per-draw check mode.
inline void validate_state(const ParameterState& st, const ModelSpec& spec,
                           double tol = 1e-12) {
  const int N = spec.data.N, K = spec.data.K(), T = spec.data.T;
  if (static_cast<int>(st.A.n_rows) != N || static_cast<int>(st.A.n_cols) != K ||
      static_cast<int>(st.B0.n_rows) != N || static_cast<int>(st.B0.n_cols) != N)
    throw numerical_error("state dimensions inconsistent with specification");
  for (int n = 0; n < N; ++n) {
    const arma::uvec ia = RestrictionPattern::selected(spec.restrictions.VA(n));
    const arma::uvec ib = RestrictionPattern::selected(spec.restrictions.VB(n));
    arma::rowvec arow = st.A.row(n);
    for (arma::uword r = 0; r < ia.n_elem; ++r) arow(ia(r)) = 0.0;
    if (arma::abs(arow).max() > 0.0)
      throw numerical_error("autoregressive restriction pattern violated");
    arma::rowvec brow = st.B0.row(n);
    for (arma::uword r = 0; r < ib.n_elem; ++r) brow(ib(r)) = 0.0;
    if (arma::abs(brow).max() > 0.0)
      throw numerical_error("structural restriction pattern violated");
  }
  if (arma::any(st.gamma_A <= 0.0) || arma::any(st.gamma_B <= 0.0) ||
      arma::any(st.s_An <= 0.0) || arma::any(st.s_Bn <= 0.0) || st.s_A <= 0.0 || st.s_B <= 0.0)
    throw numerical_error("shrinkage hyper-parameters must be positive");
  if (static_cast<int>(st.sigma2.n_rows) != N || static_cast<int>(st.sigma2.n_cols) != T ||
      arma::any(arma::vectorise(st.sigma2) <= 0.0))
    throw numerical_error("conditional variances must be positive N x T");
  if (family_is_sv(spec.family)) {
    if (arma::any(arma::abs(st.sv.rho) >= 1.0))
      throw numerical_error("log-volatility autoregression must be stationary");
  }
  if (family_is_regime(spec.family)) {
    const arma::mat P = st.regime.P();
    for (int m = 0; m < spec.M; ++m)
      if (std::abs(arma::accu(P.row(m)) - 1.0) > 1e-8)
        throw numerical_error("transition rows must sum to one");
    if (std::abs(arma::accu(st.regime.pi0()) - 1.0) > 1e-8)
      throw numerical_error("initial-state probabilities must sum to one");
    for (int n = 0; n < N; ++n)
      if (std::abs(arma::accu(st.regime.sigma2_regime.row(n)) - spec.M) > tol * spec.M * 100)
        throw numerical_error("regime variances must sum to M per equation");
  }
  if (spec.family == Family::student_t && arma::any(st.st.nu <= 2.0))
    throw numerical_error("degrees of freedom must exceed 2");
}

}  // namespace bsve
