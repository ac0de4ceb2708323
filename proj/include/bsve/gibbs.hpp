#pragma once

#include <armadillo>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

#include "bsve/model.hpp"
#include "bsve/random.hpp"
#include "bsve/types.hpp"
#include "bsve/util.hpp"
#include "bsve/volatility.hpp"

namespace bsve {

// Per-estimation cache of restriction indices, selected regressor blocks and
// prior pieces; X never changes between sweeps.
struct GibbsWorkspace {
  arma::field<arma::uvec> A_idx, B_idx;
  arma::field<arma::mat> W;             // V_An X, r_An x T
  arma::field<arma::vec> A_prior_mean;  // selected entries of the prior mean column
  arma::field<arma::vec> A_prior_scale;
  arma::field<arma::mat> B_scale_inv;

  GibbsWorkspace() = default;
  explicit GibbsWorkspace(const ModelSpec& spec) {
    const int N = spec.data.N;
    A_idx.set_size(N);
    B_idx.set_size(N);
    W.set_size(N);
    A_prior_mean.set_size(N);
    A_prior_scale.set_size(N);
    B_scale_inv.set_size(N);
    for (int n = 0; n < N; ++n) {
      A_idx(n) = RestrictionPattern::selected(spec.restrictions.VA(n));
      B_idx(n) = RestrictionPattern::selected(spec.restrictions.VB(n));
      W(n) = spec.data.X.rows(A_idx(n));
      const arma::vec mean_col = spec.prior.A_mean.col(n);
      A_prior_mean(n) = mean_col.elem(A_idx(n));
      A_prior_scale(n) = arma::vec(spec.prior.A_scale_diag).elem(A_idx(n));
      B_scale_inv(n) = arma::inv_sympd(spec.prior.B_scale(n));
    }
  }
};

namespace detail {

// Cholesky with one diagonal jitter retry; used by both row samplers.
inline arma::mat chol_upper_jittered(arma::mat P, const std::string& who) {
  P = 0.5 * (P + P.t());  // accumulated products are only symmetric up to rounding
  arma::mat U;
  if (arma::chol(U, P)) return U;
  P.diag() += 1e-10;
  if (arma::chol(U, P)) return U;
  throw numerical_error(who + ": conditional precision not positive definite");
}

}  // namespace detail

// Equation-by-equation draw of the autoregressive rows from their conditional
// normals, conditioning each row on the freshest values of the others.
inline void sample_A_rows(ParameterState& st, const ModelSpec& spec, Rng& rng,
                          const GibbsWorkspace& ws) {
  const int N = spec.data.N;
  const arma::mat& Y = spec.data.Y;
  const arma::mat& X = spec.data.X;
  const arma::mat inv_s2 = 1.0 / st.sigma2;
  arma::mat E = Y - st.A * X;
  for (int n = 0; n < N; ++n) {
    const arma::uvec& idx = ws.A_idx(n);
    const arma::mat& W = ws.W(n);
    const arma::vec beta = st.B0.col(n);
    // structural residuals with row n of A removed
    const arma::rowvec keep = E.row(n);
    E.row(n) = Y.row(n);
    const arma::mat Z = st.B0 * E;
    E.row(n) = keep;

    const arma::rowvec c = arma::square(beta).t() * inv_s2;       // 1 x T
    const arma::rowvec rv = beta.t() * (Z % inv_s2);              // 1 x T
    const arma::vec prior_prec = 1.0 / (st.gamma_A(n) * ws.A_prior_scale(n));
    arma::mat P = (W.each_row() % c) * W.t();
    P.diag() += prior_prec;
    const arma::vec rhs = prior_prec % ws.A_prior_mean(n) + W * rv.t();
    const arma::mat U = detail::chol_upper_jittered(P, "sample_A_rows, equation " +
                                                           std::to_string(n + 1));
    const arma::vec mean = arma::solve(arma::trimatu(U),
                                       arma::solve(arma::trimatl(U.t()), rhs));
    const arma::vec draw =
        mean + arma::solve(arma::trimatu(U), rng.normal_vec(idx.n_elem));

    arma::rowvec row(spec.data.K(), arma::fill::zeros);
    for (arma::uword r = 0; r < idx.n_elem; ++r) row(idx(r)) = draw(r);
    st.A.row(n) = row;
    E.row(n) = Y.row(n) - st.A.row(n) * X;
  }
}

inline void sample_A_rows(ParameterState& st, const ModelSpec& spec, Rng& rng) {
  sample_A_rows(st, spec, rng, GibbsWorkspace(spec));
}

// Structural-row draw under the generalised-normal prior: rotate the free
// coefficients into an orthonormal frame aligned with the determinant
// direction, draw the aligned coordinate from its |x|^v exp(-x^2/2) density
// and the rest as standard normals.
inline void sample_B_rows(ParameterState& st, const ModelSpec& spec, Rng& rng,
                          const GibbsWorkspace& ws) {
  const int N = spec.data.N;
  const double nu_det =
      static_cast<double>(spec.data.T) + spec.prior.nu_B - static_cast<double>(N);
  const arma::mat E = spec.data.Y - st.A * spec.data.X;
  for (int n = 0; n < N; ++n) {
    const arma::uvec& idx = ws.B_idx(n);
    const arma::uword r = idx.n_elem;
    const arma::mat Eb = E.rows(idx);
    const arma::rowvec w = 1.0 / st.sigma2.row(n);
    arma::mat P = (Eb.each_row() % w) * Eb.t();
    P += ws.B_scale_inv(n) / st.gamma_B(n);
    const arma::mat U = detail::chol_upper_jittered(P, "sample_B_rows, equation " +
                                                           std::to_string(n + 1));

    arma::vec cof(N);
    if (N == 1) {
      cof(0) = 1.0;
    } else {
      arma::mat others = st.B0;
      others.shed_row(n);
      const arma::mat nullsp = arma::null(others);
      if (nullsp.n_cols != 1)
        throw numerical_error("sample_B_rows: remaining structural rows are rank deficient");
      cof = nullsp.col(0);
    }
    arma::vec d = cof.elem(idx);
    if (arma::norm(d) < 1e-12)
      throw numerical_error(
          "sample_B_rows: restrictions admit only a singular structural matrix");

    arma::vec w1 = arma::solve(arma::trimatl(U.t()), d);
    w1 /= arma::norm(w1);
    const double radial2 = rng.chi2(nu_det + 1.0);
    const double radial = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::sqrt(radial2);
    const arma::vec z = rng.normal_vec(r);
    const arma::vec aligned = radial * w1 + (z - w1 * arma::dot(w1, z));
    const arma::vec b = arma::solve(arma::trimatu(U), aligned);

    arma::rowvec row(N, arma::fill::zeros);
    for (arma::uword k = 0; k < r; ++k) row(idx(k)) = b(k);
    st.B0.row(n) = row;
  }
}

inline void sample_B_rows(ParameterState& st, const ModelSpec& spec, Rng& rng) {
  sample_B_rows(st, spec, rng, GibbsWorkspace(spec));
}

// Three-level local-global shrinkage updates for both parameter groups.
// gamma_scale_mult != 1 is a fault-injection hook used by the sampler
// correctness harness.
inline void sample_hyper_shrinkage(ParameterState& st, const ModelSpec& spec, Rng& rng,
                                   const GibbsWorkspace& ws, double gamma_scale_mult = 1.0) {
  const int N = spec.data.N;
  const auto& pr = spec.prior;
  for (int n = 0; n < N; ++n) {
    const arma::uvec& ia = ws.A_idx(n);
    arma::vec dev(ia.n_elem);
    for (arma::uword k = 0; k < ia.n_elem; ++k)
      dev(k) = st.A(n, ia(k)) - ws.A_prior_mean(n)(k);
    const double qa = arma::accu(arma::square(dev) / ws.A_prior_scale(n));
    st.gamma_A(n) = rng.inv_gamma2(gamma_scale_mult * (st.s_An(n) + qa),
                                   pr.nu_A + static_cast<double>(ia.n_elem));

    const arma::uvec& ib = ws.B_idx(n);
    arma::vec b(ib.n_elem);
    for (arma::uword k = 0; k < ib.n_elem; ++k) b(k) = st.B0(n, ib(k));
    const double qb = arma::as_scalar(b.t() * ws.B_scale_inv(n) * b);
    st.gamma_B(n) =
        rng.inv_gamma2(st.s_Bn(n) + qb, pr.nu_b + static_cast<double>(ib.n_elem));
  }
  for (int n = 0; n < N; ++n) {
    st.s_An(n) = rng.gig(pr.a_A + 0.5 * pr.nu_A, 2.0 / st.s_A + 1.0 / st.gamma_A(n), 0.0);
    st.s_Bn(n) = rng.gig(pr.a_B + 0.5 * pr.nu_b, 2.0 / st.s_B + 1.0 / st.gamma_B(n), 0.0);
  }
  st.s_A = rng.inv_gamma2(pr.s_sA + 2.0 * arma::accu(st.s_An), pr.nu_sA + 2.0 * N * pr.a_A);
  st.s_B = rng.inv_gamma2(pr.s_sB + 2.0 * arma::accu(st.s_Bn), pr.nu_sB + 2.0 * N * pr.a_B);
}

inline void sample_hyper_shrinkage(ParameterState& st, const ModelSpec& spec, Rng& rng) {
  sample_hyper_shrinkage(st, spec, rng, GibbsWorkspace(spec));
}

// Sign normalization against a reference: row n flips iff the n-th column of
// B0^{-1} (the contemporaneous response to shock n) points away from the
// reference column. Likelihood-invariant; the objective decouples per shock.
inline arma::uvec normalisation_flips(const arma::mat& B0, const arma::mat& ref_inv) {
  const arma::mat cur_inv = arma::inv(B0);
  arma::uvec flips(B0.n_rows, arma::fill::zeros);
  for (arma::uword n = 0; n < B0.n_rows; ++n)
    if (arma::dot(cur_inv.col(n), ref_inv.col(n)) < 0.0) flips(n) = 1;
  return flips;
}

inline void normalise_draws(PosteriorDraws& draws, const arma::mat& reference) {
  arma::mat ref_inv;
  if (!arma::inv(ref_inv, reference))
    throw std::invalid_argument("normalise_draws: singular reference matrix");
  for (int s = 0; s < draws.n_draws(); ++s) {
    const arma::uvec flips = normalisation_flips(draws.B.slice(s), ref_inv);
    for (arma::uword n = 0; n < flips.n_elem; ++n)
      if (flips(n)) draws.B.slice(s).row(n) *= -1.0;
  }
}

// One full Gibbs sweep in the fixed order: family variance block, structural
// rows, autoregressive rows, shrinkage hierarchies.
inline void gibbs_sweep(ParameterState& st, const ModelSpec& spec, Rng& rng,
                        const GibbsWorkspace& ws, double gamma_scale_mult = 1.0) {
  const char* step = "update_volatility";
  try {
    update_volatility(st, spec, rng);
    step = "sample_B_rows";
    sample_B_rows(st, spec, rng, ws);
    step = "sample_A_rows";
    sample_A_rows(st, spec, rng, ws);
    step = "sample_hyper_shrinkage";
    sample_hyper_shrinkage(st, spec, rng, ws, gamma_scale_mult);
  } catch (const numerical_error& err) {
    throw numerical_error(std::string("step ") + step + ": " + err.what());
  }
}

struct EstimateOptions {
  bool normalise = true;
  arma::mat reference;      // normalization reference; mean of retained draws if empty
  bool check_draws = false; // validate every stored draw against the state invariants
  std::function<void(int, int)> progress;  // (done, total)
};

namespace detail {

inline void allocate_draws(PosteriorDraws& out, const ModelSpec& spec, int S) {
  const int N = spec.data.N, K = spec.data.K(), T = spec.data.T, M = spec.M;
  out.A.set_size(N, K, S);
  out.B.set_size(N, N, S);
  out.gamma_A.set_size(N, S);
  out.s_An.set_size(N, S);
  out.s_A.set_size(S);
  out.gamma_B.set_size(N, S);
  out.s_Bn.set_size(N, S);
  out.s_B.set_size(S);
  if (family_is_sv(spec.family)) {
    out.h.set_size(N, T, S);
    out.sv_rho.set_size(N, S);
    out.sv_omega.set_size(N, S);
    out.sv_sigma2_omega.set_size(N, S);
    out.sv_sigma_v2.set_size(N, S);
    out.sv_s_sigma.set_size(S);
    out.sv_s_v.set_size(S);
  }
  if (family_is_regime(spec.family)) {
    out.path.set_size(T, S);
    out.P.set_size(M, M, S);
    out.pi0.set_size(M, S);
    out.sigma2_regime.set_size(N, M, S);
    out.dirichlet_e.set_size(S);
  }
  if (spec.family == Family::student_t) {
    out.t_sigma2.set_size(N, T, S);
    out.t_nu.set_size(N, S);
  }
}

inline void store_draw(PosteriorDraws& out, const ParameterState& st, const ModelSpec& spec,
                       int s) {
  out.A.slice(s) = st.A;
  out.B.slice(s) = st.B0;
  out.gamma_A.col(s) = st.gamma_A;
  out.s_An.col(s) = st.s_An;
  out.s_A(s) = st.s_A;
  out.gamma_B.col(s) = st.gamma_B;
  out.s_Bn.col(s) = st.s_Bn;
  out.s_B(s) = st.s_B;
  if (family_is_sv(spec.family)) {
    out.h.slice(s) = st.sv.h;
    out.sv_rho.col(s) = st.sv.rho;
    out.sv_omega.col(s) = st.sv.omega;
    out.sv_sigma2_omega.col(s) = st.sv.sigma2_omega;
    out.sv_sigma_v2.col(s) = st.sv.sigma_v2;
    out.sv_s_sigma(s) = st.sv.s_sigma;
    out.sv_s_v(s) = st.sv.s_v;
  }
  if (family_is_regime(spec.family)) {
    out.path.col(s) = st.regime.path;
    out.P.slice(s) = st.regime.P();
    out.pi0.col(s) = st.regime.pi0();
    out.sigma2_regime.slice(s) = st.regime.sigma2_regime;
    out.dirichlet_e(s) = st.regime.e;
  }
  if (spec.family == Family::student_t) {
    out.t_sigma2.slice(s) = st.sigma2;
    out.t_nu.col(s) = st.st.nu;
  }
}

inline PosteriorDraws run_chain(const ModelSpec& spec, ParameterState state, Rng rng, int S,
                                std::uint64_t seed, std::uint64_t sweeps_before,
                                const EstimateOptions& opts) {
  if (S < 1) throw std::invalid_argument("estimate: sweep count must be positive");
  PosteriorDraws out;
  out.spec = spec;
  out.seed = seed;
  out.sweeps_before = sweeps_before;
  allocate_draws(out, spec, S);
  const GibbsWorkspace ws(spec);
  for (int s = 0; s < S; ++s) {
    try {
      gibbs_sweep(state, spec, rng, ws);
      if (opts.check_draws) validate_state(state, spec);
    } catch (const numerical_error& err) {
      throw numerical_error("estimate: sweep " + std::to_string(s + 1) + ", " + err.what());
    }
    store_draw(out, state, spec, s);
    if (opts.progress && S >= 10 && (s + 1) % (S / 10) == 0) opts.progress(s + 1, S);
  }
  out.last_state = std::move(state);
  out.rng_state = rng.serialize();
  if (opts.normalise) {
    arma::mat ref = opts.reference;
    if (ref.is_empty()) ref = arma::mean(out.B, 2);
    normalise_draws(out, ref);
  }
  return out;
}

}  // namespace detail

// Fresh run: S sweeps from the deterministic starting state.
inline PosteriorDraws estimate(const ModelSpec& spec, int S, std::uint64_t seed,
                               const EstimateOptions& opts = {}) {
  validate_specification(spec);
  return detail::run_chain(spec, init_state(spec), Rng(seed), S, seed, 0, opts);
}

// Continuation: starts from the terminal state and RNG stream of a previous
// run; the previous draws are discarded.
inline PosteriorDraws estimate(const PosteriorDraws& prev, int S,
                               const EstimateOptions& opts = {}) {
  Rng rng;
  rng.deserialize(prev.rng_state);
  return detail::run_chain(prev.spec, prev.last_state, rng, S, prev.seed,
                           prev.sweeps_before + prev.n_draws(), opts);
}

}  // namespace bsve
