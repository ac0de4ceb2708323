#pragma once

#include <armadillo>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bsve/random.hpp"
#include "bsve/types.hpp"
#include "bsve/util.hpp"
#include "bsve/volatility.hpp"

namespace bsve {

// Draw-indexed impulse responses; responses[s](i, j, h) is the response of
// variable i to structural shock j at horizon h under draw s.
struct ImpulseResponseArray {
  std::vector<arma::cube> responses;
  int horizon = 0;
  int n_draws() const { return static_cast<int>(responses.size()); }
};

struct HistoricalDecomposition {
  std::vector<arma::cube> contributions;  // per draw: (i, j, t) shock-j contribution
  arma::cube remainder;                   // N x T x S deterministic + pre-sample part
};

struct ForecastResult {
  arma::cube draws;        // N x H x S predictive draws
  arma::mat conditional;   // N x H projections, NaN marks free entries
};

namespace detail {

// reduced-form moving-average coefficients Phi_0..Phi_H
inline std::vector<arma::mat> ma_coefficients(const arma::mat& A, int N, int p, int H) {
  std::vector<arma::mat> phi(H + 1);
  phi[0] = arma::eye(N, N);
  for (int h = 1; h <= H; ++h) {
    arma::mat acc(N, N, arma::fill::zeros);
    for (int j = 1; j <= std::min(h, p); ++j)
      acc += A.cols((j - 1) * N, j * N - 1) * phi[h - j];
    phi[h] = acc;
  }
  return phi;
}

inline arma::mat draw_B0_inv(const PosteriorDraws& draws, int s) {
  arma::mat out;
  if (!arma::inv(out, draws.B.slice(s)))
    throw numerical_error("draw " + std::to_string(s) + ": singular structural matrix");
  return out;
}

// expected conditional variance of each shock k steps after the sample end
inline arma::vec forecast_shock_variance(const PosteriorDraws& draws, int s, int k) {
  const int N = draws.spec.data.N;
  switch (draws.spec.family) {
    case Family::homo:
    case Family::student_t:  // unit marginal variance by construction
      return arma::ones(N);
    case Family::sv:
    case Family::sv_centred: {
      arma::vec out(N);
      const bool centred = draws.spec.family == Family::sv_centred;
      for (int n = 0; n < N; ++n) {
        const double rho = draws.sv_rho(n, s);
        const double hT = draws.h(n, draws.spec.data.T - 1, s);
        const double rk = std::pow(rho, k);
        const double acc = (1.0 - std::pow(rho * rho, k)) / (1.0 - rho * rho);
        const double iv = centred ? draws.sv_sigma_v2(n, s) : 1.0;
        const double load = centred ? 1.0 : draws.sv_omega(n, s);
        out(n) = std::exp(load * rk * hT + 0.5 * load * load * iv * acc);
      }
      return out;
    }
    case Family::msh:
    case Family::msh_sparse: {
      arma::vec prob(draws.spec.M, arma::fill::zeros);
      prob(draws.path(draws.spec.data.T - 1, s)) = 1.0;
      const arma::mat P = draws.P.slice(s);
      for (int j = 0; j < k; ++j) prob = P.t() * prob;
      return draws.sigma2_regime.slice(s) * prob;
    }
    case Family::mix:
    case Family::mix_sparse:
      return draws.sigma2_regime.slice(s) * draws.pi0.col(s);
  }
  throw std::logic_error("forecast_shock_variance: unhandled family");
}

}  // namespace detail

// u_t = B0 (y_t - A x_t), per draw.
inline arma::cube compute_structural_shocks(const PosteriorDraws& draws) {
  const auto& d = draws.spec.data;
  arma::cube out(d.N, d.T, draws.n_draws());
  for (int s = 0; s < draws.n_draws(); ++s)
    out.slice(s) = draws.B.slice(s) * (d.Y - draws.A.slice(s) * d.X);
  return out;
}

inline arma::cube compute_fitted_values(const PosteriorDraws& draws) {
  const auto& d = draws.spec.data;
  arma::cube out(d.N, d.T, draws.n_draws());
  for (int s = 0; s < draws.n_draws(); ++s) out.slice(s) = draws.A.slice(s) * d.X;
  return out;
}

inline ImpulseResponseArray compute_impulse_responses(const PosteriorDraws& draws, int H) {
  if (H < 0) throw std::invalid_argument("impulse responses need a horizon >= 0");
  const auto& d = draws.spec.data;
  ImpulseResponseArray out;
  out.horizon = H;
  out.responses.resize(draws.n_draws());
  for (int s = 0; s < draws.n_draws(); ++s) {
    const auto phi = detail::ma_coefficients(draws.A.slice(s), d.N, d.p, H);
    const arma::mat b0inv = detail::draw_B0_inv(draws, s);
    arma::cube resp(d.N, d.N, H + 1);
    for (int h = 0; h <= H; ++h) resp.slice(h) = phi[h] * b0inv;
    out.responses[s] = std::move(resp);
  }
  return out;
}

// Forecast-error variance shares from cumulated squared responses. Shock
// variances are the unit benchmark by default; propagate_variances weights
// each lead with the family's forecasted conditional variance instead.
inline ImpulseResponseArray compute_variance_decompositions(const PosteriorDraws& draws,
                                                            int H,
                                                            bool propagate_variances = false) {
  if (H < 0) throw std::invalid_argument("variance decompositions need a horizon >= 0");
  const auto& d = draws.spec.data;
  ImpulseResponseArray out;
  out.horizon = H;
  out.responses.resize(draws.n_draws());
  for (int s = 0; s < draws.n_draws(); ++s) {
    const auto phi = detail::ma_coefficients(draws.A.slice(s), d.N, d.p, H);
    const arma::mat b0inv = detail::draw_B0_inv(draws, s);
    arma::mat weights(d.N, H + 1, arma::fill::ones);
    if (propagate_variances)
      for (int k = 0; k <= H; ++k)
        weights.col(k) = detail::forecast_shock_variance(draws, s, k + 1);
    std::vector<arma::mat> theta_sq(H + 1);
    for (int h = 0; h <= H; ++h) theta_sq[h] = arma::square(phi[h] * b0inv);
    arma::cube shares(d.N, d.N, H + 1);
    for (int h = 0; h <= H; ++h) {
      // the shock hitting at lead l of the h-step-ahead error carries the
      // variance forecast for date T + h - l
      arma::mat cum(d.N, d.N, arma::fill::zeros);
      for (int l = 0; l <= h; ++l)
        for (int j = 0; j < d.N; ++j)
          cum.col(j) += theta_sq[l].col(j) * weights(j, h - l);
      const arma::vec total = arma::sum(cum, 1);
      shares.slice(h) = cum.each_col() / total;
    }
    out.responses[s] = std::move(shares);
  }
  return out;
}

// y_t split into shock-specific contributions plus one deterministic /
// pre-sample remainder; contributions + remainder reproduce y_t exactly.
inline HistoricalDecomposition compute_historical_decompositions(const PosteriorDraws& draws) {
  const auto& d = draws.spec.data;
  const int N = d.N, T = d.T, S = draws.n_draws();
  HistoricalDecomposition out;
  out.contributions.resize(S);
  out.remainder.set_size(N, T, S);
  for (int s = 0; s < S; ++s) {
    const auto phi = detail::ma_coefficients(draws.A.slice(s), N, d.p, T - 1);
    const arma::mat b0inv = detail::draw_B0_inv(draws, s);
    const arma::mat u = draws.B.slice(s) * (d.Y - draws.A.slice(s) * d.X);
    std::vector<arma::mat> theta(T);
    for (int h = 0; h < T; ++h) theta[h] = phi[h] * b0inv;
    arma::cube contrib(N, N, T, arma::fill::zeros);
    for (int t = 0; t < T; ++t)
      for (int l = 0; l <= t; ++l)
        for (int j = 0; j < N; ++j)
          contrib.slice(t).col(j) += theta[l].col(j) * u(j, t - l);
    for (int t = 0; t < T; ++t)
      out.remainder.slice(s).col(t) = d.Y.col(t) - arma::sum(contrib.slice(t), 1);
    out.contributions[s] = std::move(contrib);
  }
  return out;
}

inline arma::cube compute_conditional_sd(const PosteriorDraws& draws) {
  const auto& d = draws.spec.data;
  arma::cube out(d.N, d.T, draws.n_draws());
  for (int s = 0; s < draws.n_draws(); ++s) out.slice(s) = arma::sqrt(draws.sigma2_draw(s));
  return out;
}

enum class RegimeProbKind { filtered, smoothed, realized };

inline RegimeProbKind parse_regime_prob_kind(const std::string& tag) {
  if (tag == "filtered") return RegimeProbKind::filtered;
  if (tag == "smoothed") return RegimeProbKind::smoothed;
  if (tag == "realized") return RegimeProbKind::realized;
  throw std::invalid_argument("unknown regime probability kind: " + tag);
}

// M x T x S regime membership: exact recursions at each draw's parameters,
// or the realized indicator of the drawn allocation path.
inline arma::cube compute_regime_probabilities(const PosteriorDraws& draws,
                                               RegimeProbKind kind) {
  if (!family_is_regime(draws.spec.family))
    throw std::invalid_argument(
        "regime probabilities are defined for the regime families only");
  const auto& d = draws.spec.data;
  const int M = draws.spec.M, S = draws.n_draws();
  arma::cube out(M, d.T, S, arma::fill::zeros);
  for (int s = 0; s < S; ++s) {
    if (kind == RegimeProbKind::realized) {
      for (int t = 0; t < d.T; ++t) out(draws.path(t, s), t, s) = 1.0;
      continue;
    }
    const arma::mat u = draws.B.slice(s) * (d.Y - draws.A.slice(s) * d.X);
    const arma::mat le = detail::regime_log_emissions(u, draws.sigma2_regime.slice(s));
    arma::mat log_P(M, M), log_pi0(M, 1);
    if (family_is_markov(draws.spec.family)) {
      log_P = arma::log(draws.P.slice(s));
      log_pi0 = arma::log(draws.pi0.col(s));
    } else {
      // allocations are serially independent: the chain has identical rows
      for (int m = 0; m < M; ++m) log_P.row(m) = arma::log(draws.pi0.col(s)).t();
      log_pi0 = arma::log(draws.pi0.col(s));
    }
    arma::mat lpred;
    const arma::mat lf = hmm_log_filter(le, log_P, log_pi0.col(0), lpred);
    out.slice(s) = kind == RegimeProbKind::filtered
                       ? arma::exp(lf)
                       : arma::exp(hmm_log_smooth(lf, lpred, log_P));
  }
  return out;
}

// Simulates the predictive density H periods ahead. Optional conditioning:
// fixed entries of `conditional` (non-NaN) are imposed exactly and the free
// variables are drawn from the implied Gaussian conditional, one horizon at
// a time. Volatility paths are simulated from their own laws.
inline ForecastResult forecast(const PosteriorDraws& draws, int H,
                               const arma::mat& conditional, std::uint64_t seed,
                               const arma::mat& future_deterministic = arma::mat()) {
  if (H < 1) throw std::invalid_argument("forecast horizon must be >= 1");
  const auto& spec = draws.spec;
  const auto& d = spec.data;
  const int N = d.N, p = d.p, S = draws.n_draws();
  if (!conditional.is_empty()) {
    if (static_cast<int>(conditional.n_rows) != N ||
        static_cast<int>(conditional.n_cols) != H)
      throw std::invalid_argument("conditional projections must be N x H");
    for (const double v : conditional)
      if (std::isinf(v)) throw std::invalid_argument("projections must be finite or NaN");
  }
  arma::mat det_future;
  if (d.D > 1) {
    if (static_cast<int>(future_deterministic.n_rows) != d.D - 1 ||
        static_cast<int>(future_deterministic.n_cols) < H)
      throw std::invalid_argument(
          "forecasting with exogenous terms needs their future values ((D-1) x H)");
    det_future = future_deterministic;
  }

  ForecastResult out;
  out.conditional =
      conditional.is_empty() ? arma::mat(N, H, arma::fill::value(arma::datum::nan))
                             : conditional;
  out.draws.set_size(N, H, S);
  Rng rng(seed);

  const int T0 = static_cast<int>(d.raw.n_rows);
  for (int s = 0; s < S; ++s) {
    arma::mat hist = d.raw.rows(T0 - p, T0 - 1).t();  // N x p, newest last
    const arma::mat b0inv = detail::draw_B0_inv(draws, s);
    const arma::mat& A = draws.A.slice(s);

    // family-specific volatility forward state
    arma::vec hstate(N, arma::fill::zeros);
    int regime = 0;
    if (family_is_sv(spec.family))
      for (int n = 0; n < N; ++n) hstate(n) = draws.h(n, d.T - 1, s);
    if (family_is_regime(spec.family)) regime = static_cast<int>(draws.path(d.T - 1, s));

    for (int k = 0; k < H; ++k) {
      arma::vec sigma2(N, arma::fill::ones);
      switch (spec.family) {
        case Family::homo:
          break;
        case Family::sv:
        case Family::sv_centred: {
          const bool centred = spec.family == Family::sv_centred;
          for (int n = 0; n < N; ++n) {
            const double isd = centred ? std::sqrt(draws.sv_sigma_v2(n, s)) : 1.0;
            hstate(n) = draws.sv_rho(n, s) * hstate(n) + isd * rng.normal();
            const double lv =
                centred ? hstate(n) : draws.sv_omega(n, s) * hstate(n);
            sigma2(n) = std::exp(std::clamp(lv, -700.0, 700.0));
          }
          break;
        }
        case Family::msh:
        case Family::msh_sparse:
          regime = rng.categorical(draws.P.slice(s).row(regime).t());
          sigma2 = draws.sigma2_regime.slice(s).col(regime);
          break;
        case Family::mix:
        case Family::mix_sparse:
          regime = rng.categorical(draws.pi0.col(s));
          sigma2 = draws.sigma2_regime.slice(s).col(regime);
          break;
        case Family::student_t:
          for (int n = 0; n < N; ++n)
            sigma2(n) = rng.inv_gamma2(draws.t_nu(n, s) - 2.0, draws.t_nu(n, s));
          break;
      }

      arma::vec x(d.K());
      for (int l = 1; l <= p; ++l)
        x.subvec((l - 1) * N, l * N - 1) = hist.col(p - l);
      x(N * p) = 1.0;
      for (int j = 1; j < d.D; ++j) x(N * p + j) = det_future(j - 1, k);

      const arma::vec mean = A * x;
      const arma::mat cov = b0inv * arma::diagmat(sigma2) * b0inv.t();
      arma::vec y(N);
      const arma::uvec fixed = arma::find_finite(out.conditional.col(k));
      const arma::uvec free = arma::find_nonfinite(out.conditional.col(k));
      if (fixed.is_empty()) {
        const arma::vec u = arma::sqrt(sigma2) % rng.normal_vec(N);
        y = mean + b0inv * u;
      } else if (free.is_empty()) {
        y = out.conditional.col(k);
      } else {
        const arma::vec proj = out.conditional.col(k);
        const arma::mat c_ff = cov.submat(free, free);
        const arma::mat c_fc = cov.submat(free, fixed);
        const arma::mat c_cc = cov.submat(fixed, fixed);
        const arma::mat gain = arma::solve(c_cc, c_fc.t()).t();
        const arma::vec cmean =
            mean.elem(free) + gain * (proj.elem(fixed) - mean.elem(fixed));
        const arma::mat ccov = c_ff - gain * c_fc.t();
        const arma::mat L = arma::chol(0.5 * (ccov + ccov.t()) +
                                           1e-14 * arma::eye(free.n_elem, free.n_elem),
                                       "lower");
        y.elem(fixed) = proj.elem(fixed);
        y.elem(free) = cmean + L * rng.normal_vec(free.n_elem);
      }
      out.draws.slice(s).col(k) = y;
      if (p > 1) hist.cols(0, p - 2) = hist.cols(1, p - 1);
      hist.col(p - 1) = y;
    }
  }
  return out;
}

inline ForecastResult forecast(const PosteriorDraws& draws, int H, std::uint64_t seed) {
  return forecast(draws, H, arma::mat(), seed);
}

// Equal-tail summary of a draw-indexed array over its last dimension.
struct QuantileSummary {
  arma::vec probs;
  std::vector<arma::mat> values;  // one matrix per probability level
};

inline QuantileSummary summarize_draws(const arma::cube& draws,
                                       const arma::vec& probs = {0.05, 0.5, 0.95}) {
  QuantileSummary out;
  out.probs = probs;
  out.values.assign(probs.n_elem, arma::mat(draws.n_rows, draws.n_cols));
  for (arma::uword i = 0; i < draws.n_rows; ++i)
    for (arma::uword j = 0; j < draws.n_cols; ++j) {
      const arma::vec cell = draws.tube(i, j);
      for (arma::uword q = 0; q < probs.n_elem; ++q)
        out.values[q](i, j) = quantile(cell, probs(q));
    }
  return out;
}

}  // namespace bsve
