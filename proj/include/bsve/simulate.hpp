#pragma once

#include <armadillo>

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "bsve/model.hpp"
#include "bsve/random.hpp"
#include "bsve/types.hpp"

namespace bsve {

// Data-generating configuration. Empty members are replaced by stable
// defaults sized from (N, p, M).
struct SimulationConfig {
  int N = 2, p = 1, T0 = 200;
  Family family = Family::homo;
  int M = 2;
  arma::mat A;   // N x (N p + 1), constant column last
  arma::mat B0;  // N x N
  arma::vec rho, omega;      // SV (non-centred)
  arma::vec sigma_v2;        // SV (centred)
  arma::mat P;               // M x M transitions
  arma::vec pi0;             // M
  arma::mat sigma2_regime;   // N x M, normalized to sum M per row
  arma::vec nu;              // Student-t degrees of freedom
  bool allow_explosive = false;
};

// Realized latent quantities of one simulated sample.
struct SimulationTruth {
  SimulationConfig cfg;
  arma::mat shocks;   // N x T structural shocks u_t
  arma::mat sigma2;   // N x T realized conditional variances
  arma::mat h;        // N x T log-volatility (SV)
  arma::uvec path;    // T regime labels (regime families)
};

inline double companion_spectral_radius(const arma::mat& A, int N, int p) {
  arma::mat comp(N * p, N * p, arma::fill::zeros);
  comp.rows(0, N - 1) = A.cols(0, N * p - 1);
  if (p > 1) comp.submat(N, 0, N * p - 1, N * (p - 1) - 1) = arma::eye(N * (p - 1), N * (p - 1));
  return arma::abs(arma::eig_gen(comp)).max();
}

inline void fill_simulation_defaults(SimulationConfig& cfg) {
  const int N = cfg.N, p = cfg.p, M = cfg.M;
  const int K = N * p + 1;
  if (cfg.A.is_empty()) {
    cfg.A.zeros(N, K);
    cfg.A.submat(0, 0, N - 1, N - 1) = 0.5 * arma::eye(N, N);
  }
  if (cfg.B0.is_empty()) {
    cfg.B0 = arma::eye(N, N);
    for (int n = 1; n < N; ++n) cfg.B0(n, n - 1) = -0.3;
  }
  if (family_is_sv(cfg.family)) {
    if (cfg.rho.is_empty()) cfg.rho = arma::vec(N, arma::fill::value(0.9));
    if (cfg.omega.is_empty()) cfg.omega = arma::vec(N, arma::fill::value(0.6));
    if (cfg.sigma_v2.is_empty()) cfg.sigma_v2 = arma::vec(N, arma::fill::value(0.36));
  }
  if (family_is_regime(cfg.family)) {
    if (cfg.P.is_empty()) {
      cfg.P = arma::mat(M, M, arma::fill::value(0.1 / std::max(1, M - 1)));
      cfg.P.diag().fill(0.9);
      cfg.P.each_col() /= arma::sum(cfg.P, 1);
    }
    if (cfg.pi0.is_empty()) cfg.pi0 = arma::vec(M, arma::fill::value(1.0 / M));
    if (cfg.sigma2_regime.is_empty()) {
      cfg.sigma2_regime.set_size(cfg.N, M);
      for (int m = 0; m < M; ++m) cfg.sigma2_regime.col(m).fill(std::pow(4.0, m));
    }
    for (int n = 0; n < cfg.N; ++n)
      cfg.sigma2_regime.row(n) *= M / arma::accu(cfg.sigma2_regime.row(n));
  }
  if (cfg.family == Family::student_t && cfg.nu.is_empty())
    cfg.nu = arma::vec(N, arma::fill::value(5.0));
}

// Draws a sample exactly from the model equations: the lag recursion, the
// structural map B0 eps = u, and the active family's variance law.
inline std::pair<arma::mat, SimulationTruth> simulate_data(SimulationConfig cfg,
                                                           std::uint64_t seed) {
  fill_simulation_defaults(cfg);
  const int N = cfg.N, p = cfg.p, T0 = cfg.T0, T = T0 - p;
  if (T < 1) throw std::invalid_argument("simulate_data: T0 must exceed the lag order");
  if (static_cast<int>(cfg.A.n_rows) != N || static_cast<int>(cfg.A.n_cols) != N * p + 1)
    throw std::invalid_argument("simulate_data: A must be N x (N p + 1)");
  const double radius = companion_spectral_radius(cfg.A, N, p);
  if (radius >= 1.0 && !cfg.allow_explosive)
    throw std::invalid_argument("simulate_data: explosive autoregression (spectral radius " +
                                std::to_string(radius) + "); set allow_explosive to override");
  Rng rng(seed);

  SimulationTruth truth;
  truth.sigma2.set_size(N, T);
  truth.h.zeros(N, T);
  switch (cfg.family) {
    case Family::homo:
      truth.sigma2.ones();
      break;
    case Family::sv:
      for (int n = 0; n < N; ++n) {
        double hprev = 0.0;
        for (int t = 0; t < T; ++t) {
          hprev = cfg.rho(n) * hprev + rng.normal();
          truth.h(n, t) = hprev;
          truth.sigma2(n, t) = std::exp(cfg.omega(n) * hprev);
        }
      }
      break;
    case Family::sv_centred:
      for (int n = 0; n < N; ++n) {
        double hprev = 0.0;
        const double sd = std::sqrt(cfg.sigma_v2(n));
        for (int t = 0; t < T; ++t) {
          hprev = cfg.rho(n) * hprev + sd * rng.normal();
          truth.h(n, t) = hprev;
          truth.sigma2(n, t) = std::exp(hprev);
        }
      }
      break;
    case Family::msh:
    case Family::msh_sparse: {
      truth.path.set_size(T);
      int s = rng.categorical(cfg.pi0);
      for (int t = 0; t < T; ++t) {
        if (t > 0) s = rng.categorical(cfg.P.row(s).t());
        truth.path(t) = s;
        truth.sigma2.col(t) = cfg.sigma2_regime.col(s);
      }
      break;
    }
    case Family::mix:
    case Family::mix_sparse: {
      truth.path.set_size(T);
      for (int t = 0; t < T; ++t) {
        const int s = rng.categorical(cfg.pi0);
        truth.path(t) = s;
        truth.sigma2.col(t) = cfg.sigma2_regime.col(s);
      }
      break;
    }
    case Family::student_t:
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t)
          truth.sigma2(n, t) = rng.inv_gamma2(cfg.nu(n) - 2.0, cfg.nu(n));
      break;
  }

  truth.shocks.set_size(N, T);
  for (int t = 0; t < T; ++t)
    for (int n = 0; n < N; ++n)
      truth.shocks(n, t) = std::sqrt(truth.sigma2(n, t)) * rng.normal();

  const arma::mat B0_inv = arma::inv(cfg.B0);
  arma::mat raw(T0, N, arma::fill::zeros);  // first p rows are zero pre-sample
  for (int t = 0; t < T; ++t) {
    arma::vec x(N * p + 1);
    for (int l = 1; l <= p; ++l) x.subvec((l - 1) * N, l * N - 1) = raw.row(p + t - l).t();
    x(N * p) = 1.0;
    raw.row(p + t) = (cfg.A * x + B0_inv * truth.shocks.col(t)).t();
  }
  truth.cfg = cfg;
  return {raw, truth};
}

}  // namespace bsve
