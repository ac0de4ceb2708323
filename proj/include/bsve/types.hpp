#pragma once

#include <armadillo>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bsve/util.hpp"

namespace bsve {

enum class Family {
  homo,
  sv,          // stochastic volatility, non-centred
  sv_centred,  // stochastic volatility, centred
  msh,         // Markov-switching heteroskedasticity, stationary
  msh_sparse,
  mix,  // normal mixture, finite
  mix_sparse,
  student_t,
};

inline bool family_is_sv(Family f) { return f == Family::sv || f == Family::sv_centred; }
inline bool family_is_markov(Family f) { return f == Family::msh || f == Family::msh_sparse; }
inline bool family_is_mixture(Family f) { return f == Family::mix || f == Family::mix_sparse; }
inline bool family_is_regime(Family f) { return family_is_markov(f) || family_is_mixture(f); }
inline bool family_is_sparse(Family f) {
  return f == Family::msh_sparse || f == Family::mix_sparse;
}

inline std::string family_name(Family f) {
  switch (f) {
    case Family::homo: return "homo";
    case Family::sv: return "sv";
    case Family::sv_centred: return "sv-centred";
    case Family::msh: return "msh";
    case Family::msh_sparse: return "msh-sparse";
    case Family::mix: return "mix";
    case Family::mix_sparse: return "mix-sparse";
    case Family::student_t: return "t";
  }
  return "unknown";
}

inline Family parse_family(const std::string& tag) {
  if (tag == "homo") return Family::homo;
  if (tag == "sv") return Family::sv;
  if (tag == "sv-centred" || tag == "sv_centred") return Family::sv_centred;
  if (tag == "msh") return Family::msh;
  if (tag == "msh-sparse" || tag == "msh_sparse") return Family::msh_sparse;
  if (tag == "mix") return Family::mix;
  if (tag == "mix-sparse" || tag == "mix_sparse") return Family::mix_sparse;
  if (tag == "t" || tag == "student-t") return Family::student_t;
  throw std::invalid_argument("unknown variance family tag: " + tag);
}

// Dependent and regressor matrices of the lag-p system.
// Column t of X is [y_{t-1}', ..., y_{t-p}', d_t']' with the constant as the
// first deterministic entry; Y holds the T = T0 - p dependent columns.
struct TimeSeriesData {
  arma::mat raw;  // T0 x N observations as supplied
  arma::mat Y;    // N x T
  arma::mat X;    // K x T, K = N p + D
  int N = 0, p = 0, D = 0, T = 0;
  int K() const { return N * p + D; }
};

// Exclusion restrictions, one selection matrix per equation.
// Row n of A is a_n * VA(n) with VA(n): r_An x K; row n of B0 is b_n * VB(n)
// with VB(n): r_Bn x N. Every selection row has exactly one unit entry.
struct RestrictionPattern {
  arma::field<arma::mat> VA;
  arma::field<arma::mat> VB;

  int n_eq() const { return static_cast<int>(VB.n_elem); }

  // column index picked by each selection row
  static arma::uvec selected(const arma::mat& V) {
    arma::uvec idx(V.n_rows);
    for (arma::uword r = 0; r < V.n_rows; ++r) {
      const arma::uvec hits = arma::find(V.row(r) == 1.0);
      if (hits.n_elem != 1 || arma::accu(V.row(r)) != 1.0)
        throw std::invalid_argument("restriction row must contain exactly one unit entry");
      idx(r) = hits(0);
    }
    return idx;
  }
};

struct PriorSpec {
  // autoregressive side
  arma::mat A_mean;        // K x N, column n is the prior mean of row n of A
  arma::vec A_scale_diag;  // K, diagonal of the prior scale matrix
  double nu_A = 10.0, a_A = 10.0, s_sA = 10.0, nu_sA = 10.0;

  // structural side
  arma::field<arma::mat> B_scale;  // per-equation r_Bn x r_Bn scale, identity by default
  double nu_B = 0.0;               // shape; validate_specification enforces nu_B >= N
  double nu_b = 10.0, a_B = 10.0, s_sB = 1.0, nu_sB = 100.0;

  // stochastic volatility hierarchy
  double sv_a_v = 1.0, sv_a_sigma = 1.0, sv_s = 0.1, sv_nu = 1.0;

  // regime families
  double e_sigma = 1.0;  // Dirichlet weight of the normalized variance prior (fixed)
  double e = 1.0;        // transition-row / mixture-weight concentration
  double e0 = 1.0;       // initial-state concentration
  double sparse_s_e = 1.0, sparse_nu_e = 10.0;  // hyper-prior of e in sparse models
};

struct ModelSpec {
  TimeSeriesData data;
  RestrictionPattern restrictions;
  PriorSpec prior;
  Family family = Family::homo;
  int M = 0;            // regimes / mixture components, regime families only
  arma::uvec unit_root;  // N flags driving the prior mean of the first own lag
  // minimum regime occurrences of the stationary/finite regime models;
  // -1 selects the default of 5% of the sample (at least 2 for MSH, 1 for MIX)
  int min_regime_occupancy = -1;
  std::vector<std::string> var_names;
};

// Occupancy floor of the path truncation. The sparse variants have none;
// the stationary/finite models keep every regime populated by a share of the
// sample, which both identifies the regimes and excludes the degenerate
// outlier-absorbing labelings.
inline int effective_min_occupancy(const ModelSpec& spec) {
  if (!family_is_regime(spec.family) || family_is_sparse(spec.family)) return 0;
  if (spec.min_regime_occupancy >= 0) return spec.min_regime_occupancy;
  const int share = static_cast<int>(std::round(0.05 * spec.data.T));
  return std::max(spec.family == Family::msh ? 2 : 1, share);
}

// Latent block of the two SV parameterisations. h rows are the per-equation
// log-volatility paths with h_{n.0} = 0.
struct SvBlock {
  arma::mat h;            // N x T
  arma::vec rho;          // N
  arma::vec omega;        // N, non-centred loading
  arma::vec sigma2_omega; // N
  double s_sigma = 0.1;
  arma::vec sigma_v2;     // N, centred innovation variance
  double s_v = 0.1;
};

struct RegimeBlock {
  arma::uvec path;     // T labels in 0..M-1
  arma::mat log_P;     // M x M, rows normalized in log space
  arma::vec log_pi0;   // M
  arma::mat sigma2_regime;  // N x M, each row sums to M
  double e = 1.0;      // current concentration (sampled in sparse models)

  arma::mat P() const { return arma::exp(log_P); }
  arma::vec pi0() const { return arma::exp(log_pi0); }
};

struct StudentTBlock {
  arma::vec nu;            // N degrees of freedom, > 2
  arma::vec mh_log_scale;  // adaptive random-walk scales on logit(1/(nu-1))
  arma::vec mh_draws, mh_accepts;
  bool adapt = true;
};

// One full draw of the sampler. Family blocks are sized only for the active
// family; sigma2 always carries the per-shock conditional variances.
struct ParameterState {
  arma::mat A;   // N x K
  arma::mat B0;  // N x N
  arma::vec gamma_A, s_An;
  double s_A = 1.0;
  arma::vec gamma_B, s_Bn;
  double s_B = 1.0;
  arma::mat sigma2;  // N x T
  SvBlock sv;
  RegimeBlock regime;
  StudentTBlock st;
};

// Retained posterior sample in columnar layout (draw index last), plus the
// terminal state and RNG stream for chain continuation.
struct PosteriorDraws {
  ModelSpec spec;

  arma::cube A;  // N x K x S
  arma::cube B;  // N x N x S
  arma::mat gamma_A, s_An;  // N x S
  arma::rowvec s_A;         // S
  arma::mat gamma_B, s_Bn;
  arma::rowvec s_B;

  // SV
  arma::cube h;  // N x T x S
  arma::mat sv_rho, sv_omega, sv_sigma2_omega, sv_sigma_v2;  // N x S
  arma::rowvec sv_s_sigma, sv_s_v;

  // regimes
  arma::umat path;           // T x S
  arma::cube P;              // M x M x S
  arma::mat pi0;             // M x S
  arma::cube sigma2_regime;  // N x M x S
  arma::rowvec dirichlet_e;  // S

  // Student-t
  arma::cube t_sigma2;  // N x T x S
  arma::mat t_nu;       // N x S

  ParameterState last_state;
  std::uint64_t seed = 0;
  std::string rng_state;
  std::uint64_t sweeps_before = 0;  // burn-in style sweeps consumed before these draws
  bool prior_only = false;          // draws simulated from the prior, no data conditioning

  int n_draws() const { return static_cast<int>(A.n_slices); }

  // conditional variance paths implied by draw s
  arma::mat sigma2_draw(int s) const {
    const int N = spec.data.N, T = spec.data.T;
    switch (spec.family) {
      case Family::homo:
        return arma::ones(N, T);
      case Family::sv: {
        arma::mat out(N, T);
        for (int n = 0; n < N; ++n)
          for (int t = 0; t < T; ++t) out(n, t) = std::exp(sv_omega(n, s) * h(n, t, s));
        return out;
      }
      case Family::sv_centred:
        return arma::exp(h.slice(s));
      case Family::msh:
      case Family::msh_sparse:
      case Family::mix:
      case Family::mix_sparse: {
        arma::mat out(N, T);
        for (int t = 0; t < T; ++t) out.col(t) = sigma2_regime.slice(s).col(path(t, s));
        return out;
      }
      case Family::student_t:
        return t_sigma2.slice(s);
    }
    throw std::logic_error("sigma2_draw: unhandled family");
  }
};

}  // namespace bsve
