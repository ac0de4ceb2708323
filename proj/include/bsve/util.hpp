#pragma once

#include <armadillo>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsve {

// Thrown when a sampler or solver hits a numerically degenerate state.
// CLI maps it to exit code 2; std::invalid_argument maps to exit code 1.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double logsumexp(const arma::vec& x) {
  const double m = x.max();
  if (!std::isfinite(m)) return m;
  return m + std::log(arma::accu(arma::exp(x - m)));
}

inline double log1pexp(double x) {
  return x > 35.0 ? x : std::log1p(std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double inv_logit(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Linear-interpolation sample quantile on a copy of the input.
inline double quantile(arma::vec x, double prob) {
  if (x.n_elem == 0) throw std::invalid_argument("quantile: empty sample");
  prob = std::clamp(prob, 0.0, 1.0);
  x = arma::sort(x);
  const double pos = prob * static_cast<double>(x.n_elem - 1);
  const arma::uword lo = static_cast<arma::uword>(std::floor(pos));
  const arma::uword hi = std::min(lo + 1, x.n_elem - 1);
  const double frac = pos - static_cast<double>(lo);
  return (1.0 - frac) * x(lo) + frac * x(hi);
}

inline arma::vec quantiles(const arma::vec& x, const arma::vec& probs) {
  arma::vec out(probs.n_elem);
  for (arma::uword i = 0; i < probs.n_elem; ++i) out(i) = quantile(x, probs(i));
  return out;
}

// Markov-chain standard error of the mean via the initial monotone positive
// sequence estimator (summing adjacent autocovariance pairs while they stay
// positive and non-increasing). Robust to long autocorrelation times where
// fixed batch counts undershoot.
inline double markov_chain_nse(const arma::vec& x) {
  const arma::uword n = x.n_elem;
  if (n < 8) return std::sqrt(arma::var(x) / std::max<arma::uword>(n, 1));
  const arma::vec c = x - arma::mean(x);
  const auto gamma_at = [&](arma::uword k) {
    double acc = 0;
    for (arma::uword t = 0; t + k < n; ++t) acc += c(t) * c(t + k);
    return acc / n;
  };
  const double g0 = gamma_at(0);
  if (!(g0 > 0.0)) return 0.0;
  double total = -g0;
  double prev = arma::datum::inf;
  const arma::uword max_lag = n / 3;
  for (arma::uword m = 0; 2 * m + 1 <= max_lag; ++m) {
    double pair = gamma_at(2 * m) + gamma_at(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    total += 2.0 * pair;
  }
  return std::sqrt(std::max(total, g0) / n);
}

// Numerical standard error of the sample mean via non-overlapping batch means.
inline double batch_means_nse(const arma::vec& x, int n_batches = 20) {
  const int n = static_cast<int>(x.n_elem);
  if (n < 2 * n_batches) n_batches = std::max(2, n / 2);
  const int bsize = n / n_batches;
  arma::vec bm(n_batches);
  for (int b = 0; b < n_batches; ++b)
    bm(b) = arma::mean(x.subvec(b * bsize, (b + 1) * bsize - 1));
  const double var_bm = arma::var(bm);  // across-batch variance of batch means
  return std::sqrt(var_bm / n_batches);
}

inline double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * arma::datum::pi * var) - 0.5 * d * d / var;
}

// log density of IG2(s, nu): f(x) ∝ x^{-(nu+2)/2} exp(-s/(2x)) on x > 0
inline double log_ig2_pdf(double x, double s, double nu) {
  if (x <= 0.0) return -arma::datum::inf;
  return 0.5 * nu * std::log(0.5 * s) - std::lgamma(0.5 * nu) -
         0.5 * (nu + 2.0) * std::log(x) - 0.5 * s / x;
}

// log density of Gamma with given shape and scale
inline double log_gamma_pdf(double x, double shape, double scale) {
  if (x <= 0.0) return -arma::datum::inf;
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) -
         shape * std::log(scale);
}

inline double log_dirichlet_pdf(const arma::vec& w, const arma::vec& alpha) {
  double out = std::lgamma(arma::accu(alpha));
  for (arma::uword m = 0; m < alpha.n_elem; ++m) {
    if (w(m) <= 0.0) return -arma::datum::inf;
    out += (alpha(m) - 1.0) * std::log(w(m)) - std::lgamma(alpha(m));
  }
  return out;
}

}  // namespace bsve
