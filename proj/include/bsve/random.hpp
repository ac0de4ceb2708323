#pragma once

#include <armadillo>

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "bsve/util.hpp"

namespace bsve {

// Inverse standard normal CDF, Wichura's AS 241 (PPND16), double precision.
inline double inv_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("inv_normal_cdf: p must lie in (0,1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -x : x;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Deterministic random source for all samplers. Every distribution consumes
// a fixed number of engine words per accepted draw path, so a (seed, call
// sequence) pair fully pins the output stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Decorrelated substream k of a base seed (independent chains / workers).
  static Rng stream(std::uint64_t seed, std::uint64_t k) {
    std::uint64_t s = seed ^ (0xd1342543de82ef95ULL * (k + 1));
    return Rng(detail::splitmix64(s));
  }

  // strictly inside (0,1)
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return inv_normal_cdf(uniform()); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  arma::vec normal_vec(arma::uword n) {
    arma::vec out(n);
    for (auto& v : out) v = normal();
    return out;
  }

  double exponential(double scale) { return -scale * std::log(uniform()); }

  // Marsaglia-Tsang squeeze method
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape < 1.0)
      return gamma(shape + 1.0, scale) * std::pow(uniform(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
    }
  }

  // log of a Gamma(shape, 1) draw; stable for very small shapes where the
  // draw itself underflows to zero.
  double log_gamma_draw(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("log_gamma_draw: shape must be positive");
    if (shape >= 0.1) return std::log(gamma(shape, 1.0));
    return std::log(gamma(shape + 1.0, 1.0)) + std::log(uniform()) / shape;
  }

  double chi2(double dof) { return gamma(0.5 * dof, 2.0); }

  // x such that scale / x ~ chi-square(dof); density ∝ x^{-(dof+2)/2} e^{-scale/(2x)}
  double inv_gamma2(double scale, double dof) {
    if (!(scale > 0.0) || !(dof > 0.0))
      throw std::invalid_argument("inv_gamma2: scale and dof must be positive");
    return scale / chi2(dof);
  }

  double beta(double a, double b) {
    const double g1 = gamma(a, 1.0);
    const double g2 = gamma(b, 1.0);
    return g1 / (g1 + g2);
  }

  arma::vec dirichlet(const arma::vec& alpha) {
    return arma::exp(dirichlet_log(alpha));
  }

  // normalized log-weights; safe for concentration parameters near zero
  arma::vec dirichlet_log(const arma::vec& alpha) {
    arma::vec lg(alpha.n_elem);
    for (arma::uword i = 0; i < alpha.n_elem; ++i) lg(i) = log_gamma_draw(alpha(i));
    return lg - logsumexp(lg);
  }

  // Generalized inverse Gaussian: density ∝ x^{lambda-1} exp{-(a x + b/x)/2}.
  // Exact rejection from a three-piece exponential hat on u = log x, where the
  // log density lambda*u - (a e^u + b e^{-u})/2 is strictly concave.
  double gig(double lambda, double a, double b) {
    constexpr double kTiny = 1e-300;
    if (a < 0.0 || b < 0.0) throw std::invalid_argument("gig: negative rate");
    if (b <= kTiny) {
      if (!(lambda > 0.0 && a > kTiny))
        throw numerical_error("gig: improper density (b = 0 requires lambda > 0)");
      return gamma(lambda, 2.0 / a);
    }
    if (a <= kTiny) {
      if (!(lambda < 0.0))
        throw numerical_error("gig: improper density (a = 0 requires lambda < 0)");
      return 0.5 * b / gamma(-lambda, 1.0);
    }
    const double s = std::sqrt(lambda * lambda + a * b);
    const double xm = lambda > 0.0 ? (lambda + s) / a : b / (s - lambda);
    const double um = std::log(xm);
    const auto logf = [&](double u) {
      return lambda * u - 0.5 * (a * std::exp(u) + b * std::exp(-u));
    };
    const double f0 = logf(um);
    const double sig = 1.0 / std::sqrt(0.5 * (a * xm + b / xm));
    const double delta = 1.25 * sig;
    const double u1 = um - delta, u2 = um + delta;
    const double f1 = logf(u1) - f0, f2 = logf(u2) - f0;
    const double k1 = lambda - 0.5 * (a * std::exp(u1) - b * std::exp(-u1));
    const double k2 = lambda - 0.5 * (a * std::exp(u2) - b * std::exp(-u2));
    if (!(k1 > 0.0) || !(k2 < 0.0) || !std::isfinite(f1) || !std::isfinite(f2))
      throw numerical_error("gig: envelope construction failed");
    const double z1 = u1 - f1 / k1;
    const double z2 = u2 - f2 / k2;
    const double w1 = 1.0 / k1, w0 = z2 - z1, w2 = -1.0 / k2;
    const double wsum = w1 + w0 + w2;
    for (int iter = 0; iter < 100000; ++iter) {
      const double pick = uniform() * wsum;
      double u, hat;
      if (pick < w1) {
        u = z1 + std::log(uniform()) / k1;
        hat = f1 + k1 * (u - u1);
      } else if (pick < w1 + w0) {
        u = z1 + uniform() * w0;
        hat = 0.0;
      } else {
        u = z2 + std::log(uniform()) / k2;
        hat = f2 + k2 * (u - u2);
      }
      if (std::log(uniform()) <= (logf(u) - f0) - hat) return std::exp(u);
    }
    throw numerical_error("gig: rejection sampler failed to accept");
  }

  // Two-sided truncated normal, rejection scheme of Robert (1995).
  double trunc_normal(double mean, double sd, double lo, double hi) {
    if (!(sd > 0.0) || !(lo < hi))
      throw std::invalid_argument("trunc_normal: invalid bounds or scale");
    return mean + sd * trunc_std_((lo - mean) / sd, (hi - mean) / sd);
  }

  // index draw proportional to probs (not necessarily normalized)
  int categorical(const arma::vec& probs) {
    const double total = arma::accu(probs);
    if (!(total > 0.0) || !probs.is_finite())
      throw numerical_error("categorical: invalid probability vector");
    double u = uniform() * total;
    for (arma::uword i = 0; i < probs.n_elem; ++i) {
      u -= probs(i);
      if (u <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(probs.n_elem) - 1;
  }

  int categorical_log(const arma::vec& logp) {
    const double m = logp.max();
    if (!std::isfinite(m)) throw numerical_error("categorical_log: all weights vanish");
    return categorical(arma::exp(logp - m));
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (is.fail()) throw std::invalid_argument("Rng::deserialize: malformed state");
  }

  std::uint64_t raw() { return engine_(); }

 private:
  double trunc_std_(double a, double b) {
    if (b < 0.0) return -trunc_std_(-b, -a);
    for (int iter = 0; iter < 1000000; ++iter) {
      if (a < 0.0) {
        if (b - a > 2.5066282746310002) {  // wide interval straddling zero
          const double x = normal();
          if (x >= a && x <= b) return x;
        } else {
          const double x = uniform(a, b);
          if (std::log(uniform()) <= -0.5 * x * x) return x;
        }
      } else {
        const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
        if (b - a <= 1.0 / alpha) {  // narrow band: bounded uniform rejection
          const double x = uniform(a, b);
          if (std::log(uniform()) <= 0.5 * (a * a - x * x)) return x;
        } else {  // shifted-exponential rejection
          const double x = a - std::log(uniform()) / alpha;
          if (x <= b && std::log(uniform()) <= -0.5 * (x - alpha) * (x - alpha)) return x;
        }
      }
    }
    throw numerical_error("trunc_normal: rejection sampler failed to accept");
  }

  std::mt19937_64 engine_;
};

// One-dimensional slice sampler (Neal 2003) with stepping out and shrinkage,
// on the open interval (lo, hi). Leaves the target invariant; used for
// non-standard full conditionals.
template <class LogDensity>
double slice_sample(LogDensity&& logf, double x0, double lo, double hi, double width,
                    Rng& rng, int max_steps = 64) {
  const double f0 = logf(x0);
  if (!std::isfinite(f0)) throw numerical_error("slice_sample: invalid starting point");
  const double level = f0 - rng.exponential(1.0);
  double left = std::max(lo, x0 - width * rng.uniform());
  double right = std::min(hi, left + width);
  int steps = max_steps;
  while (steps-- > 0 && left > lo && logf(left) > level)
    left = std::max(lo, left - width);
  steps = max_steps;
  while (steps-- > 0 && right < hi && logf(right) > level)
    right = std::min(hi, right + width);
  for (int iter = 0; iter < 1000; ++iter) {
    const double x = left + (right - left) * rng.uniform();
    if (logf(x) > level) return x;
    if (x < x0)
      left = x;
    else
      right = x;
  }
  return x0;  // shrunk to numeric zero width; keep current point
}

}  // namespace bsve
