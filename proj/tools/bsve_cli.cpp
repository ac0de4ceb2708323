// bsve: batch command-line front end of the structural VAR engine.
// Subcommands: estimate, forecast, compute, verify, simulate, geweke.
// Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure,
// 3 for a sampler-correctness test that ran and rejected.

#include <CLI11.hpp>

#include <armadillo>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "bsve/bsve.hpp"

namespace fs = std::filesystem;
using namespace bsve;

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::invalid_argument("cannot create output directory: " + dir);
}

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(chain + 1));
  return bsve::detail::splitmix64(s);
}

// regressor labels: y<k>.l<lag> blocks then const, x1, x2, ...
std::vector<std::string> regressor_names(const ModelSpec& spec) {
  std::vector<std::string> out;
  for (int l = 1; l <= spec.data.p; ++l)
    for (int n = 0; n < spec.data.N; ++n)
      out.push_back(spec.var_names[n] + ".l" + std::to_string(l));
  out.push_back("const");
  for (int j = 1; j < spec.data.D; ++j) out.push_back("x" + std::to_string(j));
  return out;
}

void write_estimate_summary(const std::string& path, const PosteriorDraws& post) {
  const ModelSpec& spec = post.spec;
  const auto reg = regressor_names(spec);
  std::vector<std::string> names;
  std::vector<arma::vec> samples;
  for (int n = 0; n < spec.data.N; ++n)
    for (int k = 0; k < spec.data.K(); ++k) {
      names.push_back("A[" + spec.var_names[n] + "][" + reg[k] + "]");
      samples.emplace_back(post.A.tube(n, k));
    }
  for (int n = 0; n < spec.data.N; ++n)
    for (int j = 0; j < spec.data.N; ++j) {
      names.push_back("B0[" + spec.var_names[n] + "][" + spec.var_names[j] + "]");
      samples.emplace_back(post.B.tube(n, j));
    }
  for (int n = 0; n < spec.data.N; ++n) {
    names.push_back("gamma_A[" + std::to_string(n + 1) + "]");
    samples.emplace_back(post.gamma_A.row(n).t());
    names.push_back("gamma_B[" + std::to_string(n + 1) + "]");
    samples.emplace_back(post.gamma_B.row(n).t());
  }
  if (family_is_sv(spec.family))
    for (int n = 0; n < spec.data.N; ++n) {
      names.push_back("rho[" + std::to_string(n + 1) + "]");
      samples.emplace_back(post.sv_rho.row(n).t());
      if (spec.family == Family::sv) {
        names.push_back("omega[" + std::to_string(n + 1) + "]");
        samples.emplace_back(post.sv_omega.row(n).t());
      } else {
        names.push_back("sigma_v2[" + std::to_string(n + 1) + "]");
        samples.emplace_back(post.sv_sigma_v2.row(n).t());
      }
    }
  if (family_is_regime(spec.family)) {
    for (int n = 0; n < spec.data.N; ++n)
      for (int m = 0; m < spec.M; ++m) {
        names.push_back("sigma2_regime[" + std::to_string(n + 1) + "][" +
                        std::to_string(m + 1) + "]");
        samples.emplace_back(post.sigma2_regime.tube(n, m));
      }
    for (int m = 0; m < spec.M; ++m) {
      names.push_back("pi0[" + std::to_string(m + 1) + "]");
      samples.emplace_back(post.pi0.row(m).t());
    }
    if (family_is_sparse(spec.family)) {
      names.push_back("e");
      samples.emplace_back(post.dirichlet_e.t());
    }
  }
  if (spec.family == Family::student_t)
    for (int n = 0; n < spec.data.N; ++n) {
      names.push_back("nu[" + std::to_string(n + 1) + "]");
      samples.emplace_back(post.t_nu.row(n).t());
    }

  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << "parameter,mean,sd,q05,median,q95\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const arma::vec& v = samples[i];
    out << names[i] << ',' << format_double(arma::mean(v)) << ','
        << format_double(arma::stddev(v)) << ',' << format_double(quantile(v, 0.05)) << ','
        << format_double(quantile(v, 0.5)) << ',' << format_double(quantile(v, 0.95))
        << "\n";
  }
}

// per-figure plot data: x, median, lower, upper
void write_plot_csv(const std::string& path, const arma::vec& x, const arma::vec& med,
                    const arma::vec& lo, const arma::vec& hi) {
  arma::mat m(x.n_elem, 4);
  m.col(0) = x;
  m.col(1) = med;
  m.col(2) = lo;
  m.col(3) = hi;
  write_csv(path, m, {"x", "median", "lower", "upper"});
}

void summarize_cube_rows(const std::string& dir, const std::string& what,
                         const arma::cube& draws, const ModelSpec& spec,
                         const std::string& xlab_offset = "1") {
  // draws: N x T x S; one summary table plus one plot file per variable
  const QuantileSummary qs = summarize_draws(draws);
  std::ofstream out(join_path(dir, what + "_summary.csv"));
  out << "variable,t,q05,median,q95\n";
  const int off = std::stoi(xlab_offset);
  for (arma::uword n = 0; n < draws.n_rows; ++n) {
    for (arma::uword t = 0; t < draws.n_cols; ++t)
      out << spec.var_names[n] << ',' << t + off << ','
          << format_double(qs.values[0](n, t)) << ',' << format_double(qs.values[1](n, t))
          << ',' << format_double(qs.values[2](n, t)) << "\n";
    arma::vec x(draws.n_cols);
    for (arma::uword t = 0; t < draws.n_cols; ++t) x(t) = t + off;
    write_plot_csv(join_path(dir, what + "_plot_" + spec.var_names[n] + ".csv"), x,
                   qs.values[1].row(n).t(), qs.values[0].row(n).t(),
                   qs.values[2].row(n).t());
  }
}

PosteriorDraws load_merged(const std::string& path) { return read_draws_file(path).merged(); }

struct PriorOverrides {
  std::vector<std::string> entries;
  void apply(PriorSpec& prior) const {
    for (const auto& kv : entries) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("prior override must be key=value: " + kv);
      const std::string key = kv.substr(0, eq);
      const double val = std::stod(kv.substr(eq + 1));
      if (key == "nu_A") prior.nu_A = val;
      else if (key == "a_A") prior.a_A = val;
      else if (key == "s_sA") prior.s_sA = val;
      else if (key == "nu_sA") prior.nu_sA = val;
      else if (key == "nu_B") prior.nu_B = val;
      else if (key == "nu_b") prior.nu_b = val;
      else if (key == "a_B") prior.a_B = val;
      else if (key == "s_sB") prior.s_sB = val;
      else if (key == "nu_sB") prior.nu_sB = val;
      else if (key == "sv_a_v") prior.sv_a_v = val;
      else if (key == "sv_a_sigma") prior.sv_a_sigma = val;
      else if (key == "sv_s") prior.sv_s = val;
      else if (key == "sv_nu") prior.sv_nu = val;
      else if (key == "e") prior.e = val;
      else if (key == "e0") prior.e0 = val;
      else if (key == "sparse_s_e") prior.sparse_s_e = val;
      else if (key == "sparse_nu_e") prior.sparse_nu_e = val;
      else throw std::invalid_argument("unknown prior constant: " + key);
    }
  }
};

int run_estimate(const std::string& data_path, const std::string& det_path, int lags,
                 const std::string& family_tag, int regimes, int burn, int draws,
                 std::uint64_t seed, int chains, const std::string& b_mask_path,
                 const std::string& a_mask_path, bool stationary, int min_occupancy,
                 const PriorOverrides& prior_over, const std::string& continue_path,
                 bool append, const std::string& out_dir, bool quiet) {
  ensure_dir(out_dir);
  std::vector<PosteriorDraws> starts;
  ModelSpec spec;
  if (!continue_path.empty()) {
    if (!data_path.empty())
      throw std::invalid_argument(
          "--continue-from resumes the stored specification; it cannot be combined with --data");
    DrawsFile file = read_draws_file(continue_path);
    spec = file.spec;
    starts = std::move(file.chains);
    if (chains != static_cast<int>(starts.size()))
      throw std::invalid_argument("continuation needs --chains equal to the stored count (" +
                                  std::to_string(starts.size()) + ")");
  } else {
    if (data_path.empty()) throw std::invalid_argument("--data is required");
    std::vector<std::string> headers;
    const arma::mat raw = read_csv_matrix(data_path, &headers);
    arma::mat det;
    if (!det_path.empty()) det = read_csv_matrix(det_path, nullptr).t();
    spec = make_model_spec(raw, lags, parse_family(family_tag), regimes, det, headers);
    if (!b_mask_path.empty() || !a_mask_path.empty()) {
      arma::mat bmask = b_mask_path.empty()
                            ? arma::mat(arma::trimatl(arma::ones(spec.data.N, spec.data.N)))
                            : read_csv_matrix(b_mask_path, nullptr);
      arma::mat amask = a_mask_path.empty() ? arma::ones(spec.data.N, spec.data.K())
                                            : read_csv_matrix(a_mask_path, nullptr);
      spec.restrictions = restrictions_from_masks(bmask, amask);
    }
    if (stationary) spec.unit_root.zeros();
    spec.prior = default_prior(spec.data, spec.restrictions, spec.unit_root);
    prior_over.apply(spec.prior);
    if (min_occupancy >= 0) spec.min_regime_occupancy = min_occupancy;
    validate_specification(spec);
  }

  std::vector<PosteriorDraws> results(chains);
  std::vector<std::string> errors(chains);
  auto run_chain = [&](int c) {
    try {
      EstimateOptions opts;
      if (!quiet)
        opts.progress = [c](int done, int total) {
          std::fprintf(stderr, "chain %d: %d/%d sweeps (%d%%)\n", c + 1, done, total,
                       100 * done / total);
        };
      if (!continue_path.empty()) {
        results[c] = estimate(starts[c], draws, opts);
      } else {
        PosteriorDraws stage;
        if (burn > 0) {
          EstimateOptions burn_opts;
          burn_opts.normalise = false;
          stage = estimate(spec, burn, chain_seed(seed, c), burn_opts);
          results[c] = estimate(stage, draws, opts);
        } else {
          results[c] = estimate(spec, draws, chain_seed(seed, c), opts);
        }
      }
    } catch (const std::exception& e) {
      errors[c] = e.what();
    }
  };
  if (chains == 1) {
    run_chain(0);
  } else {
    std::vector<std::thread> workers;
    for (int c = 0; c < chains; ++c) workers.emplace_back(run_chain, c);
    for (auto& w : workers) w.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw numerical_error(e);

  const std::string draws_path = join_path(out_dir, "draws.bsve");
  if (append && !continue_path.empty()) {
    append_draws_chunks(continue_path, results);
    if (!quiet) std::fprintf(stderr, "appended %d chain segment(s) to %s\n", chains,
                             continue_path.c_str());
  } else {
    write_draws_file(draws_path, results);
  }
  PosteriorDraws merged;
  {
    DrawsFile f;
    f.spec = spec;
    f.chains = results;
    merged = f.merged();
  }
  write_estimate_summary(join_path(out_dir, "estimate_summary.csv"), merged);
  if (!quiet)
    std::fprintf(stderr, "retained %d draws across %d chain(s)\n", merged.n_draws(), chains);
  return 0;
}

void write_sddr_csv(const std::string& path, const std::vector<SddrResult>& rows,
                    const std::string& verdict = "") {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << "hypothesis,log_sddr,log_nse,log_posterior_ordinate,log_prior_ordinate,"
         "interpretation\n";
  for (const auto& r : rows)
    out << '"' << r.hypothesis << "\"," << format_double(r.log_sddr) << ','
        << format_double(r.log_nse) << ',' << format_double(r.log_posterior_ordinate) << ','
        << format_double(r.log_prior_ordinate) << ','
        << (r.log_sddr > 0 ? "favors the restriction" : "against the restriction") << "\n";
  if (!verdict.empty()) out << verdict << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bsve: Bayesian structural VAR estimation engine"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value configuration file (# comments); flags override");
  app.option_defaults()->configurable();

  // ------------------------------------------------------------- estimate
  auto* est = app.add_subcommand("estimate", "run the Gibbs sampler and persist the draws");
  std::string data_path, det_path, bmask_path, amask_path, continue_path, out_dir = ".";
  std::string family_tag = "homo";
  int lags = 1, regimes = 0, burn = 1000, draws = 10000, chains = 1, min_occ = -1;
  std::uint64_t seed = 1;
  bool stationary = false, append = false, quiet = false;
  PriorOverrides prior_over;
  est->add_option("--data", data_path, "CSV with one column per variable, headers first");
  est->add_option("--deterministic", det_path, "CSV of exogenous deterministic terms");
  est->add_option("--lags", lags, "autoregressive lag order");
  est->add_option("--family", family_tag,
                  "homo | sv | sv-centred | msh | msh-sparse | mix | mix-sparse | t");
  est->add_option("--regimes", regimes, "regime/component count for msh/mix families");
  est->add_option("--burn", burn, "burn-in sweeps prior to retention");
  est->add_option("--draws", draws, "retained posterior sweeps");
  est->add_option("--seed", seed, "RNG seed controlling all randomness");
  est->add_option("--chains", chains, "independent chains run in parallel")
      ->check(CLI::Range(1, 64));
  est->add_option("--restrictions", bmask_path, "0/1 CSV mask of free structural elements");
  est->add_option("--a-restrictions", amask_path,
                  "0/1 CSV mask of free autoregressive elements");
  est->add_flag("--stationary", stationary, "zero prior mean (no unit-root centring)");
  est->add_option("--min-occupancy", min_occ,
                  "regime occupancy floor; default 5% of the sample");
  est->add_option("--prior", prior_over.entries, "prior constant override key=value")
      ->take_all();
  est->add_option("--continue-from", continue_path, "draw file whose chains to continue");
  est->add_flag("--append", append, "append continued draws to the existing file");
  est->add_option("--output", out_dir, "output directory");
  est->add_flag("--quiet", quiet, "suppress progress lines");

  // ------------------------------------------------------------- forecast
  auto* fct = app.add_subcommand("forecast", "sample the predictive density");
  std::string f_draws, f_cond, f_det, f_out = ".";
  int f_horizon = 4;
  std::uint64_t f_seed = 1;
  fct->add_option("--draws-file", f_draws, "draw file from estimate")->required();
  fct->add_option("--horizon", f_horizon, "forecast horizon");
  fct->add_option("--conditional", f_cond,
                  "CSV of projections, H rows x N columns, empty cells free");
  fct->add_option("--future-deterministic", f_det, "future exogenous terms, H rows");
  fct->add_option("--seed", f_seed, "RNG seed");
  fct->add_option("--output", f_out, "output directory");

  // ------------------------------------------------------------- compute
  auto* cmp = app.add_subcommand("compute", "interpretable quantities from stored draws");
  std::string c_what, c_draws, c_kind = "smoothed", c_out = ".";
  int c_horizon = 4;
  bool c_propagate = false;
  cmp->add_option("what", c_what, "irf | fevd | hd | shocks | fitted | sd | regimes")
      ->required();
  cmp->add_option("--draws-file", c_draws, "draw file from estimate")->required();
  cmp->add_option("--horizon", c_horizon, "horizon for irf/fevd");
  cmp->add_option("--kind", c_kind, "regime probabilities: filtered | smoothed | realized");
  cmp->add_flag("--propagate-variances", c_propagate,
                "fevd: weight shocks with forecasted conditional variances");
  cmp->add_option("--output", c_out, "output directory");

  // ------------------------------------------------------------- verify
  auto* ver = app.add_subcommand("verify", "Savage-Dickey verification");
  std::string v_what, v_draws, v_hypothesis, v_out = ".";
  std::uint64_t v_seed = 1;
  ver->add_option("what", v_what, "autoregression | identification")->required();
  ver->add_option("--draws-file", v_draws, "draw file from estimate")->required();
  ver->add_option("--hypothesis", v_hypothesis,
                  "CSV (N rows x Np+D cols) of restricted values, empty = free");
  ver->add_option("--seed", v_seed, "RNG seed of the ordinate estimators");
  ver->add_option("--output", v_out, "output directory");

  // ------------------------------------------------------------- simulate
  auto* sim = app.add_subcommand("simulate", "draw a sample from a chosen data process");
  std::string s_family = "homo", s_out = ".";
  int s_N = 2, s_p = 1, s_T0 = 200, s_M = 2;
  std::uint64_t s_seed = 1;
  double s_omega = 0.6, s_rho = 0.9, s_nu = 5.0, s_ratio = 4.0, s_persist = 0.9;
  bool s_explosive = false;
  std::vector<double> s_diag;
  sim->add_option("--family", s_family, "variance family of the data process");
  sim->add_option("--vars", s_N, "number of variables");
  sim->add_option("--lags", s_p, "lag order");
  sim->add_option("--obs", s_T0, "observations including the pre-sample");
  sim->add_option("--regimes", s_M, "regimes for msh/mix");
  sim->add_option("--seed", s_seed, "RNG seed");
  sim->add_option("--omega", s_omega, "sv: volatility of the log-volatility");
  sim->add_option("--rho", s_rho, "sv: log-volatility autoregression");
  sim->add_option("--nu", s_nu, "t: degrees of freedom");
  sim->add_option("--variance-ratio", s_ratio, "msh/mix: top-to-bottom regime variance ratio");
  sim->add_option("--persistence", s_persist, "msh: diagonal of the transition matrix");
  sim->add_option("--ar-diag", s_diag, "diagonal first-lag coefficients")->expected(-1);
  sim->add_flag("--allow-explosive", s_explosive, "permit an explosive autoregression");
  sim->add_option("--output", s_out, "output directory");

  // ------------------------------------------------------------- geweke
  auto* gwk = app.add_subcommand("geweke", "joint-distribution sampler correctness test");
  std::string g_family = "homo", g_out = ".";
  int g_N = 2, g_T = 30, g_M = 2, g_sweeps = 20000, g_prior_draws = 20000;
  std::uint64_t g_seed = 1;
  double g_corrupt = 1.0;
  gwk->add_option("--family", g_family, "variance family under test");
  gwk->add_option("--vars", g_N, "variables (N*T <= 200)");
  gwk->add_option("--obs", g_T, "observations");
  gwk->add_option("--regimes", g_M, "regimes for msh/mix");
  gwk->add_option("--sweeps", g_sweeps, "successive-conditional sweeps");
  gwk->add_option("--prior-draws", g_prior_draws, "marginal-conditional draws");
  gwk->add_option("--seed", g_seed, "RNG seed");
  gwk->add_option("--corrupt-gamma", g_corrupt,
                  "fault injection: scale multiplier of the gamma_A update");
  gwk->add_option("--output", g_out, "output directory");

  try {
    app.parse(argc, argv);

    if (est->parsed())
      return run_estimate(data_path, det_path, lags, family_tag, regimes, burn, draws, seed,
                          chains, bmask_path, amask_path, stationary, min_occ, prior_over,
                          continue_path, append, out_dir, quiet);

    if (fct->parsed()) {
      ensure_dir(f_out);
      const PosteriorDraws post = load_merged(f_draws);
      arma::mat cond, det_future;
      if (!f_cond.empty())
        cond = read_csv_matrix(f_cond, nullptr, true).t();  // file rows = horizons
      if (!f_det.empty()) det_future = read_csv_matrix(f_det, nullptr).t();
      const ForecastResult fc = forecast(post, f_horizon, cond, f_seed, det_future);
      summarize_cube_rows(f_out, "forecast", fc.draws, post.spec);
      return 0;
    }

    if (cmp->parsed()) {
      ensure_dir(c_out);
      const PosteriorDraws post = load_merged(c_draws);
      const ModelSpec& spec = post.spec;
      if (c_what == "irf" || c_what == "fevd") {
        const ImpulseResponseArray arr =
            c_what == "irf" ? compute_impulse_responses(post, c_horizon)
                            : compute_variance_decompositions(post, c_horizon, c_propagate);
        std::ofstream out(join_path(c_out, c_what + "_summary.csv"));
        out << "variable,shock,h,q05,median,q95\n";
        const int N = spec.data.N;
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < N; ++j) {
            arma::vec med(c_horizon + 1), lo(c_horizon + 1), hi(c_horizon + 1),
                mean(c_horizon + 1), x(c_horizon + 1);
            for (int h = 0; h <= c_horizon; ++h) {
              arma::vec cell(arr.n_draws());
              for (int s = 0; s < arr.n_draws(); ++s) cell(s) = arr.responses[s](i, j, h);
              med(h) = quantile(cell, 0.5);
              lo(h) = quantile(cell, 0.05);
              hi(h) = quantile(cell, 0.95);
              mean(h) = arma::mean(cell);
              x(h) = h;
              out << spec.var_names[i] << ',' << spec.var_names[j] << ',' << h << ','
                  << format_double(lo(h)) << ',' << format_double(med(h)) << ','
                  << format_double(hi(h)) << "\n";
            }
            if (c_what == "irf")
              write_plot_csv(join_path(c_out, "irf_plot_" + spec.var_names[i] + "_" +
                                                  spec.var_names[j] + ".csv"),
                             x, med, lo, hi);
          }
        if (c_what == "fevd") {
          // stacked posterior-mean shares: rows sum to one
          for (int i = 0; i < N; ++i) {
            arma::mat m(c_horizon + 1, N + 1);
            std::vector<std::string> heads{"h"};
            for (int j = 0; j < N; ++j) heads.push_back("share_" + spec.var_names[j]);
            for (int h = 0; h <= c_horizon; ++h) {
              m(h, 0) = h;
              for (int j = 0; j < N; ++j) {
                arma::vec cell(arr.n_draws());
                for (int s = 0; s < arr.n_draws(); ++s) cell(s) = arr.responses[s](i, j, h);
                m(h, j + 1) = arma::mean(cell);
              }
            }
            write_csv(join_path(c_out, "fevd_plot_" + spec.var_names[i] + ".csv"), m, heads);
          }
        }
      } else if (c_what == "hd") {
        const HistoricalDecomposition hd = compute_historical_decompositions(post);
        std::ofstream out(join_path(c_out, "hd_summary.csv"));
        out << "variable,component,t,q05,median,q95\n";
        const int N = spec.data.N, T = spec.data.T, S = post.n_draws();
        for (int i = 0; i < N; ++i) {
          arma::mat stacked(T, N + 2);
          for (int t = 0; t < T; ++t) stacked(t, 0) = t + 1;
          for (int j = 0; j <= N; ++j) {
            for (int t = 0; t < T; ++t) {
              arma::vec cell(S);
              for (int s = 0; s < S; ++s)
                cell(s) = j < N ? hd.contributions[s](i, j, t) : hd.remainder(i, t, s);
              out << spec.var_names[i] << ','
                  << (j < N ? "shock_" + spec.var_names[j] : "initial+deterministic") << ','
                  << t + 1 << ',' << format_double(quantile(cell, 0.05)) << ','
                  << format_double(quantile(cell, 0.5)) << ','
                  << format_double(quantile(cell, 0.95)) << "\n";
              stacked(t, j + 1) = arma::mean(cell);
            }
          }
          std::vector<std::string> heads{"t"};
          for (int j = 0; j < N; ++j) heads.push_back("shock_" + spec.var_names[j]);
          heads.push_back("initial+deterministic");
          write_csv(join_path(c_out, "hd_plot_" + spec.var_names[i] + ".csv"), stacked, heads);
        }
      } else if (c_what == "shocks") {
        summarize_cube_rows(c_out, "shocks", compute_structural_shocks(post), spec);
      } else if (c_what == "fitted") {
        summarize_cube_rows(c_out, "fitted", compute_fitted_values(post), spec);
      } else if (c_what == "sd") {
        summarize_cube_rows(c_out, "sd", compute_conditional_sd(post), spec);
      } else if (c_what == "regimes") {
        const arma::cube probs =
            compute_regime_probabilities(post, parse_regime_prob_kind(c_kind));
        std::ofstream out(join_path(c_out, "regimes_summary.csv"));
        out << "regime,t,mean,q05,median,q95\n";
        for (int m = 0; m < spec.M; ++m) {
          arma::vec x(spec.data.T), med(spec.data.T), lo(spec.data.T), hi(spec.data.T);
          for (int t = 0; t < spec.data.T; ++t) {
            arma::vec cell = probs.tube(m, t);
            x(t) = t + 1;
            med(t) = quantile(cell, 0.5);
            lo(t) = quantile(cell, 0.05);
            hi(t) = quantile(cell, 0.95);
            out << m + 1 << ',' << t + 1 << ',' << format_double(arma::mean(cell)) << ','
                << format_double(lo(t)) << ',' << format_double(med(t)) << ','
                << format_double(hi(t)) << "\n";
          }
          write_plot_csv(join_path(c_out, "regime_plot_state" + std::to_string(m + 1) + ".csv"),
                         x, med, lo, hi);
        }
      } else {
        throw CLI::ValidationError("compute", "unknown quantity: " + c_what);
      }
      return 0;
    }

    if (ver->parsed()) {
      ensure_dir(v_out);
      const PosteriorDraws post = load_merged(v_draws);
      if (v_what == "autoregression") {
        if (v_hypothesis.empty())
          throw CLI::ValidationError("verify", "--hypothesis is required for autoregression");
        const arma::mat H = read_csv_matrix(v_hypothesis, nullptr, true);
        const SddrResult r = sddr_autoregression(post, H, v_seed);
        write_sddr_csv(join_path(v_out, "verify_autoregression.csv"), {r});
        std::cout << r.hypothesis << ": log SDDR = " << r.log_sddr << " (nse " << r.log_nse
                  << ")\n";
      } else if (v_what == "identification") {
        const IdentificationVerdict v = verify_identification(post, v_seed);
        const std::string verdict =
            std::string("\"system verdict\",") +
            (v.globally_identified ? "globally identified" : "not globally identified") +
            "," + std::to_string(v.n_favoring_restriction) + " shock(s) favor the restriction,,,";
        write_sddr_csv(join_path(v_out, "verify_identification.csv"), v.shocks, verdict);
        for (const auto& r : v.shocks)
          std::cout << r.hypothesis << ": log SDDR = " << r.log_sddr << "\n";
        std::cout << (v.globally_identified ? "globally identified\n"
                                            : "not globally identified\n");
      } else {
        throw CLI::ValidationError("verify", "unknown verification: " + v_what);
      }
      return 0;
    }

    if (sim->parsed()) {
      ensure_dir(s_out);
      SimulationConfig cfg;
      cfg.N = s_N;
      cfg.p = s_p;
      cfg.T0 = s_T0;
      cfg.family = parse_family(s_family);
      cfg.M = s_M;
      cfg.allow_explosive = s_explosive;
      if (!s_diag.empty()) {
        cfg.A.zeros(s_N, s_N * s_p + 1);
        for (int n = 0; n < s_N; ++n)
          cfg.A(n, n) = s_diag[static_cast<std::size_t>(n) % s_diag.size()];
      }
      if (family_is_sv(cfg.family)) {
        cfg.omega = arma::vec(s_N, arma::fill::value(s_omega));
        cfg.rho = arma::vec(s_N, arma::fill::value(s_rho));
        cfg.sigma_v2 = arma::vec(s_N, arma::fill::value(s_omega * s_omega));
      }
      if (cfg.family == Family::student_t) cfg.nu = arma::vec(s_N, arma::fill::value(s_nu));
      if (family_is_regime(cfg.family)) {
        cfg.sigma2_regime.set_size(s_N, s_M);
        for (int m = 0; m < s_M; ++m)
          cfg.sigma2_regime.col(m).fill(std::pow(s_ratio, m / std::max(1.0, s_M - 1.0)));
        cfg.P = arma::mat(s_M, s_M,
                          arma::fill::value((1.0 - s_persist) / std::max(1, s_M - 1)));
        cfg.P.diag().fill(s_persist);
      }
      auto [raw, truth] = simulate_data(cfg, s_seed);
      std::vector<std::string> heads;
      for (int n = 0; n < s_N; ++n) heads.push_back("y" + std::to_string(n + 1));
      write_csv(join_path(s_out, "data.csv"), raw, heads);
      write_csv(join_path(s_out, "truth_shocks.csv"), truth.shocks.t(), heads);
      write_csv(join_path(s_out, "truth_sigma2.csv"), truth.sigma2.t(), heads);
      {
        std::ofstream out(join_path(s_out, "truth_params.csv"));
        out << "name,value\n";
        for (arma::uword n = 0; n < truth.cfg.A.n_rows; ++n)
          for (arma::uword k = 0; k < truth.cfg.A.n_cols; ++k)
            out << "A[" << n + 1 << "][" << k + 1 << "]," << format_double(truth.cfg.A(n, k))
                << "\n";
        for (arma::uword n = 0; n < truth.cfg.B0.n_rows; ++n)
          for (arma::uword j = 0; j < truth.cfg.B0.n_cols; ++j)
            out << "B0[" << n + 1 << "][" << j + 1 << "],"
                << format_double(truth.cfg.B0(n, j)) << "\n";
        if (!truth.path.is_empty()) {
          std::ofstream pth(join_path(s_out, "truth_path.csv"));
          pth << "t,regime\n";
          for (arma::uword t = 0; t < truth.path.n_elem; ++t)
            pth << t + 1 << ',' << truth.path(t) + 1 << "\n";
        }
      }
      return 0;
    }

    if (gwk->parsed()) {
      ensure_dir(g_out);
      const ModelSpec spec = make_geweke_spec(parse_family(g_family), g_N, g_T, g_M, g_seed);
      GewekeOptions opts;
      opts.prior_draws = g_prior_draws;
      opts.gamma_scale_mult = g_corrupt;
      const GewekeReport rep = geweke_joint_test(spec, g_sweeps, g_seed, opts);
      std::ofstream out(join_path(g_out, "geweke_report.csv"));
      out << "moment,prior_mean,prior_se,chain_mean,chain_se,z\n";
      for (const auto& m : rep.moments)
        out << '"' << m.name << "\"," << format_double(m.prior_mean) << ','
            << format_double(m.prior_se) << ',' << format_double(m.chain_mean) << ','
            << format_double(m.chain_se) << ',' << format_double(m.z) << "\n";
      const bool pass = rep.pass();
      std::cout << "geweke " << g_family << ": " << rep.moments.size() << " moments, "
                << rep.n_exceeding(2.807) << " exceed the 0.5% bound, max |z| = "
                << rep.max_abs_z() << (pass ? " -> PASS\n" : " -> FAIL\n");
      return pass ? 0 : 3;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
