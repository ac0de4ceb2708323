#pragma once

#include <armadillo>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "bsve/model.hpp"
#include "bsve/types.hpp"
#include "bsve/util.hpp"

namespace bsve {

// ---------------------------------------------------------------------------
// CSV: first row headers, one column per variable, rows in time order,
// locale-independent "." decimals, round-trippable %.17g formatting.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// missing_as_nan: empty cells parse as NaN (used by conditional projections)
inline arma::mat read_csv_matrix(const std::string& path,
                                 std::vector<std::string>* headers = nullptr,
                                 bool missing_as_nan = false) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty data file: " + path);
  const std::vector<std::string> head = split_csv_line(line);
  if (headers) *headers = head;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != head.size())
      throw std::invalid_argument(path + ": row with " + std::to_string(cells.size()) +
                                  " cells, expected " + std::to_string(head.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      if (c.empty() || c == "nan" || c == "NaN" || c == "NA") {
        if (!missing_as_nan)
          throw std::invalid_argument(path + ": missing value not allowed here");
        row.push_back(arma::datum::nan);
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0')
        throw std::invalid_argument(path + ": unparsable cell '" + c + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  arma::mat out(rows.size(), head.size());
  for (arma::uword i = 0; i < rows.size(); ++i)
    for (arma::uword j = 0; j < head.size(); ++j) out(i, j) = rows[i][j];
  return out;
}

inline void write_csv(const std::string& path, const arma::mat& m,
                      const std::vector<std::string>& headers) {
  if (headers.size() != m.n_cols)
    throw std::invalid_argument("write_csv: header count must match columns");
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  for (arma::uword j = 0; j < headers.size(); ++j)
    out << headers[j] << (j + 1 == headers.size() ? "\n" : ",");
  for (arma::uword i = 0; i < m.n_rows; ++i)
    for (arma::uword j = 0; j < m.n_cols; ++j)
      out << format_double(m(i, j)) << (j + 1 == m.n_cols ? "\n" : ",");
  if (!out) throw std::invalid_argument("failed writing file: " + path);
}

// ---------------------------------------------------------------------------
// Flat binary draw container.
//   magic "BSVE1", u8 endianness marker (1 = little), u32 chunk count,
//   then chunks: u32 array count, arrays as
//   [u16 name length][name][u8 dtype (0 f64, 1 i64, 2 bytes)][u8 ndim]
//   [u64 dims...][column-major payload].
// Chunk 0 carries the model specification; each further chunk carries one
// chain segment of draws plus its terminal state, so continuation appends
// without rewriting.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "draw container assumes a little-endian host");

struct NamedArray {
  std::uint8_t dtype = 0;  // 0 f64, 1 i64, 2 bytes
  std::vector<std::uint64_t> dims;
  arma::vec f64;
  arma::Col<std::int64_t> i64;
  std::string bytes;
};

using ArrayChunk = std::map<std::string, NamedArray>;

namespace detail_io {

inline NamedArray from_mat(const arma::mat& m) {
  NamedArray a;
  a.dims = {m.n_rows, m.n_cols};
  a.f64 = arma::vectorise(m);
  return a;
}
inline NamedArray from_cube(const arma::cube& c) {
  NamedArray a;
  a.dims = {c.n_rows, c.n_cols, c.n_slices};
  a.f64 = arma::vectorise(c);
  return a;
}
inline NamedArray from_vec(const arma::vec& v) {
  NamedArray a;
  a.dims = {v.n_elem};
  a.f64 = v;
  return a;
}
inline NamedArray from_scalar(double v) { return from_vec(arma::vec{v}); }
inline NamedArray from_ivec(const arma::Col<std::int64_t>& v) {
  NamedArray a;
  a.dtype = 1;
  a.dims = {v.n_elem};
  a.i64 = v;
  return a;
}
inline NamedArray from_bytes(const std::string& s) {
  NamedArray a;
  a.dtype = 2;
  a.dims = {s.size()};
  a.bytes = s;
  return a;
}

inline arma::mat to_mat(const NamedArray& a) {
  if (a.dtype != 0 || a.dims.size() != 2) throw std::invalid_argument("draw file: expected matrix");
  return arma::reshape(arma::mat(a.f64), a.dims[0], a.dims[1]);
}
inline arma::cube to_cube(const NamedArray& a) {
  if (a.dtype != 0 || a.dims.size() != 3) throw std::invalid_argument("draw file: expected cube");
  arma::cube out(a.dims[0], a.dims[1], a.dims[2]);
  std::memcpy(out.memptr(), a.f64.memptr(), sizeof(double) * a.f64.n_elem);
  return out;
}
inline arma::vec to_vec(const NamedArray& a) {
  if (a.dtype != 0 || a.dims.size() != 1) throw std::invalid_argument("draw file: expected vector");
  return a.f64;
}
inline double to_scalar(const NamedArray& a) {
  const arma::vec v = to_vec(a);
  if (v.n_elem != 1) throw std::invalid_argument("draw file: expected scalar");
  return v(0);
}

template <class T>
void put_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::invalid_argument("draw file: truncated");
  return v;
}

inline void write_chunk(std::ostream& out, const ArrayChunk& chunk) {
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(chunk.size()));
  for (const auto& [name, a] : chunk) {
    put_raw<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_raw<std::uint8_t>(out, a.dtype);
    put_raw<std::uint8_t>(out, static_cast<std::uint8_t>(a.dims.size()));
    for (const auto d : a.dims) put_raw<std::uint64_t>(out, d);
    if (a.dtype == 0)
      out.write(reinterpret_cast<const char*>(a.f64.memptr()),
                static_cast<std::streamsize>(sizeof(double) * a.f64.n_elem));
    else if (a.dtype == 1)
      out.write(reinterpret_cast<const char*>(a.i64.memptr()),
                static_cast<std::streamsize>(sizeof(std::int64_t) * a.i64.n_elem));
    else
      out.write(a.bytes.data(), static_cast<std::streamsize>(a.bytes.size()));
  }
}

inline ArrayChunk read_chunk(std::istream& in) {
  ArrayChunk chunk;
  const auto n = get_raw<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = get_raw<std::uint16_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    NamedArray a;
    a.dtype = get_raw<std::uint8_t>(in);
    const auto ndim = get_raw<std::uint8_t>(in);
    std::uint64_t total = 1;
    for (int d = 0; d < ndim; ++d) {
      a.dims.push_back(get_raw<std::uint64_t>(in));
      total *= a.dims.back();
    }
    if (a.dtype == 0) {
      a.f64.set_size(total);
      in.read(reinterpret_cast<char*>(a.f64.memptr()),
              static_cast<std::streamsize>(sizeof(double) * total));
    } else if (a.dtype == 1) {
      a.i64.set_size(total);
      in.read(reinterpret_cast<char*>(a.i64.memptr()),
              static_cast<std::streamsize>(sizeof(std::int64_t) * total));
    } else {
      a.bytes.assign(total, '\0');
      in.read(a.bytes.data(), static_cast<std::streamsize>(total));
    }
    if (!in) throw std::invalid_argument("draw file: truncated array payload");
    chunk.emplace(std::move(name), std::move(a));
  }
  return chunk;
}

inline const NamedArray& need(const ArrayChunk& c, const std::string& name) {
  const auto it = c.find(name);
  if (it == c.end()) throw std::invalid_argument("draw file: missing array " + name);
  return it->second;
}

inline ArrayChunk spec_chunk(const ModelSpec& spec) {
  ArrayChunk c;
  c["family"] = from_bytes(family_name(spec.family));
  c["raw"] = from_mat(spec.data.raw);
  c["p"] = from_scalar(spec.data.p);
  c["M"] = from_scalar(spec.M);
  c["min_occupancy"] = from_scalar(spec.min_regime_occupancy);
  // deterministic rows beyond the constant, needed to rebuild X exactly
  const int T0 = static_cast<int>(spec.data.raw.n_rows);
  arma::mat det(spec.data.D, T0, arma::fill::ones);
  if (spec.data.D > 1) {
    // recover from X: deterministic block sits below the lag block
    for (int t = 0; t < spec.data.T; ++t)
      det.col(t + spec.data.p).subvec(1, spec.data.D - 1) =
          spec.data.X.col(t).subvec(spec.data.N * spec.data.p + 1, spec.data.K() - 1);
    // pre-sample deterministic values are irrelevant to the design matrices
  }
  c["deterministic"] = from_mat(det);
  arma::Col<std::int64_t> ur(spec.unit_root.n_elem);
  for (arma::uword i = 0; i < ur.n_elem; ++i) ur(i) = static_cast<std::int64_t>(spec.unit_root(i));
  c["unit_root"] = from_ivec(ur);
  arma::mat amask(spec.data.N, spec.data.K(), arma::fill::zeros);
  arma::mat bmask(spec.data.N, spec.data.N, arma::fill::zeros);
  for (int n = 0; n < spec.data.N; ++n) {
    for (const auto k : RestrictionPattern::selected(spec.restrictions.VA(n))) amask(n, k) = 1.0;
    for (const auto k : RestrictionPattern::selected(spec.restrictions.VB(n))) bmask(n, k) = 1.0;
  }
  c["a_mask"] = from_mat(amask);
  c["b_mask"] = from_mat(bmask);
  c["prior/A_mean"] = from_mat(spec.prior.A_mean);
  c["prior/A_scale"] = from_vec(spec.prior.A_scale_diag);
  const auto& pr = spec.prior;
  c["prior/constants"] = from_vec(arma::vec{
      pr.nu_A, pr.a_A, pr.s_sA, pr.nu_sA, pr.nu_B, pr.nu_b, pr.a_B, pr.s_sB, pr.nu_sB,
      pr.sv_a_v, pr.sv_a_sigma, pr.sv_s, pr.sv_nu, pr.e_sigma, pr.e, pr.e0, pr.sparse_s_e,
      pr.sparse_nu_e});
  for (int n = 0; n < spec.data.N; ++n)
    c["prior/B_scale_" + std::to_string(n)] = from_mat(spec.prior.B_scale(n));
  std::string names;
  for (const auto& v : spec.var_names) names += v + "\n";
  c["var_names"] = from_bytes(names);
  return c;
}

inline ModelSpec spec_from_chunk(const ArrayChunk& c) {
  const arma::mat raw = to_mat(need(c, "raw"));
  const int p = static_cast<int>(to_scalar(need(c, "p")));
  arma::mat det = to_mat(need(c, "deterministic"));
  std::vector<std::string> names;
  {
    const std::string blob = need(c, "var_names").bytes;
    std::string cur;
    for (const char ch : blob) {
      if (ch == '\n') {
        names.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
  }
  ModelSpec spec;
  spec.family = parse_family(need(c, "family").bytes);
  spec.M = static_cast<int>(to_scalar(need(c, "M")));
  spec.min_regime_occupancy = static_cast<int>(to_scalar(need(c, "min_occupancy")));
  spec.data = build_design_matrices(raw, p, det);
  spec.restrictions = restrictions_from_masks(to_mat(need(c, "b_mask")), to_mat(need(c, "a_mask")));
  const arma::Col<std::int64_t>& ur = need(c, "unit_root").i64;
  spec.unit_root.set_size(ur.n_elem);
  for (arma::uword i = 0; i < ur.n_elem; ++i) spec.unit_root(i) = static_cast<arma::uword>(ur(i));
  spec.prior.A_mean = to_mat(need(c, "prior/A_mean"));
  spec.prior.A_scale_diag = to_vec(need(c, "prior/A_scale"));
  const arma::vec k = to_vec(need(c, "prior/constants"));
  auto& pr = spec.prior;
  pr.nu_A = k(0); pr.a_A = k(1); pr.s_sA = k(2); pr.nu_sA = k(3); pr.nu_B = k(4);
  pr.nu_b = k(5); pr.a_B = k(6); pr.s_sB = k(7); pr.nu_sB = k(8); pr.sv_a_v = k(9);
  pr.sv_a_sigma = k(10); pr.sv_s = k(11); pr.sv_nu = k(12); pr.e_sigma = k(13);
  pr.e = k(14); pr.e0 = k(15); pr.sparse_s_e = k(16); pr.sparse_nu_e = k(17);
  pr.B_scale.set_size(spec.data.N);
  for (int n = 0; n < spec.data.N; ++n)
    pr.B_scale(n) = to_mat(need(c, "prior/B_scale_" + std::to_string(n)));
  spec.var_names = std::move(names);
  validate_specification(spec);
  return spec;
}

inline ArrayChunk state_chunk(const ParameterState& st, const ModelSpec& spec) {
  ArrayChunk c;
  c["last/A"] = from_mat(st.A);
  c["last/B"] = from_mat(st.B0);
  c["last/gamma_A"] = from_vec(st.gamma_A);
  c["last/s_An"] = from_vec(st.s_An);
  c["last/s_A"] = from_scalar(st.s_A);
  c["last/gamma_B"] = from_vec(st.gamma_B);
  c["last/s_Bn"] = from_vec(st.s_Bn);
  c["last/s_B"] = from_scalar(st.s_B);
  c["last/sigma2"] = from_mat(st.sigma2);
  if (family_is_sv(spec.family)) {
    c["last/sv_h"] = from_mat(st.sv.h);
    c["last/sv_rho"] = from_vec(st.sv.rho);
    c["last/sv_omega"] = from_vec(st.sv.omega);
    c["last/sv_sigma2_omega"] = from_vec(st.sv.sigma2_omega);
    c["last/sv_s_sigma"] = from_scalar(st.sv.s_sigma);
    c["last/sv_sigma_v2"] = from_vec(st.sv.sigma_v2);
    c["last/sv_s_v"] = from_scalar(st.sv.s_v);
  }
  if (family_is_regime(spec.family)) {
    arma::Col<std::int64_t> path(st.regime.path.n_elem);
    for (arma::uword t = 0; t < path.n_elem; ++t) path(t) = static_cast<std::int64_t>(st.regime.path(t));
    c["last/path"] = from_ivec(path);
    c["last/log_P"] = from_mat(st.regime.log_P);
    c["last/log_pi0"] = from_vec(st.regime.log_pi0);
    c["last/sigma2_regime"] = from_mat(st.regime.sigma2_regime);
    c["last/e"] = from_scalar(st.regime.e);
  }
  if (spec.family == Family::student_t) {
    c["last/nu"] = from_vec(st.st.nu);
    c["last/mh_log_scale"] = from_vec(st.st.mh_log_scale);
    c["last/mh_draws"] = from_vec(st.st.mh_draws);
    c["last/mh_accepts"] = from_vec(st.st.mh_accepts);
    c["last/mh_adapt"] = from_scalar(st.st.adapt ? 1.0 : 0.0);
  }
  return c;
}

inline ParameterState state_from_chunk(const ArrayChunk& c, const ModelSpec& spec) {
  ParameterState st = init_state(spec);
  st.A = to_mat(need(c, "last/A"));
  st.B0 = to_mat(need(c, "last/B"));
  st.gamma_A = to_vec(need(c, "last/gamma_A"));
  st.s_An = to_vec(need(c, "last/s_An"));
  st.s_A = to_scalar(need(c, "last/s_A"));
  st.gamma_B = to_vec(need(c, "last/gamma_B"));
  st.s_Bn = to_vec(need(c, "last/s_Bn"));
  st.s_B = to_scalar(need(c, "last/s_B"));
  st.sigma2 = to_mat(need(c, "last/sigma2"));
  if (family_is_sv(spec.family)) {
    st.sv.h = to_mat(need(c, "last/sv_h"));
    st.sv.rho = to_vec(need(c, "last/sv_rho"));
    st.sv.omega = to_vec(need(c, "last/sv_omega"));
    st.sv.sigma2_omega = to_vec(need(c, "last/sv_sigma2_omega"));
    st.sv.s_sigma = to_scalar(need(c, "last/sv_s_sigma"));
    st.sv.sigma_v2 = to_vec(need(c, "last/sv_sigma_v2"));
    st.sv.s_v = to_scalar(need(c, "last/sv_s_v"));
  }
  if (family_is_regime(spec.family)) {
    const arma::Col<std::int64_t>& path = need(c, "last/path").i64;
    st.regime.path.set_size(path.n_elem);
    for (arma::uword t = 0; t < path.n_elem; ++t) st.regime.path(t) = static_cast<arma::uword>(path(t));
    st.regime.log_P = to_mat(need(c, "last/log_P"));
    st.regime.log_pi0 = to_vec(need(c, "last/log_pi0"));
    st.regime.sigma2_regime = to_mat(need(c, "last/sigma2_regime"));
    st.regime.e = to_scalar(need(c, "last/e"));
  }
  if (spec.family == Family::student_t) {
    st.st.nu = to_vec(need(c, "last/nu"));
    st.st.mh_log_scale = to_vec(need(c, "last/mh_log_scale"));
    st.st.mh_draws = to_vec(need(c, "last/mh_draws"));
    st.st.mh_accepts = to_vec(need(c, "last/mh_accepts"));
    st.st.adapt = to_scalar(need(c, "last/mh_adapt")) != 0.0;
  }
  return st;
}

inline ArrayChunk draws_chunk(const PosteriorDraws& d, int chain_id) {
  ArrayChunk c = state_chunk(d.last_state, d.spec);
  c["chain_id"] = from_scalar(chain_id);
  c["seed"] = from_scalar(static_cast<double>(d.seed));
  c["sweeps_before"] = from_scalar(static_cast<double>(d.sweeps_before));
  c["prior_only"] = from_scalar(d.prior_only ? 1.0 : 0.0);
  c["rng_state"] = from_bytes(d.rng_state);
  c["draws/A"] = from_cube(d.A);
  c["draws/B"] = from_cube(d.B);
  c["draws/gamma_A"] = from_mat(d.gamma_A);
  c["draws/s_An"] = from_mat(d.s_An);
  c["draws/s_A"] = from_vec(d.s_A.t());
  c["draws/gamma_B"] = from_mat(d.gamma_B);
  c["draws/s_Bn"] = from_mat(d.s_Bn);
  c["draws/s_B"] = from_vec(d.s_B.t());
  const auto f = d.spec.family;
  if (family_is_sv(f)) {
    c["draws/h"] = from_cube(d.h);
    c["draws/sv_rho"] = from_mat(d.sv_rho);
    c["draws/sv_omega"] = from_mat(d.sv_omega);
    c["draws/sv_sigma2_omega"] = from_mat(d.sv_sigma2_omega);
    c["draws/sv_sigma_v2"] = from_mat(d.sv_sigma_v2);
    c["draws/sv_s_sigma"] = from_vec(d.sv_s_sigma.t());
    c["draws/sv_s_v"] = from_vec(d.sv_s_v.t());
  }
  if (family_is_regime(f)) {
    arma::Col<std::int64_t> path(d.path.n_elem);
    for (arma::uword i = 0; i < path.n_elem; ++i) path(i) = static_cast<std::int64_t>(d.path(i));
    NamedArray pa;
    pa.dtype = 1;
    pa.dims = {d.path.n_rows, d.path.n_cols};
    pa.i64 = path;
    c["draws/path"] = pa;
    c["draws/P"] = from_cube(d.P);
    c["draws/pi0"] = from_mat(d.pi0);
    c["draws/sigma2_regime"] = from_cube(d.sigma2_regime);
    c["draws/e"] = from_vec(d.dirichlet_e.t());
  }
  if (f == Family::student_t) {
    c["draws/t_sigma2"] = from_cube(d.t_sigma2);
    c["draws/t_nu"] = from_mat(d.t_nu);
  }
  return c;
}

inline PosteriorDraws draws_from_chunk(const ArrayChunk& c, const ModelSpec& spec) {
  PosteriorDraws d;
  d.spec = spec;
  d.seed = static_cast<std::uint64_t>(to_scalar(need(c, "seed")));
  d.sweeps_before = static_cast<std::uint64_t>(to_scalar(need(c, "sweeps_before")));
  d.prior_only = to_scalar(need(c, "prior_only")) != 0.0;
  d.rng_state = need(c, "rng_state").bytes;
  d.A = to_cube(need(c, "draws/A"));
  d.B = to_cube(need(c, "draws/B"));
  d.gamma_A = to_mat(need(c, "draws/gamma_A"));
  d.s_An = to_mat(need(c, "draws/s_An"));
  d.s_A = to_vec(need(c, "draws/s_A")).t();
  d.gamma_B = to_mat(need(c, "draws/gamma_B"));
  d.s_Bn = to_mat(need(c, "draws/s_Bn"));
  d.s_B = to_vec(need(c, "draws/s_B")).t();
  const auto f = spec.family;
  if (family_is_sv(f)) {
    d.h = to_cube(need(c, "draws/h"));
    d.sv_rho = to_mat(need(c, "draws/sv_rho"));
    d.sv_omega = to_mat(need(c, "draws/sv_omega"));
    d.sv_sigma2_omega = to_mat(need(c, "draws/sv_sigma2_omega"));
    d.sv_sigma_v2 = to_mat(need(c, "draws/sv_sigma_v2"));
    d.sv_s_sigma = to_vec(need(c, "draws/sv_s_sigma")).t();
    d.sv_s_v = to_vec(need(c, "draws/sv_s_v")).t();
  }
  if (family_is_regime(f)) {
    const NamedArray& pa = need(c, "draws/path");
    if (pa.dims.size() != 2) throw std::invalid_argument("draw file: bad path array");
    d.path.set_size(pa.dims[0], pa.dims[1]);
    for (arma::uword i = 0; i < d.path.n_elem; ++i)
      d.path(i) = static_cast<arma::uword>(pa.i64(i));
    d.P = to_cube(need(c, "draws/P"));
    d.pi0 = to_mat(need(c, "draws/pi0"));
    d.sigma2_regime = to_cube(need(c, "draws/sigma2_regime"));
    d.dirichlet_e = to_vec(need(c, "draws/e")).t();
  }
  if (f == Family::student_t) {
    d.t_sigma2 = to_cube(need(c, "draws/t_sigma2"));
    d.t_nu = to_mat(need(c, "draws/t_nu"));
  }
  d.last_state = state_from_chunk(c, spec);
  return d;
}

}  // namespace detail_io

struct DrawsFile {
  ModelSpec spec;
  std::vector<PosteriorDraws> chains;

  // chains concatenated in storage order; terminal pieces from the last chain
  PosteriorDraws merged() const {
    if (chains.empty()) throw std::invalid_argument("draw file holds no draws");
    if (chains.size() == 1) return chains[0];
    PosteriorDraws out = chains.back();
    const auto cat_cube = [](auto get) {
      return [get](const std::vector<PosteriorDraws>& cs) {
        arma::cube out = get(cs[0]);
        for (std::size_t i = 1; i < cs.size(); ++i) out = arma::join_slices(out, get(cs[i]));
        return out;
      };
    };
    out.A = cat_cube([](const PosteriorDraws& d) { return d.A; })(chains);
    out.B = cat_cube([](const PosteriorDraws& d) { return d.B; })(chains);
    const auto cat_mat = [&](auto get) {
      arma::mat m = get(chains[0]);
      for (std::size_t i = 1; i < chains.size(); ++i) m = arma::join_horiz(m, get(chains[i]));
      return m;
    };
    const auto cat_row = [&](auto get) {
      arma::rowvec v = get(chains[0]);
      for (std::size_t i = 1; i < chains.size(); ++i) v = arma::join_horiz(v, get(chains[i]));
      return v;
    };
    out.gamma_A = cat_mat([](const PosteriorDraws& d) { return d.gamma_A; });
    out.s_An = cat_mat([](const PosteriorDraws& d) { return d.s_An; });
    out.s_A = cat_row([](const PosteriorDraws& d) { return d.s_A; });
    out.gamma_B = cat_mat([](const PosteriorDraws& d) { return d.gamma_B; });
    out.s_Bn = cat_mat([](const PosteriorDraws& d) { return d.s_Bn; });
    out.s_B = cat_row([](const PosteriorDraws& d) { return d.s_B; });
    if (family_is_sv(spec.family)) {
      out.h = cat_cube([](const PosteriorDraws& d) { return d.h; })(chains);
      out.sv_rho = cat_mat([](const PosteriorDraws& d) { return d.sv_rho; });
      out.sv_omega = cat_mat([](const PosteriorDraws& d) { return d.sv_omega; });
      out.sv_sigma2_omega = cat_mat([](const PosteriorDraws& d) { return d.sv_sigma2_omega; });
      out.sv_sigma_v2 = cat_mat([](const PosteriorDraws& d) { return d.sv_sigma_v2; });
      out.sv_s_sigma = cat_row([](const PosteriorDraws& d) { return d.sv_s_sigma; });
      out.sv_s_v = cat_row([](const PosteriorDraws& d) { return d.sv_s_v; });
    }
    if (family_is_regime(spec.family)) {
      arma::umat path = chains[0].path;
      for (std::size_t i = 1; i < chains.size(); ++i) path = arma::join_horiz(path, chains[i].path);
      out.path = path;
      out.P = cat_cube([](const PosteriorDraws& d) { return d.P; })(chains);
      out.pi0 = cat_mat([](const PosteriorDraws& d) { return d.pi0; });
      out.sigma2_regime = cat_cube([](const PosteriorDraws& d) { return d.sigma2_regime; })(chains);
      out.dirichlet_e = cat_row([](const PosteriorDraws& d) { return d.dirichlet_e; });
    }
    if (spec.family == Family::student_t) {
      out.t_sigma2 = cat_cube([](const PosteriorDraws& d) { return d.t_sigma2; })(chains);
      out.t_nu = cat_mat([](const PosteriorDraws& d) { return d.t_nu; });
    }
    return out;
  }
};

inline void write_draws_file(const std::string& path, const std::vector<PosteriorDraws>& chains) {
  if (chains.empty()) throw std::invalid_argument("write_draws_file: no chains");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write draw file: " + path);
  out.write("BSVE1", 5);
  detail_io::put_raw<std::uint8_t>(out, 1);
  detail_io::put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(chains.size() + 1));
  detail_io::write_chunk(out, detail_io::spec_chunk(chains[0].spec));
  for (std::size_t i = 0; i < chains.size(); ++i)
    detail_io::write_chunk(out, detail_io::draws_chunk(chains[i], static_cast<int>(i)));
  if (!out) throw std::invalid_argument("failed writing draw file: " + path);
}

inline void write_draws_file(const std::string& path, const PosteriorDraws& draws) {
  write_draws_file(path, std::vector<PosteriorDraws>{draws});
}

// appends one chunk per chain and patches the header count in place
inline void append_draws_chunks(const std::string& path,
                                const std::vector<PosteriorDraws>& chains) {
  std::fstream io(path, std::ios::binary | std::ios::in | std::ios::out);
  if (!io) throw std::invalid_argument("cannot open draw file for append: " + path);
  char magic[5];
  io.read(magic, 5);
  if (std::string(magic, 5) != "BSVE1")
    throw std::invalid_argument(path + " is not a draw file");
  io.seekg(1, std::ios::cur);
  auto count = detail_io::get_raw<std::uint32_t>(io);
  io.seekp(0, std::ios::end);
  for (std::size_t i = 0; i < chains.size(); ++i)
    detail_io::write_chunk(io, detail_io::draws_chunk(chains[i], static_cast<int>(i)));
  io.seekp(6, std::ios::beg);
  detail_io::put_raw<std::uint32_t>(io, count + static_cast<std::uint32_t>(chains.size()));
  if (!io) throw std::invalid_argument("failed appending to draw file: " + path);
}

inline DrawsFile read_draws_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open draw file: " + path);
  char magic[5];
  in.read(magic, 5);
  if (!in || std::string(magic, 5) != "BSVE1")
    throw std::invalid_argument(path + " is not a draw file (bad magic)");
  const auto endian = detail_io::get_raw<std::uint8_t>(in);
  if (endian != 1) throw std::invalid_argument(path + ": unsupported byte order");
  const auto n_chunks = detail_io::get_raw<std::uint32_t>(in);
  if (n_chunks < 2) throw std::invalid_argument(path + ": draw file holds no draw chunks");
  DrawsFile out;
  out.spec = detail_io::spec_from_chunk(detail_io::read_chunk(in));
  // chunks from repeated appends of the same chain layout merge per chain id
  std::map<int, std::vector<PosteriorDraws>> segments;
  for (std::uint32_t i = 1; i < n_chunks; ++i) {
    const ArrayChunk c = detail_io::read_chunk(in);
    const int id = static_cast<int>(detail_io::to_scalar(detail_io::need(c, "chain_id")));
    segments[id].push_back(detail_io::draws_from_chunk(c, out.spec));
  }
  for (auto& [id, segs] : segments) {
    if (segs.size() == 1) {
      out.chains.push_back(std::move(segs[0]));
    } else {
      DrawsFile joiner;
      joiner.spec = out.spec;
      joiner.chains = std::move(segs);
      out.chains.push_back(joiner.merged());
    }
  }
  return out;
}

}  // namespace bsve
