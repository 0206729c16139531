#ifndef CTSMC_MODEL_HPP
#define CTSMC_MODEL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctsmc/alphabet.hpp"
#include "ctsmc/common.hpp"

namespace ctsmc {

enum class ContextVariant { neighborhood, explicit_sets };
enum class MultiplierKind { none, cpg, table };

// Ordered context of one site: the sites in C_i together with their symbols.
// Sites outside the sequence are dropped (boundary truncation).
struct Context {
  std::vector<int> sites;       // 0-based, ascending, includes i itself
  std::vector<uint8_t> symbols; // symbols at those sites
};

// Context-dependent rate model: per-site base rates gamma_i(b; x_i) and a
// positive multiplier phi(b; x~_i) over context tuples. Immutable after load;
// safe to share across threads.
class ContextModel {
 public:
  Alphabet alphabet;

  // One shared a-by-a matrix, or one per site (fixing n). Diagonal ignored.
  std::vector<Eigen::MatrixXd> base;
  bool per_site_rates = false;

  ContextVariant variant = ContextVariant::neighborhood;
  int k = 0;  // context size |C_i| - 1; half-width k/2 per side for neighborhoods
  std::vector<std::vector<int>> explicit_context;  // 0-based, sorted, includes self

  MultiplierKind mult = MultiplierKind::none;
  double lambda = 1.0;                             // cpg shorthand
  std::unordered_map<std::string, double> table;   // context tuple -> phi

  double phi_min = 1.0, phi_max = 1.0;
  double gamma_min = 0.0, gamma_max = 0.0;
  int n_fixed = 0;  // 0 = model applies to any length

  int cpg_c = -1, cpg_g = -1;

  int a() const { return alphabet.size(); }
  int q() const { return alphabet.q(); }
  bool is_ism() const { return mult == MultiplierKind::none; }
  double phi_star() const { return phi_max / phi_min; }

  const Eigen::MatrixXd& site_matrix(int i) const {
    return per_site_rates ? base[static_cast<size_t>(i)] : base.front();
  }

  double base_rate(int i, uint8_t from, uint8_t to) const {
    return site_matrix(i)(from, to);
  }

  // Sum of base rates out of `from` at site i, cached at load.
  double row_exit(int i, uint8_t from) const {
    const auto& row = row_exit_[per_site_rates ? static_cast<size_t>(i) : 0];
    return row[from];
  }

  void check_length(int n) const {
    if (n_fixed > 0 && n != n_fixed)
      throw ValidationError("model is fixed to n=" + std::to_string(n_fixed) +
                            " sites, sequence has n=" + std::to_string(n));
  }

  // C_i as a site list (0-based, includes i), truncated at the ends.
  std::vector<int> context_sites(int i, int n) const {
    std::vector<int> s;
    if (variant == ContextVariant::neighborhood) {
      int h = k / 2;
      for (int j = i - h; j <= i + h; ++j)
        if (j >= 0 && j < n) s.push_back(j);
    } else {
      for (int j : explicit_context[static_cast<size_t>(i)])
        if (j >= 0 && j < n) s.push_back(j);
    }
    return s;
  }

  // phi(b; x~_i) evaluated on a raw state array.
  double phi(const uint8_t* state, int n, int i, uint8_t b) const {
    switch (mult) {
      case MultiplierKind::none:
        return 1.0;
      case MultiplierKind::cpg: {
        int e = 0;
        if (i > 0 && state[i - 1] == cpg_c && state[i] == cpg_g) ++e;
        if (i + 1 < n && state[i] == cpg_c && state[i + 1] == cpg_g) ++e;
        return e == 0 ? 1.0 : (e == 1 ? lambda : lambda * lambda);
      }
      case MultiplierKind::table:
        return table_phi(state, n, i, b);
    }
    return 1.0;
  }

  std::string context_key(const uint8_t* state, int n, int i) const;
  double table_phi(const uint8_t* state, int n, int i, uint8_t b) const;

  void finalize_extrema();

 private:
  std::vector<Eigen::VectorXd> row_exit_;
};

// Tempered view: multiplier raised to beta. beta = 0 recovers the ISM,
// beta = 1 the full DSM. Exponents outside [0,1] are permitted (the exact
// chi-square oracle uses them); only the CLI restricts beta to [0,1].
struct TemperedModelView {
  const ContextModel* model = nullptr;
  double beta = 1.0;
  double cpg_pow1 = 1.0, cpg_pow2 = 1.0;  // lambda^beta, lambda^{2 beta}

  TemperedModelView() = default;
  TemperedModelView(const ContextModel& m, double b) : model(&m), beta(b) {
    if (m.mult == MultiplierKind::cpg) {
      cpg_pow1 = b == 1.0 ? m.lambda : std::pow(m.lambda, b);
      cpg_pow2 = cpg_pow1 * cpg_pow1;
    }
  }
};

namespace detail {
inline double pow_beta(double phi, double beta) {
  if (beta == 1.0 || phi == 1.0) return phi == 1.0 ? 1.0 : phi;
  if (beta == 0.0) return 1.0;
  return std::pow(phi, beta);
}
}  // namespace detail

// gamma_i(b; x_i) * phi(b; x~_i)^beta for b != x_i (caller's precondition).
inline double site_rate(const TemperedModelView& view, const uint8_t* state, int n, int i, uint8_t b) {
  const ContextModel& m = *view.model;
  double g = m.base_rate(i, state[i], b);
  switch (m.mult) {
    case MultiplierKind::none:
      return g;
    case MultiplierKind::cpg: {
      int e = 0;
      if (i > 0 && state[i - 1] == m.cpg_c && state[i] == m.cpg_g) ++e;
      if (i + 1 < n && state[i] == m.cpg_c && state[i + 1] == m.cpg_g) ++e;
      return e == 0 ? g : g * (e == 1 ? view.cpg_pow1 : view.cpg_pow2);
    }
    case MultiplierKind::table:
      return g * detail::pow_beta(m.table_phi(state, n, i, b), view.beta);
  }
  return g;
}

// Rate at which site i exits its current state.
inline double exit_rate(const TemperedModelView& view, const uint8_t* state, int n, int i) {
  const ContextModel& m = *view.model;
  uint8_t cur = state[i];
  switch (m.mult) {
    case MultiplierKind::none:
      return m.row_exit(i, cur);
    case MultiplierKind::cpg: {
      // the multiplier ignores the target symbol, so it factors out
      int e = 0;
      if (i > 0 && state[i - 1] == m.cpg_c && state[i] == m.cpg_g) ++e;
      if (i + 1 < n && state[i] == m.cpg_c && state[i + 1] == m.cpg_g) ++e;
      double row = m.row_exit(i, cur);
      return e == 0 ? row : row * (e == 1 ? view.cpg_pow1 : view.cpg_pow2);
    }
    case MultiplierKind::table: {
      double total = 0.0;
      for (uint8_t b = 0; b < m.a(); ++b) {
        if (b == cur) continue;
        total += m.base_rate(i, cur, b) *
                 detail::pow_beta(m.table_phi(state, n, i, b), view.beta);
      }
      return total;
    }
  }
  return 0.0;
}

// Total exit rate of the whole sequence.
inline double total_rate(const TemperedModelView& view, const uint8_t* state, int n) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += exit_rate(view, state, n, i);
  return total;
}

// Sequence-typed convenience overloads (these also validate their inputs).
inline double site_rate(const TemperedModelView& view, const Sequence& x, int i, uint8_t b) {
  view.model->check_length(x.size());
  if (i < 0 || i >= x.size()) throw ValidationError("site index out of range");
  if (b == x[i]) throw ValidationError("self-transition has no rate");
  return site_rate(view, x.sym.data(), x.size(), i, b);
}
inline double exit_rate(const TemperedModelView& view, const Sequence& x, int i) {
  view.model->check_length(x.size());
  if (i < 0 || i >= x.size()) throw ValidationError("site index out of range");
  return exit_rate(view, x.sym.data(), x.size(), i);
}
inline double total_rate(const TemperedModelView& view, const Sequence& x) {
  view.model->check_length(x.size());
  return total_rate(view, x.sym.data(), x.size());
}

Context context_of(const ContextModel& model, const Sequence& x, int i);

// Model file I/O. Round-trips: load(save(m)) reproduces m.
ContextModel load_model(const std::string& path);
ContextModel parse_model(const std::string& text);
std::string save_model(const ContextModel& model);

}  // namespace ctsmc

#endif
