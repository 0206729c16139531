#include "ctsmc/oracle.hpp"

#include <array>
#include <cmath>

#include "ctsmc/threading.hpp"

namespace ctsmc {

namespace {

constexpr int kMaxSites = 32;
constexpr int kMaxSeriesOrder = 2000000;

double poisson_logpmf(int m, double mu) {
  return static_cast<double>(m) * std::log(mu) - mu - std::lgamma(static_cast<double>(m) + 1.0);
}

// Smallest K with e^{mu(rho-1)} * PoissonTail(mu*rho, K) <= tol.
int truncation_order(double mu, double rho, double tol) {
  if (mu <= 0.0) return 0;
  double mu_eff = mu * rho;
  double log_inflate = mu * (rho - 1.0);
  double cum = 0.0;
  for (int m = 0;; ++m) {
    cum += std::exp(poisson_logpmf(m, mu_eff));
    double tail = 1.0 - cum;
    if (tail <= 0.0) return m;
    if (log_inflate + std::log(tail) <= std::log(tol) && m >= static_cast<int>(mu_eff)) return m;
    if (m > kMaxSeriesOrder)
      throw NumericAbort("uniformization series does not converge (order > 2e6)");
  }
}

std::vector<double> exit_table(const StateSpace& ss, const TemperedModelView& view,
                               unsigned threads) {
  std::vector<double> e(static_cast<size_t>(ss.size));
  parallel_chunks(0, static_cast<size_t>(ss.size), threads, [&](size_t lo, size_t hi) {
    std::array<uint8_t, kMaxSites> buf;
    ss.decode(static_cast<int64_t>(lo), buf.data());
    for (size_t idx = lo; idx < hi; ++idx) {
      e[idx] = total_rate(view, buf.data(), ss.n);
      int pos = 0;
      while (pos < ss.n && ++buf[static_cast<size_t>(pos)] == ss.a) buf[static_cast<size_t>(pos++)] = 0;
    }
  });
  return e;
}

struct SeriesResult {
  std::vector<double> acc;
  int order = 0;
};

// acc = sum_m Pois(m; Lambda T) u0 R^m with R = I + M/Lambda, where M has the
// view's rates off the diagonal and -diag[z] on the diagonal.
SeriesResult uniformized_series(const StateSpace& ss, const TemperedModelView& offdiag_view,
                                const std::vector<double>& diag, double lambda, double t,
                                double tol, int64_t start, unsigned threads) {
  const auto size = static_cast<size_t>(ss.size);
  std::vector<double> u(size, 0.0), unext(size, 0.0), acc(size, 0.0);
  u[static_cast<size_t>(start)] = 1.0;

  double mu = lambda * t;
  double rho = 1.0;
  if (mu > 0.0) {
    // Row sums of R can exceed 1 for the tilted operator.
    std::vector<double> offsum = exit_table(ss, offdiag_view, threads);
    for (size_t z = 0; z < size; ++z)
      rho = std::max(rho, 1.0 + (offsum[z] - diag[z]) / lambda);
  }
  int order = truncation_order(mu, rho, tol);

  std::vector<int64_t> pow_a(static_cast<size_t>(ss.n));
  int64_t w = 1;
  for (int i = 0; i < ss.n; ++i) {
    pow_a[static_cast<size_t>(i)] = w;
    w *= ss.a;
  }

  const double inv_lambda = lambda > 0.0 ? 1.0 / lambda : 0.0;
  std::vector<double> rdiag(size);
  for (size_t z = 0; z < size; ++z) rdiag[z] = 1.0 - diag[z] * inv_lambda;

  for (int m = 0;; ++m) {
    double wm = mu > 0.0 ? std::exp(poisson_logpmf(m, mu)) : (m == 0 ? 1.0 : 0.0);
    if (wm > 0.0)
      parallel_for(0, size, threads, [&](size_t y) { acc[y] += wm * u[y]; });
    if (m == order) break;
    parallel_chunks(0, size, threads, [&](size_t lo, size_t hi) {
      std::array<uint8_t, kMaxSites> buf;
      ss.decode(static_cast<int64_t>(lo), buf.data());
      const int n = ss.n, a = ss.a;
      for (size_t y = lo; y < hi; ++y) {
        double off = 0.0;
        for (int i = 0; i < n; ++i) {
          uint8_t target = buf[static_cast<size_t>(i)];
          int64_t base_idx = static_cast<int64_t>(y) -
                             static_cast<int64_t>(target) * pow_a[static_cast<size_t>(i)];
          for (uint8_t b = 0; b < a; ++b) {
            if (b == target) continue;
            auto z = static_cast<size_t>(base_idx + static_cast<int64_t>(b) * pow_a[static_cast<size_t>(i)]);
            double uz = u[z];
            if (uz == 0.0) continue;
            buf[static_cast<size_t>(i)] = b;
            off += uz * site_rate(offdiag_view, buf.data(), n, i, target);
            buf[static_cast<size_t>(i)] = target;
          }
        }
        unext[y] = u[y] * rdiag[y] + off * inv_lambda;
        int pos = 0;
        while (pos < n && ++buf[static_cast<size_t>(pos)] == a) buf[static_cast<size_t>(pos++)] = 0;
      }
    });
    std::swap(u, unext);
  }
  return {std::move(acc), order};
}

}  // namespace

StateSpace::StateSpace(int n_, int a_, int64_t cap) : n(n_), a(a_) {
  if (n <= 0) throw ValidationError("state space needs at least one site");
  if (n > kMaxSites) throw CapExceeded("state space limited to 32 sites");
  size = 1;
  for (int i = 0; i < n; ++i) {
    if (size > cap / a) throw CapExceeded("state space a^n exceeds the cap");
    size *= a;
  }
  if (size > cap) throw CapExceeded("state space a^n exceeds the cap");
}

DistributionResult exact_distribution(const ContextModel& model, const Sequence& x, double t,
                                      double beta, double tol, int64_t cap, unsigned threads) {
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  if (!(t >= 0.0)) throw ValidationError("T must be nonnegative");
  model.check_length(x.size());
  StateSpace ss(x.size(), model.a(), cap);
  TemperedModelView view(model, beta);
  std::vector<double> exits = exit_table(ss, view, threads);
  double max_exit = 0.0;
  for (double e : exits) max_exit = std::max(max_exit, e);
  double lambda = 1.01 * max_exit;
  DistributionResult out;
  if (lambda <= 0.0 || t == 0.0) {
    out.p.assign(static_cast<size_t>(ss.size), 0.0);
    out.p[static_cast<size_t>(ss.encode(x.sym.data()))] = 1.0;
    out.lambda = lambda;
    return out;
  }
  auto series = uniformized_series(ss, view, exits, lambda, t, tol, ss.encode(x.sym.data()), threads);
  out.p = std::move(series.acc);
  out.truncation_order = series.order;
  out.lambda = lambda;
  return out;
}

MarginalResult exact_marginal(const ContextModel& model, const Sequence& x, const Sequence& y,
                              double t, double beta, double tol, int64_t cap, unsigned threads) {
  if (x.size() != y.size()) throw ValidationError("sequences differ in length");
  auto dist = exact_distribution(model, x, t, beta, tol, cap, threads);
  StateSpace ss(x.size(), model.a(), cap);
  MarginalResult out;
  out.p = dist.p[static_cast<size_t>(ss.encode(y.sym.data()))];
  out.truncation_order = dist.truncation_order;
  out.lambda = dist.lambda;
  return out;
}

std::vector<double> conditional_jump_dist(const Eigen::MatrixXd& q, double t, int xi, int yi,
                                          double tol) {
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  int a = static_cast<int>(q.rows());
  if (xi < 0 || xi >= a || yi < 0 || yi >= a) throw ValidationError("endpoint symbol out of range");
  double lambda = 0.0;
  for (int r = 0; r < a; ++r) lambda = std::max(lambda, -q(r, r));
  if (lambda <= 0.0 || t == 0.0) {
    if (xi == yi) return {1.0};
    throw ValidationError("zero endpoint probability");
  }
  Eigen::MatrixXd r_mat = Eigen::MatrixXd::Identity(a, a) + q / lambda;
  double mu = lambda * t;

  Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(a);
  v(xi) = 1.0;
  std::vector<double> terms;
  double total = 0.0;
  double cum_pois = 0.0;
  for (int m = 0;; ++m) {
    double wm = std::exp(poisson_logpmf(m, mu));
    cum_pois += wm;
    double c = wm * v(yi);
    terms.push_back(c);
    total += c;
    double tail = 1.0 - cum_pois;
    if (tail <= 0.0) break;
    if (total > 0.0 && tail <= tol * total && m >= static_cast<int>(mu)) break;
    if (total == 0.0 && std::log(tail) < -650.0)
      throw ValidationError("zero endpoint probability");
    if (m > kMaxSeriesOrder) throw NumericAbort("jump distribution series does not converge");
    v = v * r_mat;
  }
  for (auto& c : terms) c /= total;
  return terms;
}

double tilted_entry(const ContextModel& model, const Sequence& x, const Sequence& y, double t,
                    double beta_prev, double beta_next, double tol, int64_t cap,
                    unsigned threads) {
  if (x.size() != y.size()) throw ValidationError("sequences differ in length");
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  model.check_length(x.size());
  StateSpace ss(x.size(), model.a(), cap);

  TemperedModelView view_prev(model, beta_prev);
  TemperedModelView view_next(model, beta_next);
  TemperedModelView view_tilt(model, 2.0 * beta_next - beta_prev);

  std::vector<double> e_prev = exit_table(ss, view_prev, threads);
  std::vector<double> e_next = exit_table(ss, view_next, threads);
  std::vector<double> diag(e_prev.size());
  double max_diag = 0.0;
  for (size_t z = 0; z < diag.size(); ++z) {
    diag[z] = 2.0 * e_next[z] - e_prev[z];
    max_diag = std::max(max_diag, std::abs(diag[z]));
  }
  std::vector<double> e_tilt = exit_table(ss, view_tilt, threads);
  double max_off = 0.0;
  for (double e : e_tilt) max_off = std::max(max_off, e);
  double lambda = 1.01 * std::max(max_diag, max_off);

  if (lambda <= 0.0 || t == 0.0) return x == y ? 1.0 : 0.0;
  auto series =
      uniformized_series(ss, view_tilt, diag, lambda, t, tol, ss.encode(x.sym.data()), threads);
  return series.acc[static_cast<size_t>(ss.encode(y.sym.data()))];
}

ChiSquareResult exact_chi_square(const ContextModel& model, const Sequence& x, const Sequence& y,
                                 double t, double beta_prev, double beta_next, double tol,
                                 int64_t cap, unsigned threads) {
  ChiSquareResult out;
  out.z_prev = exact_marginal(model, x, y, t, beta_prev, tol, cap, threads).p;
  out.z_next = exact_marginal(model, x, y, t, beta_next, tol, cap, threads).p;
  if (!(out.z_prev > 0.0) || !(out.z_next > 0.0))
    throw NumericAbort("zero transition probability in chi-square oracle");
  out.tilted = tilted_entry(model, x, y, t, beta_prev, beta_next, tol, cap, threads);
  out.l2 = out.tilted * out.z_prev / (out.z_next * out.z_next);
  return out;
}

Eigen::MatrixXd dense_generator(const ContextModel& model, int n, double beta) {
  StateSpace ss(n, model.a(), 65536);
  TemperedModelView view(model, beta);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(ss.size, ss.size);
  std::array<uint8_t, kMaxSites> buf;
  for (int64_t z = 0; z < ss.size; ++z) {
    ss.decode(z, buf.data());
    int64_t w = 1;
    for (int i = 0; i < n; ++i) {
      uint8_t cur = buf[static_cast<size_t>(i)];
      for (uint8_t b = 0; b < model.a(); ++b) {
        if (b == cur) continue;
        q(z, z + (static_cast<int64_t>(b) - cur) * w) = site_rate(view, buf.data(), n, i, b);
      }
      w *= model.a();
    }
    q(z, z) = -total_rate(view, buf.data(), n);
  }
  return q;
}

}  // namespace ctsmc
