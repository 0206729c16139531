#include "ctsmc/bridge.hpp"

#include <algorithm>
#include <cmath>

#include "ctsmc/expm.hpp"

namespace ctsmc {

SiteBridge::SiteBridge(Eigen::MatrixXd q, double t, double lambda_inflation) : q_(std::move(q)), t_(t) {
  int a = static_cast<int>(q_.rows());
  double max_exit = 0.0;
  for (int r = 0; r < a; ++r) max_exit = std::max(max_exit, -q_(r, r));
  lambda_ = lambda_inflation * max_exit;
  p_ = small_expm(q_, t_);
  if (lambda_ > 0.0) {
    r_ = Eigen::MatrixXd::Identity(a, a) + q_ / lambda_;
  } else {
    r_ = Eigen::MatrixXd::Identity(a, a);
  }
  powers_.push_back(Eigen::MatrixXd::Identity(a, a));
  cdf_.resize(static_cast<size_t>(a) * static_cast<size_t>(a));
}

const Eigen::MatrixXd& SiteBridge::power(int m) const {
  // Caller holds mutex_. Growth order never affects the cached values.
  while (static_cast<int>(powers_.size()) <= m) powers_.push_back(powers_.back() * r_);
  return powers_[static_cast<size_t>(m)];
}

const std::vector<double>& SiteBridge::jump_cdf(int xi, int yi) const {
  auto& cdf = cdf_[static_cast<size_t>(xi) * static_cast<size_t>(q_.rows()) + static_cast<size_t>(yi)];
  if (!cdf.empty()) return cdf;
  double mu = lambda_ * t_;
  double target = endpoint_prob(xi, yi);
  if (!(target > 0.0)) throw ValidationError("zero endpoint probability in bridge sampler");
  double cum = 0.0;
  double cum_pois = 0.0;
  for (int m = 0;; ++m) {
    double wm = mu > 0.0 ? std::exp(static_cast<double>(m) * std::log(mu) - mu -
                                    std::lgamma(static_cast<double>(m) + 1.0))
                         : (m == 0 ? 1.0 : 0.0);
    cum_pois += wm;
    cum += wm * power(m)(xi, yi);
    cdf.push_back(cum);
    if (mu == 0.0) break;
    if (1.0 - cum_pois <= 1e-15 && m >= static_cast<int>(mu)) break;
  }
  return cdf;
}

SitePath SiteBridge::sample(int xi, int yi, Rng& rng) const {
  std::unique_lock<std::mutex> lock(mutex_);
  const auto& cdf = jump_cdf(xi, yi);
  double total = cdf.back();
  double u = rng.uniform() * total;
  int m = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  if (m >= static_cast<int>(cdf.size())) m = static_cast<int>(cdf.size()) - 1;

  SitePath out;
  if (m == 0) return out;

  std::vector<double> times(static_cast<size_t>(m));
  for (auto& t : times) t = rng.uniform() * t_;
  std::sort(times.begin(), times.end());

  int a = static_cast<int>(q_.rows());
  power(m);  // ensure all powers up to m exist
  std::vector<double> probs(static_cast<size_t>(a));
  int cur = xi;
  for (int j = 1; j <= m; ++j) {
    const Eigen::MatrixXd& tail_pow = powers_[static_cast<size_t>(m - j)];
    double norm = 0.0;
    for (int z = 0; z < a; ++z) {
      probs[static_cast<size_t>(z)] = r_(cur, z) * tail_pow(z, yi);
      norm += probs[static_cast<size_t>(z)];
    }
    double v = rng.uniform() * norm;
    int next = a - 1;
    double acc = 0.0;
    for (int z = 0; z < a; ++z) {
      acc += probs[static_cast<size_t>(z)];
      if (v <= acc) {
        next = z;
        break;
      }
    }
    if (next != cur) out.events.emplace_back(times[static_cast<size_t>(j - 1)], static_cast<uint8_t>(next));
    cur = next;
  }
  return out;
}

BridgeSet::BridgeSet(const ContextModel& model, int n, double t) : model_(&model), n_(n), t_(t) {
  model.check_length(n);
  bridges_.resize(static_cast<size_t>(n));
  if (!model.per_site_rates) {
    auto shared = std::make_shared<SiteBridge>(generator_from_rates(model.base.front()), t);
    for (auto& b : bridges_) b = shared;
  } else {
    for (int i = 0; i < n; ++i)
      bridges_[static_cast<size_t>(i)] =
          std::make_shared<SiteBridge>(generator_from_rates(model.base[static_cast<size_t>(i)]), t);
  }
}

BlockPath BridgeSet::sample_block(const std::vector<int>& sites, const Sequence& x,
                                  const Sequence& y, Rng& rng, uint64_t* collisions) const {
  BlockPath block;
  block.sites = sites;
  std::sort(block.sites.begin(), block.sites.end());
  for (int attempt = 0;; ++attempt) {
    block.events.clear();
    for (int i : block.sites) {
      SitePath sp = site(i).sample(x[i], y[i], rng);
      for (const auto& [t, b] : sp.events) block.events.push_back(Event{t, i, b});
    }
    std::stable_sort(block.events.begin(), block.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    bool collision = false;
    for (size_t j = 1; j < block.events.size(); ++j)
      if (block.events[j].t == block.events[j - 1].t) collision = true;
    if (!collision) return block;
    if (collisions) ++*collisions;
    if (attempt > 100) throw NumericAbort("persistent time collisions in bridge sampler");
  }
}

Path BridgeSet::sample_path(const Sequence& x, const Sequence& y, Rng& rng,
                            uint64_t* collisions) const {
  std::vector<int> all(static_cast<size_t>(n_));
  for (int i = 0; i < n_; ++i) all[static_cast<size_t>(i)] = i;
  BlockPath block = sample_block(all, x, y, rng, collisions);
  Path path;
  path.horizon = t_;
  path.x0 = x;
  path.events = std::move(block.events);
  return path;
}

double ism_log_marginal(const ContextModel& model, const Sequence& x, const Sequence& y, double t) {
  if (x.size() != y.size()) throw ValidationError("sequences differ in length");
  model.check_length(x.size());
  double logz = 0.0;
  Eigen::MatrixXd shared_p;
  if (!model.per_site_rates) shared_p = small_expm(generator_from_rates(model.base.front()), t);
  for (int i = 0; i < x.size(); ++i) {
    double p;
    if (model.per_site_rates)
      p = small_expm(generator_from_rates(model.base[static_cast<size_t>(i)]), t)(x[i], y[i]);
    else
      p = shared_p(x[i], y[i]);
    logz += p > 0.0 ? std::log(p) : kNegInf;
  }
  return logz;
}

}  // namespace ctsmc
