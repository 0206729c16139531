#ifndef CTSMC_BRIDGE_HPP
#define CTSMC_BRIDGE_HPP

#include <Eigen/Dense>
#include <memory>
#include <mutex>
#include <vector>

#include "ctsmc/model.hpp"
#include "ctsmc/path.hpp"
#include "ctsmc/rng.hpp"

namespace ctsmc {

// Endpoint-conditioned sampler for one site CTMC via uniformization: draw the
// virtual jump count from its conditional law, place the jump times as sorted
// uniforms, fill the state sequence with the discrete bridge over R = I + Q/L,
// then drop self-transitions. Exact for any L >= max exit rate.
class SiteBridge {
 public:
  SiteBridge(Eigen::MatrixXd q, double t, double lambda_inflation = 1.01);

  const Eigen::MatrixXd& transition() const { return p_; }  // e^{T Q}
  double endpoint_prob(int xi, int yi) const { return p_(xi, yi); }
  double lambda() const { return lambda_; }

  SitePath sample(int xi, int yi, Rng& rng) const;

 private:
  const Eigen::MatrixXd& power(int m) const;         // R^m, cached
  const std::vector<double>& jump_cdf(int xi, int yi) const;

  Eigen::MatrixXd q_;
  double t_ = 0.0;
  double lambda_ = 0.0;
  Eigen::MatrixXd r_;
  Eigen::MatrixXd p_;
  mutable std::mutex mutex_;
  mutable std::vector<Eigen::MatrixXd> powers_;
  mutable std::vector<std::vector<double>> cdf_;     // indexed xi * a + yi, unnormalized
};

// Per-site bridges for a model and horizon; sites sharing a rate matrix share
// one SiteBridge.
class BridgeSet {
 public:
  BridgeSet(const ContextModel& model, int n, double t);

  const ContextModel& model() const { return *model_; }
  double horizon() const { return t_; }
  int n() const { return n_; }
  const SiteBridge& site(int i) const { return *bridges_[static_cast<size_t>(i)]; }

  // Independent site bridges for sites in `sites`, merged chronologically.
  // Cross-site time collisions are resampled internally and counted.
  BlockPath sample_block(const std::vector<int>& sites, const Sequence& x, const Sequence& y,
                         Rng& rng, uint64_t* collisions = nullptr) const;

  Path sample_path(const Sequence& x, const Sequence& y, Rng& rng,
                   uint64_t* collisions = nullptr) const;

 private:
  const ContextModel* model_;
  int n_ = 0;
  double t_ = 0.0;
  std::vector<std::shared_ptr<SiteBridge>> bridges_;
};

// log z0 = sum_i log (e^{T Q_i})_{x_i, y_i}; -inf when an endpoint pair has
// zero probability.
double ism_log_marginal(const ContextModel& model, const Sequence& x, const Sequence& y, double t);

}  // namespace ctsmc

#endif
