#pragma once

#include <string>
#include <vector>

#include "fisherfuse/matrix.hpp"

namespace ff {

struct FisherConfig {
  int d = 64;
  int k = 8;
  double momentum = 0.99;   // EMA on the pooled gradient
  double eta0 = 0.01;       // eta_t = eta0 / (1 + t/500)
  int publish_freq = 1200;  // snapshot refresh period in steps
};

/// Online top-k Fisher principal subspace tracked with Oja's rule. The live
/// estimate updates every step; fusion consumes the published snapshot.
struct FisherSubspace {
  Matrix u_live;    // d x k orthonormal
  Matrix u_pub;     // published snapshot
  Matrix g_smooth;  // 1 x d EMA of pooled gradients
  long step = 0;
  FisherConfig cfg;

  static FisherSubspace init(const FisherConfig& cfg, Rng& rng);

  double eta_at(long t) const { return cfg.eta0 / (1.0 + t / 500.0); }

  /// EMA-smooths g, applies one Oja step at the scheduled rate, and
  /// re-orthonormalizes. Publishes automatically every publish_freq steps.
  void observe(const std::vector<double>& g);
  void publish() { u_pub = u_live; }
};

/// Columnwise mean of an L x d gradient block.
std::vector<double> pool_gradient(const Matrix& g);

/// One Oja update U <- orth(U + eta (g y^T - U y y^T)), y = U^T g.
Matrix oja_step(const Matrix& u, const std::vector<double>& g, double eta);

enum class FisherEstimator { DirectEig, PowerIter, Randomized, BatchNoEma };
FisherEstimator estimator_from_name(const std::string& name);

/// Top-k eigenspace of the empirical second moment (1/n) sum g g^T by the
/// selected method.
Matrix estimate_alternative(FisherEstimator method,
                            const std::vector<std::vector<double>>& grads, int k,
                            Rng& rng);

/// ||H U U^T||_F^2 / ||H||_F^2.
double energy_ratio(const Matrix& h, const Matrix& u);

/// Largest principal angle (radians) between two orthonormal column spans.
double principal_angle(const Matrix& u, const Matrix& v);

}  // namespace ff
