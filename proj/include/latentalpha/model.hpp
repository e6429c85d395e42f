#pragma once

#include <variant>

#include "latentalpha/latent_chain.hpp"

namespace latentalpha {

/// Cost and penalty parameters of the execution problem.
struct CostParams {
  double a = 1e-5;     ///< temporary impact
  double b = 0.0;      ///< jump size of the midprice
  double beta = 0.0;   ///< permanent impact
  double phi = 0.0;    ///< running inventory penalty
  double alpha = 0.0;  ///< terminal liquidation penalty, ignored when alpha_infinite
  bool alpha_infinite = true;
  double T = 1.0;
  double N_init = 0.0;

  void validate() const;
};

/// dF = kappa (Theta - F) dt + sigma dW
struct OuModel {
  double kappa = 0.0;
  double sigma = 0.0;
};

/// dF = b (dN+ - dN-), lambda+- = mu + kappa (Theta - F)_{+/-}
struct JumpModel {
  double mu = 0.0;
  double kappa = 0.0;
};

struct ModelSpec {
  std::variant<OuModel, JumpModel> dynamics;
  LatentChainSpec chain;
  CostParams cost;
  double F0 = 0.0;

  bool is_jump() const { return std::holds_alternative<JumpModel>(dynamics); }
  void validate() const;
};

}  // namespace latentalpha
