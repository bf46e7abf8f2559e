// Fits eb-gp, gp-mle and gp-median to noisy cos(theta) on a circle embedded
// in R^10 and prints in-sample and test errors.

#include <iomanip>
#include <iostream>

#include "ebgp.hpp"

int main() {
  using namespace ebgp;
  const Dataset train = gen_circle(300, 0.3, 10, 0.1, 7);
  const Dataset test = gen_circle(500, 0.3, 10, 0.0, 8);

  std::cout << std::left << std::setw(12) << "method" << std::setw(14) << "in-sample" << "test\n";
  for (Method m : {Method::eb_gp, Method::gp_mle, Method::gp_median}) {
    EstimatorConfig cfg;
    cfg.method = m;
    cfg.seed = 11;
    const Prediction p = fit_predict(train, test.X, cfg);
    std::cout << std::setw(12) << to_string(m) << std::setw(14) << error_n(p.train_mean, train.f_star)
              << error_2_empirical(p.mean, test.f_star) << '\n';
  }
}
