// Empirical-Bayes bandwidth prior on a Swiss roll sample next to the
// rescaled-Gamma prior with rho = 2.

#include <cmath>
#include <iomanip>
#include <iostream>

#include "ebgp.hpp"

int main() {
  using namespace ebgp;
  const Dataset d = gen_swiss_roll(800, 0.1, 3);
  Rng rng(5);
  const EBPriorBuild eb = build_eb_prior(d.X, EBPriorConfig{}, rng);
  const double log_z = eb_log_normalizer(eb.prior);
  const RescaledGammaPrior gamma{1.0, 1.0, 2.0};

  std::cout << "T_n = " << eb.prior.tn << ", k = " << eb.k << ", support (" << eb.prior.lower() << ", 1]\n\n";
  std::cout << std::left << std::setw(14) << "t" << std::setw(18) << "eb density" << "gamma density\n";
  for (double t : detail::log_grid(1e-5, 1.0, 11)) {
    const double e = eb_log_prior(t, eb.prior);
    std::cout << std::setw(14) << t << std::setw(18) << (std::isfinite(e) ? std::exp(e - log_z) : 0.0)
              << std::exp(rescaled_gamma_log_prior(t, gamma)) << '\n';
  }
}
