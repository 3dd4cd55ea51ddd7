#pragma once

#include <vector>

#include "ermasym/link_models.hpp"
#include "ermasym/quadrature.hpp"

namespace ermasym {

struct ThresholdPoint {
  double eps;
  double delta_star;
};

// 1 / min_c E[(G + c SY)_-^2]: below this sample ratio the labelled data is
// linearly separable with high probability. Returns +infinity when the
// minimum is numerically zero (noiseless labels).
double separability_threshold(const LinkModel& model, const QuadratureOptions& quad = {});

// Threshold of the noisy-signed law per flip probability, each in (0, 1/2].
// Values above `cap` are reported as `cap`.
std::vector<ThresholdPoint> threshold_curve(const std::vector<double>& eps_grid,
                                            double cap = 1e4,
                                            const QuadratureOptions& quad = {});

}  // namespace ermasym
