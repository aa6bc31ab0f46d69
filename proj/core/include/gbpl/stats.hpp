#pragma once

#include <span>
#include <vector>

namespace gbpl::stats {

double mean(std::span<const double> v);

/// Unbiased sample variance; throws for fewer than two values.
double sample_variance(std::span<const double> v);

/// Linear-interpolation quantile (the "type 7" definition), p in [0, 1].
double quantile(std::vector<double> v, double p);

}  // namespace gbpl::stats
