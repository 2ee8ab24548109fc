#pragma once

#include <cstdint>
#include <vector>

namespace mtd {

/// Shannon entropy in bits of a discrete distribution given as counts.
/// Zero-count bins contribute nothing (0*log2(0) == 0). Empty or all-zero
/// input yields 0.
double entropy_bits(const std::vector<std::int64_t>& counts);

/// Shannon entropy in bits of an already normalized probability vector.
double entropy_bits(const std::vector<double>& probs);

/// Inverse CDF of the standard normal (Acklam's rational approximation,
/// relative error below 1.15e-9). p must be in (0,1).
double normal_quantile(double p);

/// Sample mean and (population) standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& xs);

/// Chi-square statistic of observed counts against a uniform expectation.
double chi_square_uniform(const std::vector<std::int64_t>& counts);

}  // namespace mtd
