#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uidpipe::report {

struct DensityBin {
  double lo = 0.0;  // interval bounds; bins tile [min, max] without gaps
  double hi = 0.0;
  double midpoint = 0.0;
  std::size_t count = 0;
  std::size_t that_count = 0;
  double proportion = 0.0;
};

struct VerbBreakdown {
  std::string verb;
  std::size_t count = 0;
  double mean_density = 0.0;
  double proportion = 0.0;
};

struct BinnedDensityReport {
  std::vector<DensityBin> bins;
  std::optional<double> spearman;  // bin midpoint vs proportion; needs >= 2 bins
  std::vector<VerbBreakdown> verbs;
  std::vector<std::string> warnings;
  std::size_t total = 0;
};

/// Quantile bins over `density`. Equal values never straddle a bin edge, so
/// heavy ties produce fewer bins (with a warning). `verbs`, when non-empty,
/// adds a per-verb breakdown.
BinnedDensityReport binned_density(std::span<const double> density, std::span<const int> that_present,
                                   int bins = 10, std::span<const std::string> verbs = {});

/// Spearman correlation with average ranks for ties. Empty if either side is
/// constant or there are fewer than two points.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

/// 1-based ranks; ties share their average rank.
std::vector<double> average_ranks(std::span<const double> v);

}  // namespace uidpipe::report
