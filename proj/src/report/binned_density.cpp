#include "uidpipe/report/binned_density.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "uidpipe/error.hpp"

namespace uidpipe::report {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("spearman: length mismatch");
  if (a.size() < 2) return std::nullopt;
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

BinnedDensityReport binned_density(std::span<const double> density, std::span<const int> that_present, int bins,
                                   std::span<const std::string> verbs) {
  if (density.size() != that_present.size()) throw ArgumentError("density and outcome lengths differ");
  if (!verbs.empty() && verbs.size() != density.size()) throw ArgumentError("verb labels do not align with densities");
  if (density.empty()) throw DataError("no instances to bin");
  if (bins < 1) throw ArgumentError("need at least one bin");
  for (double d : density)
    if (!std::isfinite(d)) throw DataError("non-finite density");

  BinnedDensityReport rep;
  rep.total = density.size();
  std::vector<double> sorted(density.begin(), density.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  // Upper edge of bin b is the value at the b/bins quantile; a value goes to
  // the first bin whose edge is >= it.
  std::vector<double> edges;
  for (int b = 1; b < bins; ++b) {
    const auto pos = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * b / bins));
    edges.push_back(sorted[std::max<std::size_t>(pos, 1) - 1]);
  }
  edges.push_back(sorted.back());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  rep.bins.resize(edges.size());
  for (std::size_t b = 0; b < edges.size(); ++b) {
    rep.bins[b].lo = b == 0 ? sorted.front() : edges[b - 1];
    rep.bins[b].hi = edges[b];
    rep.bins[b].midpoint = (rep.bins[b].lo + rep.bins[b].hi) / 2.0;
  }
  for (std::size_t i = 0; i < density.size(); ++i) {
    const auto b = static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), density[i]) - edges.begin());
    rep.bins[b].count += 1;
    rep.bins[b].that_count += that_present[i] ? 1 : 0;
  }
  std::erase_if(rep.bins, [](const DensityBin& b) { return b.count == 0; });
  for (auto& b : rep.bins) b.proportion = static_cast<double>(b.that_count) / static_cast<double>(b.count);
  if (static_cast<int>(rep.bins.size()) < bins)
    rep.warnings.push_back(fmt::format("only {} distinct density bins (requested {}); tied values merged",
                                       rep.bins.size(), bins));

  std::vector<double> mids, props;
  for (const auto& b : rep.bins) {
    mids.push_back(b.midpoint);
    props.push_back(b.proportion);
  }
  rep.spearman = spearman(mids, props);

  if (!verbs.empty()) {
    std::map<std::string, VerbBreakdown> by_verb;
    for (std::size_t i = 0; i < verbs.size(); ++i) {
      auto& v = by_verb[verbs[i]];
      v.verb = verbs[i];
      v.count += 1;
      v.mean_density += density[i];
      v.proportion += that_present[i] ? 1.0 : 0.0;
    }
    for (auto& [_, v] : by_verb) {
      v.mean_density /= static_cast<double>(v.count);
      v.proportion /= static_cast<double>(v.count);
      rep.verbs.push_back(v);
    }
  }
  return rep;
}

}  // namespace uidpipe::report
