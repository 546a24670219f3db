#include "raps/efficiency.hpp"

#include <algorithm>

#include "raps/error.hpp"

namespace raps {

EfficiencyCurve::EfficiencyCurve(std::vector<std::pair<double, double>> points)
    : points_(std::move(points)) {
  if (points_.empty()) {
    throw Error(ErrorCode::Config, "efficiency curve needs at least one point");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto [load, eta] = points_[i];
    if (!(eta > 0.0 && eta <= 1.0)) {
      throw Error(ErrorCode::Config,
                  "efficiency_chain: efficiency must lie in (0, 1], got " +
                      std::to_string(eta));
    }
    if (i > 0 && load < points_[i - 1].first) {
      throw Error(ErrorCode::Config,
                  "efficiency_chain: curve points must be sorted by load");
    }
  }
}

EfficiencyCurve EfficiencyCurve::constant(double efficiency) {
  return EfficiencyCurve({{0.0, efficiency}});
}

double EfficiencyCurve::at(double load_fraction) const {
  if (load_fraction <= points_.front().first) return points_.front().second;
  if (load_fraction >= points_.back().first) return points_.back().second;
  auto hi = std::upper_bound(
      points_.begin(), points_.end(), load_fraction,
      [](double x, const std::pair<double, double>& p) { return x < p.first; });
  auto lo = std::prev(hi);
  const double span = hi->first - lo->first;
  if (span <= 0.0) return hi->second;
  const double t = (load_fraction - lo->first) / span;
  return lo->second + t * (hi->second - lo->second);
}

ChainOutput apply_chain(double it_power_w, const EfficiencyChain& chain,
                        double default_rated_power_w) {
  double power = it_power_w;
  for (const auto& stage : chain.stages) {
    const double rated = stage.rated_power_w.value_or(default_rated_power_w);
    const double load = rated > 0.0 ? power / rated : 0.0;
    power /= stage.curve.at(load);
  }
  return {power, power - it_power_w};
}

}  // namespace raps
