#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace raps {

/// Piecewise-linear efficiency as a function of load fraction. Points are
/// sorted by load; values outside the covered range clamp to the endpoints.
class EfficiencyCurve {
 public:
  EfficiencyCurve() = default;
  explicit EfficiencyCurve(std::vector<std::pair<double, double>> points);

  static EfficiencyCurve constant(double efficiency);

  double at(double load_fraction) const;
  const std::vector<std::pair<double, double>>& points() const { return points_; }

 private:
  std::vector<std::pair<double, double>> points_;
};

struct EfficiencyStage {
  std::string name;
  EfficiencyCurve curve;
  // Load fraction is stage output / rated power. Unset means "use the
  // chain-wide default" (sum of node max power).
  std::optional<double> rated_power_w;
};

/// Conversion stages ordered from the IT load outwards (e.g. voltage
/// regulation first, then AC-DC rectification).
struct EfficiencyChain {
  std::vector<EfficiencyStage> stages;
};

struct ChainOutput {
  double input_power_w = 0.0;
  double loss_w = 0.0;
};

ChainOutput apply_chain(double it_power_w, const EfficiencyChain& chain,
                        double default_rated_power_w);

inline double facility_power(double chain_input_w, double pue) {
  return chain_input_w * pue;
}

}  // namespace raps
