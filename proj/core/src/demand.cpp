#include <cmath>
#include <numbers>
#include <random>

#include "ddopf/errors.hpp"
#include "ddopf/simloop.hpp"

namespace ddopf {

DemandSeries generate_demand_series(const GridCase& grid, int length, std::uint64_t seed,
                                    const DemandProfile& profile) {
  if (length < 0) throw InvalidParameter("demand series length must be nonnegative");
  if (profile.fluctuation_std < 0.0 || std::abs(profile.fluctuation_corr) >= 1.0 ||
      profile.period_hours <= 0.0) {
    throw InvalidParameter("demand profile: bad fluctuation or period settings");
  }
  const int nd = static_cast<int>(grid.demands.size());
  DemandSeries series;
  series.delta_hours = grid.delta_hours;
  series.values.resize(length, nd);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rho = profile.fluctuation_corr;
  const double innovation = profile.fluctuation_std * std::sqrt(1.0 - rho * rho);
  Vector ar(nd);
  for (int d = 0; d < nd; ++d) ar(d) = profile.fluctuation_std * normal(rng);

  for (int k = 0; k < length; ++k) {
    const double hours = k * grid.delta_hours;
    const double daily = profile.amplitude *
                         std::sin(2.0 * std::numbers::pi * hours / profile.period_hours +
                                  profile.phase);
    for (const auto& d : grid.demands) {
      const double pd = grid.buses[grid.bus_index(d.bus)].demand_mw;
      const double factor = std::max(profile.floor, 1.0 + daily + ar(d.column));
      series.values(k, d.column) = pd * factor;
    }
    for (int d = 0; d < nd; ++d) ar(d) = rho * ar(d) + innovation * normal(rng);
  }
  return series;
}

}  // namespace ddopf
