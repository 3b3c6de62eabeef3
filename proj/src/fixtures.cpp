#include "mbpi/fixtures.hpp"

namespace mbpi {

namespace {

RateDistribution family(DistributionKind kind, int type, std::vector<RateEntry> entries) {
  return RateDistribution::conservative_from(kind, type, std::move(entries));
}

}  // namespace

std::vector<std::string> fixture_names() { return {"M1", "M2", "M3", "M4", "A2"}; }

ModelSpec birth_death_immigration(double death, double birth, double immigration) {
  ModelSpec s;
  s.n = 1;
  s.immigration = family(DistributionKind::Immigration, -1, {{MultiIndex{1}, immigration}});
  s.branch.push_back(family(DistributionKind::Branch, 0, {{MultiIndex{0}, death}, {MultiIndex{2}, birth}}));
  return s;
}

ModelSpec fixture_spec(const std::string& name) {
  if (name == "M1") return birth_death_immigration(2.0, 1.0, 1.0);  // subcritical
  if (name == "M2") return birth_death_immigration(1.0, 2.0, 1.0);  // supercritical, q = 1/2
  if (name == "M4") return birth_death_immigration(1.0, 1.0, 3.0);  // critical, heavy immigration
  ModelSpec s;
  s.n = 2;
  if (name == "M3") {
    // Symmetric: each type dies or becomes two of the other type.
    s.immigration = family(DistributionKind::Immigration, -1, {{MultiIndex{1, 0}, 0.5}, {MultiIndex{0, 1}, 0.5}});
    s.branch.push_back(family(DistributionKind::Branch, 0, {{MultiIndex{0, 0}, 0.8}, {MultiIndex{0, 2}, 1.2}}));
    s.branch.push_back(family(DistributionKind::Branch, 1, {{MultiIndex{0, 0}, 0.8}, {MultiIndex{2, 0}, 1.2}}));
    return s;
  }
  if (name == "A2") {
    s.immigration = family(DistributionKind::Immigration, -1, {{MultiIndex{1, 0}, 0.7}, {MultiIndex{0, 1}, 0.3}});
    RateDistribution b1{DistributionKind::Branch, 0, {{MultiIndex{0, 0}, 1.0}, {MultiIndex{1, 1}, 1.5}, {MultiIndex{2, 0}, 0.5}}, -3.0};
    RateDistribution b2{DistributionKind::Branch, 1, {{MultiIndex{0, 0}, 0.6}, {MultiIndex{1, 0}, 0.4}, {MultiIndex{0, 2}, 1.0}}, -2.0};
    s.branch = {b1, b2};
    return s;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown fixture '" + name + "'");
}

}  // namespace mbpi
