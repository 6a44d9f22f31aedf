#include "mgsde/scenario.hpp"

#include "mgsde/error.hpp"

namespace mgsde {

std::string to_string(ScenarioKind kind) {
  return kind == ScenarioKind::producer ? "producer" : "finite_asymmetric";
}

ScenarioKind scenario_from_string(const std::string& name) {
  if (name == "producer" || name == "maximal") return ScenarioKind::producer;
  if (name == "finite_asymmetric" || name == "finite") return ScenarioKind::finite_asymmetric;
  fail(ErrorCode::invalid_argument, "unknown scenario kind '" + name + "'");
}

}  // namespace mgsde
