#include "qgr/tolerances.hpp"

#include <cstdlib>
#include <mutex>
#include <string>

#include "json.hpp"

namespace qgr {

static Tolerances g_tols;
static std::once_flag g_once;

void apply_tolerance_overrides() {
  const char* env = std::getenv("QGR_TOL_OVERRIDES");
  if (!env) return;
  nlohmann::json j = nlohmann::json::parse(std::string(env), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return;
  auto pick = [&](const char* key, double& slot) {
    if (j.contains(key) && j[key].is_number()) slot = j[key].get<double>();
  };
  pick("rank", g_tols.rank);
  pick("residual", g_tols.residual);
  pick("resonance", g_tols.resonance);
  pick("roots", g_tols.roots);
  pick("merge", g_tols.merge);
  pick("pivot", g_tols.pivot);
}

Tolerances& tols() {
  std::call_once(g_once, apply_tolerance_overrides);
  return g_tols;
}

}  // namespace qgr
