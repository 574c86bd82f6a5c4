#include "carmi/goal.hpp"

#include <cmath>

#include "carmi/error.hpp"

namespace carmi {

std::string_view to_string(GoalMode m) {
  switch (m) {
    case GoalMode::carmi: return "carmi";
    case GoalMode::cari: return "cari";
    case GoalMode::winonly: return "winonly";
  }
  return "?";
}

std::string_view to_string(GoalProvenance p) {
  switch (p) {
    case GoalProvenance::standard_normal: return "standard_normal";
    case GoalProvenance::cluster: return "cluster";
    case GoalProvenance::curriculum: return "curriculum";
    case GoalProvenance::uniform_w: return "uniform_w";
    case GoalProvenance::manual: return "manual";
  }
  return "?";
}

GoalMode goal_mode_from_string(std::string_view s) {
  for (auto m : {GoalMode::carmi, GoalMode::cari, GoalMode::winonly})
    if (to_string(m) == s) return m;
  throw Error("unknown mode '" + std::string(s) + "' (expected carmi, cari or winonly)");
}

GoalProvenance goal_provenance_from_string(std::string_view s) {
  for (auto p : {GoalProvenance::standard_normal, GoalProvenance::cluster, GoalProvenance::curriculum,
                 GoalProvenance::uniform_w, GoalProvenance::manual})
    if (to_string(p) == s) return p;
  throw Error("unknown goal provenance '" + std::string(s) + "'");
}

GoalSpec GoalSpec::carmi(std::vector<double> z, GoalProvenance from, int cluster) {
  for (double v : z)
    if (!std::isfinite(v)) throw Error("goal z must be finite");
  return GoalSpec{GoalMode::carmi, std::move(z), from, cluster};
}

GoalSpec GoalSpec::cari(std::vector<double> w, GoalProvenance from) {
  return GoalSpec{GoalMode::cari, std::move(w), from, -1};
}

GoalSpec GoalSpec::winonly() { return GoalSpec{GoalMode::winonly, {}, GoalProvenance::manual, -1}; }

void to_json(nlohmann::json& j, const GoalSpec& g) {
  j = {{"mode", to_string(g.mode)}, {"values", g.values}, {"provenance", to_string(g.provenance)}};
  if (g.cluster >= 0) j["cluster"] = g.cluster;
}

void from_json(const nlohmann::json& j, GoalSpec& g) {
  g.mode = goal_mode_from_string(j.at("mode").get<std::string>());
  g.values = j.value("values", std::vector<double>{});
  g.provenance = goal_provenance_from_string(j.value("provenance", std::string("manual")));
  g.cluster = j.value("cluster", -1);
}

}  // namespace carmi
