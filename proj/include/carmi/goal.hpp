#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace carmi {

enum class GoalMode { carmi, cari, winonly };
enum class GoalProvenance { standard_normal, cluster, curriculum, uniform_w, manual };

std::string_view to_string(GoalMode m);
std::string_view to_string(GoalProvenance p);
GoalMode goal_mode_from_string(std::string_view s);
GoalProvenance goal_provenance_from_string(std::string_view s);

/// What the agent is asked to do for one episode. `values` holds z for
/// CARMI, the reward coefficients w for CARI and nothing for WinOnly.
struct GoalSpec {
  GoalMode mode = GoalMode::winonly;
  std::vector<double> values;
  GoalProvenance provenance = GoalProvenance::manual;
  int cluster = -1;

  static GoalSpec carmi(std::vector<double> z, GoalProvenance from = GoalProvenance::manual, int cluster = -1);
  static GoalSpec cari(std::vector<double> w, GoalProvenance from = GoalProvenance::uniform_w);
  static GoalSpec winonly();

  friend bool operator==(const GoalSpec&, const GoalSpec&) = default;
};

void to_json(nlohmann::json& j, const GoalSpec& g);
void from_json(const nlohmann::json& j, GoalSpec& g);

}  // namespace carmi
