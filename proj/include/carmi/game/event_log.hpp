#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "carmi/game/state.hpp"

namespace carmi {

/// JSON-lines event log: one header line {"episode": {...}} followed by one
/// line per StepEvent, e.g. {"kind":"shot","team":"hero","unit":1,"target":4,
/// "turn":2,"empowered":true,"blocked":false}.
struct EpisodeHeader {
  int level_id = 0;
  std::uint64_t seed = 0;
  std::string mode;
  int turns_played = 0;
  Outcome outcome = Outcome::none;
  std::size_t num_events = 0;

  friend bool operator==(const EpisodeHeader&, const EpisodeHeader&) = default;
};

struct LoggedEpisode {
  EpisodeHeader header;
  std::vector<StepEvent> events;
};

void to_json(nlohmann::json& j, const StepEvent& e);
void from_json(const nlohmann::json& j, StepEvent& e);

void write_episode_log(std::ostream& out, const EpisodeHeader& header,
                       const std::vector<StepEvent>& events);
std::vector<LoggedEpisode> read_episode_logs(std::istream& in);

}  // namespace carmi
