#include "carmi/game/event_log.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "carmi/error.hpp"

namespace carmi {

void to_json(nlohmann::json& j, const StepEvent& e) {
  j = {{"kind", std::string(to_string(e.kind))},
       {"team", std::string(to_string(e.team))},
       {"unit", e.unit},
       {"target", e.target},
       {"turn", e.turn}};
  if (e.kind == EventKind::shot) j["empowered"] = e.empowered;
  if (e.kind == EventKind::shot || e.kind == EventKind::stab) j["blocked"] = e.blocked;
  if (e.kind == EventKind::move) j["to"] = {e.to.x, e.to.y};
  if (e.kind == EventKind::episode_end) j["outcome"] = std::string(to_string(e.outcome));
}

void from_json(const nlohmann::json& j, StepEvent& e) {
  e = StepEvent{};
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.team = j.at("team").get<std::string>() == "hero" ? Team::hero : Team::enemy;
  e.unit = j.value("unit", -1);
  e.target = j.value("target", -1);
  e.turn = j.value("turn", 0);
  e.empowered = j.value("empowered", false);
  e.blocked = j.value("blocked", false);
  if (j.contains("to")) e.to = {j["to"].at(0).get<int>(), j["to"].at(1).get<int>()};
  if (j.contains("outcome")) e.outcome = outcome_from_string(j["outcome"].get<std::string>());
}

void write_episode_log(std::ostream& out, const EpisodeHeader& h, const std::vector<StepEvent>& events) {
  nlohmann::json header = {{"episode",
                            {{"level_id", h.level_id},
                             {"seed", h.seed},
                             {"mode", h.mode},
                             {"turns_played", h.turns_played},
                             {"outcome", std::string(to_string(h.outcome))},
                             {"num_events", events.size()}}}};
  out << header.dump() << '\n';
  for (const auto& e : events) out << nlohmann::json(e).dump() << '\n';
}

std::vector<LoggedEpisode> read_episode_logs(std::istream& in) {
  std::vector<LoggedEpisode> episodes;
  std::string line;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.contains("episode")) {
      if (!episodes.empty() && episodes.back().events.size() != expected)
        throw Error("event log: episode truncated");
      const auto& e = j.at("episode");
      LoggedEpisode ep;
      ep.header.level_id = e.at("level_id").get<int>();
      ep.header.seed = e.at("seed").get<std::uint64_t>();
      ep.header.mode = e.at("mode").get<std::string>();
      ep.header.turns_played = e.at("turns_played").get<int>();
      ep.header.outcome = outcome_from_string(e.at("outcome").get<std::string>());
      ep.header.num_events = expected = e.at("num_events").get<std::size_t>();
      episodes.push_back(std::move(ep));
    } else {
      if (episodes.empty()) throw Error("event log: event before episode header");
      episodes.back().events.push_back(j.get<StepEvent>());
    }
  }
  if (!episodes.empty() && episodes.back().events.size() != expected) throw Error("event log: episode truncated");
  return episodes;
}

}  // namespace carmi
