#include "carmi/learner/trainer.hpp"

#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "carmi/binary_io.hpp"
#include "carmi/error.hpp"

namespace carmi {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'R', 'M', 'I', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr int kMaxConsecutiveCrashes = 3;

}  // namespace

void TrainConfig::validate() const {
  if (n_actors < 1 || episodes_per_actor < 1) throw Error("train config: budgets must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw Error("train config: gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw Error("train config: gae_lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw Error("train config: learning rate must be positive");
  if (episodes_per_update < 1 || batch_size < 1 || replay_ratio < 0.0)
    throw Error("train config: update schedule must be positive");
  if (replay.capacity == 0 || replay.alpha < 0.0 || replay.beta < 0.0 || replay.epsilon <= 0.0)
    throw Error("train config: invalid replay settings");
  if (checkpoint_every < 0 || checkpoint_every % episodes_per_update != 0)
    throw Error("train config: checkpoint_every must be a multiple of episodes_per_update");
  reward.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"mode", to_string(c.mode)},
       {"n_actors", c.n_actors},
       {"episodes_per_actor", c.episodes_per_actor},
       {"learning_rate", c.learning_rate},
       {"gamma", c.gamma},
       {"gae_lambda", c.gae_lambda},
       {"episodes_per_update", c.episodes_per_update},
       {"replay",
        {{"capacity", c.replay.capacity},
         {"alpha", c.replay.alpha},
         {"beta", c.replay.beta},
         {"epsilon", c.replay.epsilon}}},
       {"batch_size", c.batch_size},
       {"replay_ratio", c.replay_ratio},
       {"max_grad_norm", c.max_grad_norm},
       {"loss",
        {{"entropy_coef", c.loss.entropy_coef}, {"value_coef", c.loss.value_coef}, {"rho_bar", c.loss.rho_bar}}},
       {"net", c.net},
       {"curriculum", c.curriculum},
       {"reward", c.reward},
       {"checkpoint_every", c.checkpoint_every},
       {"checkpoint_path", c.checkpoint_path},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c = d;
  if (j.contains("mode")) c.mode = goal_mode_from_string(j.at("mode").get<std::string>());
  c.n_actors = j.value("n_actors", d.n_actors);
  c.episodes_per_actor = j.value("episodes_per_actor", d.episodes_per_actor);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.gamma = j.value("gamma", d.gamma);
  c.gae_lambda = j.value("gae_lambda", d.gae_lambda);
  c.episodes_per_update = j.value("episodes_per_update", d.episodes_per_update);
  if (j.contains("replay")) {
    const auto& r = j.at("replay");
    c.replay.capacity = r.value("capacity", d.replay.capacity);
    c.replay.alpha = r.value("alpha", d.replay.alpha);
    c.replay.beta = r.value("beta", d.replay.beta);
    c.replay.epsilon = r.value("epsilon", d.replay.epsilon);
  }
  c.batch_size = j.value("batch_size", d.batch_size);
  c.replay_ratio = j.value("replay_ratio", d.replay_ratio);
  c.max_grad_norm = j.value("max_grad_norm", d.max_grad_norm);
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    c.loss.entropy_coef = l.value("entropy_coef", d.loss.entropy_coef);
    c.loss.value_coef = l.value("value_coef", d.loss.value_coef);
    c.loss.rho_bar = l.value("rho_bar", d.loss.rho_bar);
  }
  if (j.contains("net")) c.net = j.at("net").get<NetConfig>();
  if (j.contains("curriculum")) c.curriculum = j.at("curriculum").get<CurriculumConfig>();
  if (j.contains("reward")) c.reward = j.at("reward").get<RewardConfig>();
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  c.checkpoint_path = j.value("checkpoint_path", d.checkpoint_path);
  c.seed = j.value("seed", d.seed);
  c.validate();
}

std::uint64_t TrainConfig::identity_hash() const {
  nlohmann::json j = *this;
  for (const char* k : {"n_actors", "episodes_per_actor", "checkpoint_every", "checkpoint_path"}) j.erase(k);
  return fnv1a(j.dump());
}

void write_learning_curve(const std::vector<CurvePoint>& curve, std::ostream& out) {
  out << "episode,level_id,return,d_T,outcome,mode\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.17g", p.episodic_return);
    out << p.episode << ',' << p.level_id << ',' << buf << ',';
    if (p.final_distance) {
      std::snprintf(buf, sizeof buf, "%.17g", *p.final_distance);
      out << buf;
    }
    out << ',' << to_string(p.outcome) << ',' << to_string(p.mode) << '\n';
  }
}

namespace {

struct Task {
  int episode = 0;
  int level = 0;  // index into the level list
  GoalSpec goal;
  std::uint64_t seed = 0;
};

struct EpisodeResult {
  Task task;
  EpisodeRecord record;
  EpisodeTrace trace;
};

nlohmann::json curve_json(const std::vector<CurvePoint>& curve) {
  auto a = nlohmann::json::array();
  for (const auto& p : curve) {
    nlohmann::json row = {p.episode, p.level_id, p.episodic_return, nullptr, to_string(p.outcome), to_string(p.mode)};
    if (p.final_distance) row[3] = *p.final_distance;
    a.push_back(row);
  }
  return a;
}

std::vector<CurvePoint> curve_from_json(const nlohmann::json& a) {
  std::vector<CurvePoint> out;
  for (const auto& row : a) {
    CurvePoint p;
    p.episode = row.at(0).get<int>();
    p.level_id = row.at(1).get<int>();
    p.episodic_return = row.at(2).get<double>();
    if (!row.at(3).is_null()) p.final_distance = row.at(3).get<double>();
    p.outcome = outcome_from_string(row.at(4).get<std::string>());
    p.mode = goal_mode_from_string(row.at(5).get<std::string>());
    out.push_back(p);
  }
  return out;
}

void write_net(std::ostream& out, const Network<float>& n) { bin::write_vec(out, n.flatten()); }

void read_net(std::istream& in, Network<float>& n) {
  const auto flat = bin::read_vec<float>(in);
  if (flat.size() != n.num_params()) throw Error("checkpoint network size differs from the configured network");
  n.unflatten(flat);
}

struct CheckpointHeader {
  std::uint64_t hash = 0;
  nlohmann::json meta;
};

CheckpointHeader read_header(std::istream& in, const std::string& path) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw Error(path + " is not a training checkpoint");
  const auto version = bin::read<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw Error(path + ": unsupported checkpoint version " + std::to_string(version));
  CheckpointHeader h;
  h.hash = bin::read<std::uint64_t>(in);
  h.meta = nlohmann::json::parse(bin::read_str(in));
  return h;
}

}  // namespace

struct Trainer::Impl {
  TrainConfig cfg;
  std::vector<LevelSpec> levels;
  LevelStatsTable stats;
  NetConfig shape;
  Network<float> net;
  Adam adam;
  ReplayBuffer replay;
  CurriculumState curriculum;
  Rng coord_rng;
  Rng learn_rng;
  std::vector<CurvePoint> curve;
  std::vector<EpisodeResult> pending;
  int dispatched = 0;
  double replay_credit = 0.0;
  UpdateStats last;

  // Shared with actor threads.
  std::mutex mu;
  std::shared_ptr<const Network<float>> snapshot;

  Impl(TrainConfig c, std::vector<LevelSpec> lv, LevelStatsTable st)
      : cfg(std::move(c)), levels(std::move(lv)), stats(std::move(st)), replay(cfg.replay) {
    cfg.validate();
    if (levels.empty()) throw Error("train: need at least one level");
    for (const auto& l : levels) {
      if (l.width != levels[0].width || l.height != levels[0].height)
        throw Error("train: every level must share the board size");
      if (cfg.mode == GoalMode::carmi && !stats.count(l.level_id))
        throw Error("train: no player stats for level " + std::to_string(l.level_id));
    }
    shape = make_net_config(levels[0].width, levels[0].height, cfg.mode, cfg.net);
    net = Network<float>(shape);
    Rng init_rng(derive_seed(cfg.seed, "net-init"));
    net.init(init_rng);
    adam = Adam(shape, AdamConfig{.lr = cfg.learning_rate});
    CurriculumConfig cc = cfg.curriculum;
    cc.seed = derive_seed(cfg.seed, "curriculum");
    curriculum = CurriculumState(cc);
    coord_rng = Rng(derive_seed(cfg.seed, "coordinator"));
    learn_rng = Rng(derive_seed(cfg.seed, "learner"));
    snapshot = std::make_shared<const Network<float>>(net);
  }

  const LevelStats* stats_for(const LevelSpec& l) const {
    auto it = stats.find(l.level_id);
    return it == stats.end() ? nullptr : &it->second;
  }

  // Callers hold `mu` when actors run on threads.
  Task next_task() {
    Task t;
    t.episode = dispatched++;
    t.level = coord_rng.uniform_int(0, static_cast<int>(levels.size()) - 1);
    t.seed = derive_seed(cfg.seed, "episode", {static_cast<std::uint64_t>(t.episode)});
    switch (cfg.mode) {
      case GoalMode::carmi: {
        auto draw = curriculum_sample(curriculum, coord_rng);
        t.goal = GoalSpec::carmi(std::move(draw.z), GoalProvenance::curriculum);
        break;
      }
      case GoalMode::cari: t.goal = GoalSpec::cari(sample_cari_coefficients(cfg.reward, coord_rng)); break;
      case GoalMode::winonly: t.goal = GoalSpec::winonly(); break;
    }
    return t;
  }

  EpisodeResult play(const Task& t, const Network<float>& policy) const {
    EpisodeResult r;
    r.task = t;
    const auto& level = levels[static_cast<std::size_t>(t.level)];
    r.record = run_episode(policy, level, stats_for(level), t.goal, cfg.reward, t.seed, &r.trace);
    return r;
  }

  // Runs a task, retrying after crashes; the third crash in a row aborts.
  EpisodeResult play_with_retries(const Task& t, const Network<float>& policy) const {
    for (int attempt = 1;; ++attempt) {
      try {
        return play(t, policy);
      } catch (const std::exception& e) {
        std::cerr << "actor crashed on episode " << t.episode << " (attempt " << attempt << "): " << e.what() << '\n';
        if (attempt >= kMaxConsecutiveCrashes)
          throw Error("episode " + std::to_string(t.episode) + " crashed " + std::to_string(attempt) +
                      " times in a row: " + e.what());
      }
    }
  }

  void record(EpisodeResult r) {
    if (cfg.mode == GoalMode::carmi) {
      std::lock_guard lock(mu);
      curriculum_update(curriculum, r.task.goal.values, r.record.episodic_return);
    }
    curve.push_back(CurvePoint{static_cast<int>(curve.size()), r.record.level_id, r.record.episodic_return,
                               r.record.final_distance, r.record.outcome, cfg.mode});
    pending.push_back(std::move(r));
    if (static_cast<int>(pending.size()) >= cfg.episodes_per_update) learn();
  }

  void check_finite(const LossTerms& t, const char* what, int index) const {
    if (!std::isfinite(t.total))
      throw Error(std::string("non-finite ") + what + " loss at sample " + std::to_string(index) +
                  " (policy " + std::to_string(t.policy) + ", value " + std::to_string(t.value) + ", entropy " +
                  std::to_string(t.entropy) + ") after " + std::to_string(curve.size()) + " episodes");
  }

  void apply(Network<float>& grad) {
    last.grad_norm = clip_grad_norm(grad, cfg.max_grad_norm);
    adam.step(net, grad);
  }

  void on_policy_update() {
    std::vector<LossSample<float>> batch;
    std::vector<double> advs;
    for (const auto& ep : pending) {
      const auto& tr = ep.trace.transitions;
      std::vector<double> rewards, values;
      for (const auto& t : tr) {
        rewards.push_back(t.reward);
        values.push_back(t.behavior_value);
      }
      const auto adv = gae_advantages(rewards, values, cfg.gamma, cfg.gae_lambda);
      for (std::size_t k = 0; k < tr.size(); ++k) {
        LossSample<float> s;
        s.input = build_input<float>(tr[k].obs, tr[k].cond);
        s.mask = tr[k].mask;
        s.action = tr[k].action;
        s.behavior_prob = tr[k].behavior_prob;
        s.value_target = adv[k] + values[k];
        s.value_offset = tr[k].value_offset;
        batch.push_back(std::move(s));
        advs.push_back(adv[k]);
      }
    }
    if (batch.empty()) return;
    double mean = 0.0, var = 0.0;
    for (double a : advs) mean += a;
    mean /= static_cast<double>(advs.size());
    for (double a : advs) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(advs.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) batch[k].advantage = sd > 1e-8 ? (advs[k] - mean) / sd : 0.0;

    Network<float> grad(shape);
    const double scale = 1.0 / static_cast<double>(batch.size());
    last = UpdateStats{};
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto t = sample_loss(net, batch[k], cfg.loss, &grad, scale);
      check_finite(t, "on-policy", static_cast<int>(k));
      last.policy_loss += t.policy * scale;
      last.value_loss += t.value * scale;
      last.entropy += t.entropy * scale;
    }
    last.samples = static_cast<int>(batch.size());
    apply(grad);
  }

  void replay_update() {
    const auto draw = replay.sample(static_cast<std::size_t>(cfg.batch_size), learn_rng);
    Network<float> grad(shape);
    const double scale = 1.0 / static_cast<double>(draw.indices.size());
    std::vector<double> td(draw.indices.size());
    for (std::size_t k = 0; k < draw.indices.size(); ++k) {
      const Transition& t = replay.at(draw.indices[k]);
      double target = t.reward;
      if (!t.done) {
        ForwardCache<float> cache;
        const float next_v = forward(net, build_input<float>(t.next_obs, t.next_cond), cache).value;
        target += cfg.gamma * (t.next_value_offset + next_v);
      }
      LossSample<float> s;
      s.input = build_input<float>(t.obs, t.cond);
      s.mask = t.mask;
      s.action = t.action;
      s.behavior_prob = t.behavior_prob;
      s.value_target = target;
      s.value_offset = t.value_offset;
      s.weight = draw.weights[k];
      const auto terms = sample_loss(net, s, cfg.loss, &grad, scale);
      check_finite(terms, "replay", static_cast<int>(k));
      td[k] = terms.td_error;
    }
    apply(grad);
    replay.update_priorities(draw.indices, td);
  }

  void learn() {
    on_policy_update();
    for (const auto& ep : pending) replay.push_episode(ep.trace.transitions);
    pending.clear();
    replay_credit += cfg.replay_ratio;
    while (replay_credit >= 1.0) {
      replay_credit -= 1.0;
      replay_update();
    }
    {
      std::lock_guard lock(mu);
      snapshot = std::make_shared<const Network<float>>(net);
    }
    const int done = static_cast<int>(curve.size());
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() && done % cfg.checkpoint_every == 0)
      save(cfg.checkpoint_path);
  }

  int run_sequential(int target) {
    while (static_cast<int>(curve.size()) < target) {
      const Task t = next_task();
      record(play_with_retries(t, net));
    }
    return target;
  }

  int run_threaded(int target) {
    std::condition_variable cv;
    std::deque<EpisodeResult> results;
    std::exception_ptr failure;
    bool stop = false;
    int in_flight_target = target - static_cast<int>(curve.size());

    auto actor = [&] {
      for (;;) {
        Task t;
        std::shared_ptr<const Network<float>> policy;
        {
          std::lock_guard lock(mu);
          if (stop || in_flight_target <= 0) return;
          --in_flight_target;
          t = next_task();
          policy = snapshot;
        }
        try {
          EpisodeResult r = play_with_retries(t, *policy);
          std::lock_guard lock(mu);
          results.push_back(std::move(r));
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          stop = true;
        }
        cv.notify_all();
      }
    };

    std::vector<std::thread> pool;
    for (int i = 0; i < cfg.n_actors; ++i) pool.emplace_back(actor);
    try {
      while (static_cast<int>(curve.size()) < target) {
        EpisodeResult r;
        {
          std::unique_lock lock(mu);
          cv.wait(lock, [&] { return !results.empty() || failure; });
          if (failure) break;
          r = std::move(results.front());
          results.pop_front();
        }
        record(std::move(r));
      }
    } catch (...) {
      std::lock_guard lock(mu);
      if (!failure) failure = std::current_exception();
      stop = true;
    }
    {
      std::lock_guard lock(mu);
      stop = true;
    }
    for (auto& th : pool) th.join();
    // Episodes dispatched but never recorded are dropped; the next run redraws them.
    dispatched = static_cast<int>(curve.size());
    if (failure) std::rethrow_exception(failure);
    return target;
  }

  int run(std::optional<int> stop_after) {
    const int budget = cfg.total_episodes();
    const int target = std::min(budget, stop_after.value_or(budget));
    if (static_cast<int>(curve.size()) < target) {
      if (cfg.n_actors == 1)
        run_sequential(target);
      else
        run_threaded(target);
    }
    if (static_cast<int>(curve.size()) >= budget && !pending.empty()) learn();
    if (static_cast<int>(curve.size()) >= budget && !cfg.checkpoint_path.empty()) save(cfg.checkpoint_path);
    return static_cast<int>(curve.size());
  }

  nlohmann::json meta() const {
    // The file location is not part of the run; leaving it out keeps copies byte-identical.
    TrainConfig stored = cfg;
    stored.checkpoint_path.clear();
    return {{"config", stored},
            {"net_shape", shape},
            {"episodes_done", curve.size()},
            {"replay_credit", replay_credit},
            {"adam_steps", adam.steps()},
            {"coord_rng", coord_rng.save_state()},
            {"learn_rng", learn_rng.save_state()},
            {"curriculum", curriculum_to_json(curriculum)},
            {"curve", curve_json(curve)}};
  }

  void save(const std::string& path) const {
    if (!pending.empty())
      throw Error("checkpoint requested between updates (" + std::to_string(pending.size()) +
                  " episodes not yet learned from); stop on a multiple of episodes_per_update");
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw Error("cannot write checkpoint " + tmp);
      out.write(kMagic, sizeof kMagic);
      bin::write(out, kCheckpointVersion);
      bin::write(out, cfg.identity_hash());
      bin::write_str(out, meta().dump());
      write_net(out, net);
      auto& self = const_cast<Impl&>(*this);
      write_net(out, self.adam.first_moment());
      write_net(out, self.adam.second_moment());
      replay.save(out);
      if (!out) throw Error("failed writing checkpoint " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot move checkpoint into place at " + path);
  }

  void load(std::istream& in, const std::string& path) {
    const auto h = read_header(in, path);
    if (h.hash != cfg.identity_hash())
      throw Error(path + " was written by a different training configuration (config hash mismatch)");
    const auto& m = h.meta;
    if (m.at("net_shape").get<NetConfig>() != shape) throw Error(path + ": network shape differs");
    curve = curve_from_json(m.at("curve"));
    if (m.at("episodes_done").get<std::size_t>() != curve.size()) throw Error(path + ": corrupt episode counter");
    dispatched = static_cast<int>(curve.size());
    replay_credit = m.at("replay_credit").get<double>();
    adam.set_steps(m.at("adam_steps").get<long>());
    coord_rng.load_state(m.at("coord_rng").get<std::string>());
    learn_rng.load_state(m.at("learn_rng").get<std::string>());
    curriculum = curriculum_from_json(m.at("curriculum"));
    read_net(in, net);
    read_net(in, adam.first_moment());
    read_net(in, adam.second_moment());
    replay.load(in);
    snapshot = std::make_shared<const Network<float>>(net);
  }
};

Trainer::Trainer(TrainConfig cfg, std::vector<LevelSpec> levels, LevelStatsTable stats)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(levels), std::move(stats))) {}
Trainer::Trainer(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Trainer::~Trainer() = default;
Trainer::Trainer(Trainer&&) noexcept = default;

int Trainer::run(std::optional<int> stop_after) { return impl_->run(stop_after); }
void Trainer::save_checkpoint(const std::string& path) const { impl_->save(path); }

Trainer Trainer::resume(const std::string& path, TrainConfig cfg, std::vector<LevelSpec> levels,
                        LevelStatsTable stats) {
  auto impl = std::make_unique<Impl>(std::move(cfg), std::move(levels), std::move(stats));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  impl->load(in, path);
  return Trainer(std::move(impl));
}

const TrainConfig& Trainer::config() const { return impl_->cfg; }
const Network<float>& Trainer::network() const { return impl_->net; }
const std::vector<CurvePoint>& Trainer::curve() const { return impl_->curve; }
const CurriculumState& Trainer::curriculum() const { return impl_->curriculum; }
const ReplayBuffer& Trainer::replay() const { return impl_->replay; }
const UpdateStats& Trainer::last_update() const { return impl_->last; }
int Trainer::episodes_done() const { return static_cast<int>(impl_->curve.size()); }

PolicyCheckpoint load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  const auto h = read_header(in, path);
  PolicyCheckpoint p;
  p.config = h.meta.at("config").get<TrainConfig>();
  p.net = Network<float>(h.meta.at("net_shape").get<NetConfig>());
  read_net(in, p.net);
  return p;
}

}  // namespace carmi
