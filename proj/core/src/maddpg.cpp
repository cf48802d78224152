#include "pursuit/maddpg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pursuit::marl {

using grad::Tape;
using grad::Value;

std::vector<double> augment_observation(
    const std::vector<double>& o_b, AugmentMode mode,
    const filter::MixturePrediction* pred, Vec2 x_s,
    const std::vector<world::Detection>& detection_log, int t,
    Vec2 evader_start, int t_max) {
  std::vector<double> o = o_b;
  switch (mode) {
    case AugmentMode::Base:
      break;
    case AugmentMode::Detections: {
      filter::FilterInput in =
          filter::build_filter_input(detection_log, t, evader_start, t_max);
      o.insert(o.end(), in.v.begin() + 3, in.v.end());
      break;
    }
    case AugmentMode::Filter: {
      if (pred == nullptr)
        throw world::ContractError(
            "filter-mode observation requires a prediction");
      for (int j = 0; j < filter::kNumComponents; ++j) {
        o.push_back(pred->lambda[j]);
        o.push_back(pred->mu[j].x - x_s.x);  // relative mean
        o.push_back(pred->mu[j].y - x_s.y);
        o.push_back(pred->sigma[j].x);
        o.push_back(pred->sigma[j].y);
      }
      break;
    }
  }
  return o;
}

int augmented_dim(int base_dim, AugmentMode mode) {
  switch (mode) {
    case AugmentMode::Base: return base_dim;
    case AugmentMode::Detections: return base_dim + 10;
    case AugmentMode::Filter: return base_dim + 5 * filter::kNumComponents;
  }
  return base_dim;
}

void ReplayBuffer::push(Transition t) {
  if (store_.size() < capacity_) {
    store_.push_back(std::move(t));
  } else {
    store_[next_] = std::move(t);  // overwrite oldest
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<std::size_t> ReplayBuffer::sample_indices(
    std::size_t batch, std::mt19937_64& rng) const {
  if (store_.empty()) throw world::ContractError("sampling empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, store_.size() - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

// ---------------------------------------------------------------------------
// Networks

Actor::Actor(int obs_dim, int hidden, double max_speed, std::uint64_t seed)
    : max_speed_(max_speed), obs_dim_(obs_dim) {
  std::mt19937_64 rng(seed);
  l1_ = grad::make_linear(params_, "actor.fc1", obs_dim, hidden, rng);
  l2_ = grad::make_linear(params_, "actor.fc2", hidden, hidden, rng);
  l3_ = grad::make_linear(params_, "actor.out", hidden, 2, rng);
}

Value Actor::forward(Tape& t, Value obs) {
  Value h = t.relu(apply_linear(t, l1_, obs));
  h = t.relu(apply_linear(t, l2_, h));
  return t.scale(t.tanh(apply_linear(t, l3_, h)), max_speed_);
}

Vec2 Actor::act(const std::vector<double>& obs, double noise_scale,
                std::mt19937_64& rng) {
  if (static_cast<int>(obs.size()) != obs_dim_)
    throw world::ContractError("actor observation dimension mismatch");
  Tape t;
  Value out = forward(t, t.leaf(obs.data(), 1, obs_dim_));
  Vec2 a{t.val(out)[0], t.val(out)[1]};
  if (noise_scale > 0) {
    std::normal_distribution<double> n(0.0, noise_scale * max_speed_);
    a.x += n(rng);
    a.y += n(rng);
  }
  return clip_norm(a, max_speed_);
}

Critic::Critic(int joint_dim, int h1, int h2, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  l1_ = grad::make_linear(params_, "critic.fc1", joint_dim, h1, rng);
  l2_ = grad::make_linear(params_, "critic.fc2", h1, h2, rng);
  l3_ = grad::make_linear(params_, "critic.out", h2, 1, rng);
}

Value Critic::forward(Tape& t, Value joint) {
  Value h = t.relu(apply_linear(t, l1_, joint));
  h = t.relu(apply_linear(t, l2_, h));
  return apply_linear(t, l3_, h);
}

double td_target(double r, double gamma, double q_next, bool done) {
  return r + gamma * (done ? 0.0 : 1.0) * q_next;
}

void soft_update(grad::ParamStore& target, const grad::ParamStore& online,
                 double tau) {
  const auto& tp = target.all();
  const auto& op = online.all();
  if (tp.size() != op.size())
    throw grad::DimensionError("soft_update: parameter count mismatch");
  for (std::size_t i = 0; i < tp.size(); ++i) {
    if (tp[i]->data.size() != op[i]->data.size())
      throw grad::DimensionError("soft_update: shape mismatch at " +
                                 tp[i]->name);
    for (std::size_t j = 0; j < tp[i]->data.size(); ++j)
      tp[i]->data[j] = tau * op[i]->data[j] + (1 - tau) * tp[i]->data[j];
  }
}

PolicySet make_policy_set(int n_agents, int obs_dim,
                          const std::vector<double>& max_speeds,
                          const TrainConfig& cfg, std::uint64_t seed) {
  PolicySet ps;
  ps.obs_dim = obs_dim;
  int joint = n_agents * obs_dim + 2 * n_agents;
  for (int i = 0; i < n_agents; ++i) {
    AgentLearner a;
    std::uint64_t s = seed * 1000003ull + static_cast<std::uint64_t>(i);
    a.actor = Actor(obs_dim, cfg.actor_hidden, max_speeds[i], s);
    a.actor_target = Actor(obs_dim, cfg.actor_hidden, max_speeds[i], s);
    a.critic = Critic(joint, cfg.critic_hidden1, cfg.critic_hidden2, s + 500);
    a.critic_target =
        Critic(joint, cfg.critic_hidden1, cfg.critic_hidden2, s + 500);
    a.opt_actor.cfg.lr = cfg.lr_actor;
    a.opt_critic.cfg.lr = cfg.lr_critic;
    ps.agents.push_back(std::move(a));
  }
  return ps;
}

namespace {

void gather_into(grad::ParamStore& dst, const std::string& prefix,
                 const grad::ParamStore& src) {
  for (const auto& p : src.all()) {
    grad::Param& np = dst.add(prefix + p->name, p->rows, p->cols);
    np.data = p->data;
  }
}

void scatter_from(grad::ParamStore& dst, const std::string& prefix,
                  grad::ParamStore& combined) {
  for (const auto& p : dst.all()) {
    grad::Param* src = combined.find(prefix + p->name);
    if (src == nullptr)
      throw std::runtime_error("policy checkpoint missing " + prefix + p->name);
    p->data = src->data;
  }
}

}  // namespace

void PolicySet::save(const std::string& path) const {
  grad::ParamStore combined;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    std::string pre = "agent" + std::to_string(i) + ".";
    auto& a = const_cast<AgentLearner&>(agents[i]);
    gather_into(combined, pre, a.actor.params());
    gather_into(combined, pre + "tgt.", a.actor_target.params());
    gather_into(combined, pre + "q.", a.critic.params());
    gather_into(combined, pre + "q.tgt.", a.critic_target.params());
  }
  grad::save_checkpoint(combined, path);
}

void PolicySet::load(const std::string& path) {
  grad::ParamStore combined;
  grad::load_checkpoint(combined, path);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    std::string pre = "agent" + std::to_string(i) + ".";
    scatter_from(agents[i].actor.params(), pre, combined);
    scatter_from(agents[i].actor_target.params(), pre + "tgt.", combined);
    scatter_from(agents[i].critic.params(), pre + "q.", combined);
    scatter_from(agents[i].critic_target.params(), pre + "q.tgt.", combined);
  }
}

// ---------------------------------------------------------------------------
// Updates

namespace {

struct BatchMats {
  int B = 0;
  int n_agents = 0;
  int obs_dim = 0;
  std::vector<double> obs;       // B x N*D
  std::vector<double> act;       // B x 2N
  std::vector<double> next_obs;  // B x N*D
  std::vector<double> rewards;   // B x N
  std::vector<char> done;        // B
};

BatchMats gather_batch(const ReplayBuffer& buf,
                       const std::vector<std::size_t>& idx, int n_agents,
                       int obs_dim) {
  BatchMats m;
  m.B = static_cast<int>(idx.size());
  m.n_agents = n_agents;
  m.obs_dim = obs_dim;
  int od = n_agents * obs_dim, ad = 2 * n_agents;
  m.obs.resize(static_cast<std::size_t>(m.B) * od);
  m.act.resize(static_cast<std::size_t>(m.B) * ad);
  m.next_obs.resize(static_cast<std::size_t>(m.B) * od);
  m.rewards.resize(static_cast<std::size_t>(m.B) * n_agents);
  m.done.resize(m.B);
  for (int b = 0; b < m.B; ++b) {
    const Transition& t = buf.at(idx[b]);
    std::copy(t.obs.begin(), t.obs.end(), m.obs.begin() + b * od);
    std::copy(t.act.begin(), t.act.end(), m.act.begin() + b * ad);
    std::copy(t.next_obs.begin(), t.next_obs.end(),
              m.next_obs.begin() + b * od);
    std::copy(t.rewards.begin(), t.rewards.end(),
              m.rewards.begin() + b * n_agents);
    m.done[b] = t.done ? 1 : 0;
  }
  return m;
}

// Q' on next observations through the target actors and target critic.
std::vector<double> target_q(PolicySet& ps, const BatchMats& m, int agent) {
  Tape t;
  Value next = t.leaf(m.next_obs.data(), m.B, m.n_agents * m.obs_dim);
  Value acts;
  for (int j = 0; j < m.n_agents; ++j) {
    Value oj = t.slice_cols(next, j * m.obs_dim, (j + 1) * m.obs_dim);
    Value aj = ps.agents[j].actor_target.forward(t, oj);
    acts = j == 0 ? aj : t.concat_cols(acts, aj);
  }
  Value q = ps.agents[agent].critic_target.forward(t, t.concat_cols(next, acts));
  return t.val(q);
}

}  // namespace

double critic_update(PolicySet& ps, const ReplayBuffer& buf,
                     const std::vector<std::size_t>& idx, int agent,
                     const TrainConfig& cfg) {
  if (idx.empty()) throw world::ContractError("critic_update: empty batch");
  int n = static_cast<int>(ps.agents.size());
  BatchMats m = gather_batch(buf, idx, n, ps.obs_dim);
  std::vector<double> qn = target_q(ps, m, agent);
  std::vector<double> y(m.B);
  for (int b = 0; b < m.B; ++b)
    y[b] = td_target(m.rewards[b * n + agent], cfg.gamma, qn[b], m.done[b]);

  Tape t;
  Value joint = t.concat_cols(t.leaf(m.obs.data(), m.B, n * ps.obs_dim),
                              t.leaf(m.act.data(), m.B, 2 * n));
  Value q = ps.agents[agent].critic.forward(t, joint);
  Value diff = t.sub(q, t.leaf(y.data(), m.B, 1));
  Value loss = t.mean_all(t.mul(diff, diff));
  double loss_v = t.scalar_val(loss);
  ps.agents[agent].critic.params().zero_grad();
  t.backward(loss);
  grad::adam_step(ps.agents[agent].critic.params(),
                  ps.agents[agent].opt_critic);
  return loss_v;
}

double actor_update(PolicySet& ps, const ReplayBuffer& buf,
                    const std::vector<std::size_t>& idx, int agent,
                    const TrainConfig& cfg) {
  if (idx.empty()) throw world::ContractError("actor_update: empty batch");
  (void)cfg;
  int n = static_cast<int>(ps.agents.size());
  BatchMats m = gather_batch(buf, idx, n, ps.obs_dim);

  Tape t;
  Value obs = t.leaf(m.obs.data(), m.B, n * ps.obs_dim);
  Value oi = t.slice_cols(obs, agent * ps.obs_dim, (agent + 1) * ps.obs_dim);
  Value ai = ps.agents[agent].actor.forward(t, oi);
  // Other agents' actions come from the batch.
  Value acts_const = t.leaf(m.act.data(), m.B, 2 * n);
  Value acts;
  for (int j = 0; j < n; ++j) {
    Value aj = j == agent ? ai : t.slice_cols(acts_const, 2 * j, 2 * j + 2);
    acts = j == 0 ? aj : t.concat_cols(acts, aj);
  }
  Value q = ps.agents[agent].critic.forward(t, t.concat_cols(obs, acts));
  Value mean_q = t.mean_all(q);
  double q_v = t.scalar_val(mean_q);
  Value loss = t.neg(mean_q);
  ps.agents[agent].actor.params().zero_grad();
  // The critic accumulates grads here too; they are discarded (its own
  // update zeroes before backprop) and its parameters stay untouched.
  t.backward(loss);
  grad::adam_step(ps.agents[agent].actor.params(), ps.agents[agent].opt_actor);
  return q_v;
}

// ---------------------------------------------------------------------------
// Training loop

MarlResult train_marl(const world::EnvConfig& env_cfg,
                      filter::FilterModel* filter_model, AugmentMode mode,
                      const TrainConfig& cfg, std::uint64_t seed,
                      PolicySet& out) {
  if (mode == AugmentMode::Filter && filter_model == nullptr)
    throw world::ConfigError("filter augmentation requires a filter model");

  MarlResult res;
  if (filter_model != nullptr)
    res.filter_checksum_before =
        grad::checkpoint_checksum(filter_model->params());

  world::Environment probe(env_cfg, seed);
  int first_learnable = 0;
  for (int i = 0; i < static_cast<int>(env_cfg.agents.size()); ++i)
    if (env_cfg.agents[i].learnable) {
      first_learnable = i;
      break;
    }
  int base_dim = static_cast<int>(probe.observe(first_learnable).size());
  int obs_dim = augmented_dim(base_dim, mode);
  int n = env_cfg.num_learnable();
  std::vector<double> speeds;
  for (const auto& a : env_cfg.agents)
    if (a.learnable) speeds.push_back(a.max_speed);

  out = make_policy_set(n, obs_dim, speeds, cfg, seed);
  ReplayBuffer buf(cfg.buffer_capacity);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  double noise = cfg.noise_scale;
  long total_steps = 0;

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    world::Environment env(env_cfg, seed * 7919ull + ep);
    double ep_reward = 0;

    auto observe_all = [&]() {
      filter::MixturePrediction pred;
      bool has_pred = false;
      if (mode == AugmentMode::Filter) {
        filter::FilterInput in = filter::build_filter_input(
            env.state().detection_log, env.state().t, env.evader_start(),
            env_cfg.t_max);
        pred = filter_model->predict(in);
        has_pred = true;
      }
      std::vector<double> joint;
      int li = 0;
      for (int i = 0; i < static_cast<int>(env_cfg.agents.size()); ++i) {
        if (!env_cfg.agents[i].learnable) continue;
        auto o = augment_observation(
            env.observe(i), mode, has_pred ? &pred : nullptr,
            env.state().agent_pos[i], env.state().detection_log,
            env.state().t, env.evader_start(), env_cfg.t_max);
        joint.insert(joint.end(), o.begin(), o.end());
        ++li;
      }
      (void)li;
      return joint;
    };

    std::vector<double> obs = observe_all();
    while (!env.state().done) {
      std::vector<Vec2> actions(n);
      std::vector<double> act_flat;
      for (int i = 0; i < n; ++i) {
        std::vector<double> oi(obs.begin() + i * obs_dim,
                               obs.begin() + (i + 1) * obs_dim);
        actions[i] = out.agents[i].actor.act(oi, noise, rng);
        act_flat.push_back(actions[i].x);
        act_flat.push_back(actions[i].y);
      }
      world::StepResult sr = env.step(actions);
      std::vector<double> next = observe_all();

      double team = 0;
      for (double r : sr.rewards) team += r;
      ep_reward += team / n;

      buf.push({obs, act_flat, sr.rewards, next, sr.done});
      obs = std::move(next);
      ++total_steps;

      if (total_steps % cfg.update_interval == 0 &&
          buf.size() >= static_cast<std::size_t>(cfg.batch)) {
        auto idx = buf.sample_indices(cfg.batch, rng);
        for (int i = 0; i < n; ++i) {
          critic_update(out, buf, idx, i, cfg);
          actor_update(out, buf, idx, i, cfg);
        }
        for (int i = 0; i < n; ++i) {
          soft_update(out.agents[i].actor_target.params(),
                      out.agents[i].actor.params(), cfg.tau);
          soft_update(out.agents[i].critic_target.params(),
                      out.agents[i].critic.params(), cfg.tau);
        }
      }
    }
    res.episode_reward.push_back(ep_reward);
    noise *= cfg.noise_decay;
  }

  if (filter_model != nullptr)
    res.filter_checksum_after =
        grad::checkpoint_checksum(filter_model->params());
  return res;
}

}  // namespace pursuit::marl
