#include "opshape/ddpg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace opshape {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer: capacity must be > 0");
  storage_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (t.state.size() != t.next_state.size()) throw std::invalid_argument("replay buffer: state size mismatch");
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(t));
  } else {
    storage_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay buffer: index out of range");
  // Once full, the cursor points at the oldest entry.
  return size_ < capacity_ ? storage_[i] : storage_[(cursor_ + i) % capacity_];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, RngStream& rng) const {
  if (size_ == 0) throw std::logic_error("replay buffer: sampling from an empty buffer");
  std::vector<const Transition*> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(&storage_[rng.index(size_)]);
  return out;
}

void ReplayBuffer::clear() {
  storage_.clear();
  cursor_ = 0;
  size_ = 0;
}

OuNoise::OuNoise(std::size_t dim, double theta_, double sigma_, double dt_)
    : theta(theta_), sigma(sigma_), dt(dt_), state(dim, 0.0) {}

void OuNoise::reset() { std::fill(state.begin(), state.end(), 0.0); }

const std::vector<double>& OuNoise::sample(RngStream& rng) {
  const double diffusion = sigma * std::sqrt(dt);
  for (double& x : state) x += theta * (0.0 - x) * dt + diffusion * rng.normal();
  return state;
}

void DdpgConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("ddpg: gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("ddpg: tau must lie in (0, 1]");
  if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) throw std::invalid_argument("ddpg: reward_scale must be > 0");
  if (batch_size == 0) throw std::invalid_argument("ddpg: batch_size must be > 0");
  if (buffer_capacity == 0) throw std::invalid_argument("ddpg: buffer_capacity must be > 0");
  if (hidden.empty() || std::find(hidden.begin(), hidden.end(), 0u) != hidden.end())
    throw std::invalid_argument("ddpg: hidden layer sizes must be positive");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw std::invalid_argument("ddpg: learning rates must be > 0");
  if (!(ou_theta >= 0.0) || !(ou_sigma >= 0.0) || !(ou_sigma_final >= 0.0) || !(ou_dt > 0.0))
    throw std::invalid_argument("ddpg: invalid noise parameters");
  if (!(actor_preactivation_l2 >= 0.0)) throw std::invalid_argument("ddpg: actor_preactivation_l2 must be >= 0");
  if (!(final_layer_init >= 0.0)) throw std::invalid_argument("ddpg: final_layer_init must be >= 0");
}

namespace {

Architecture make_arch(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs,
                       Activation head) {
  Architecture arch;
  arch.inputs = inputs;
  for (std::size_t h : hidden) arch.layers.push_back({h, Activation::relu});
  arch.layers.push_back({outputs, head});
  return arch;
}

void shrink_head(Mlp& net, double bound, RngStream& rng) {
  if (bound <= 0.0) return;
  Eigen::MatrixXd& w = net.layers.back().weights;
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
}

struct Batch {
  Eigen::MatrixXd states, actions, next_states;
  Eigen::RowVectorXd rewards, not_done;
};

Batch assemble(std::span<const Transition* const> batch, std::size_t obs_dim, std::size_t act_dim) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Batch b;
  b.states.resize(static_cast<Eigen::Index>(obs_dim), n);
  b.next_states.resize(static_cast<Eigen::Index>(obs_dim), n);
  b.actions.resize(static_cast<Eigen::Index>(act_dim), n);
  b.rewards.resize(n);
  b.not_done.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = *batch[static_cast<std::size_t>(j)];
    if (t.state.size() != obs_dim || t.next_state.size() != obs_dim || t.action.size() != act_dim)
      throw std::invalid_argument("ddpg: transition shape mismatch");
    b.states.col(j) = Eigen::Map<const Eigen::VectorXd>(t.state.data(), static_cast<Eigen::Index>(obs_dim));
    b.next_states.col(j) = Eigen::Map<const Eigen::VectorXd>(t.next_state.data(), static_cast<Eigen::Index>(obs_dim));
    b.actions.col(j) = Eigen::Map<const Eigen::VectorXd>(t.action.data(), static_cast<Eigen::Index>(act_dim));
    b.rewards(j) = t.reward;
    b.not_done(j) = t.done ? 0.0 : 1.0;
  }
  return b;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

std::uint64_t fnv1a(std::uint64_t h, const Mlp& net) {
  for (const double v : net.flat_params()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

constexpr std::array<char, 8> kCheckpointMagic = {'O', 'P', 'S', 'D', 'D', 'P', 'G', '1'};

}  // namespace

DdpgAgent::DdpgAgent(std::size_t observation_size, std::size_t action_size, DdpgConfig config, std::uint64_t seed)
    : observation_size_(observation_size),
      action_size_(action_size),
      config_(std::move(config)),
      rng_(seed),
      buffer_(config_.buffer_capacity),
      noise_(action_size, config_.ou_theta, config_.ou_sigma, config_.ou_dt) {
  config_.validate();
  if (observation_size == 0 || action_size == 0) throw std::invalid_argument("ddpg: empty observation or action");

  actor_ = init_params(make_arch(observation_size, config_.hidden, action_size, Activation::tanh), rng_);
  shrink_head(actor_, config_.final_layer_init, rng_);
  critic_ = init_params(make_arch(observation_size + action_size, config_.hidden, 1, Activation::identity), rng_);
  shrink_head(critic_, config_.final_layer_init, rng_);
  sync_targets();

  actor_opt_ = make_adam(actor_, {config_.actor_lr, config_.beta1, config_.beta2, config_.adam_epsilon});
  critic_opt_ = make_adam(critic_, {config_.critic_lr, config_.beta1, config_.beta2, config_.adam_epsilon});
}

void DdpgAgent::sync_targets() {
  actor_target_ = actor_;
  critic_target_ = critic_;
}

void DdpgAgent::require_initialized() const {
  if (actor_.layers.empty() || critic_.layers.empty() || actor_target_.layers.empty() || critic_target_.layers.empty())
    throw std::logic_error("ddpg: networks are not initialized");
}

std::vector<double> DdpgAgent::select_action(std::span<const double> observation, bool explore) {
  if (observation.size() != observation_size_) throw std::invalid_argument("ddpg: observation size mismatch");
  std::vector<double> action = forward(actor_, observation);
  if (explore) {
    const std::vector<double>& n = noise_.sample(rng_);
    for (std::size_t i = 0; i < action.size(); ++i) action[i] += n[i];
  }
  for (double& a : action) a = std::clamp(a, -1.0, 1.0);
  return action;
}

void DdpgAgent::store(Transition t) {
  if (t.state.size() != observation_size_ || t.action.size() != action_size_)
    throw std::invalid_argument("ddpg: transition shape mismatch");
  buffer_.push(std::move(t));
}

TrainStats DdpgAgent::train_step() {
  const std::vector<const Transition*> batch = buffer_.sample(config_.batch_size, rng_);
  return train_step(batch);
}

TrainStats DdpgAgent::train_step(std::span<const Transition* const> batch) {
  TrainStats stats;
  stats.critic_loss = update_critic(batch);
  stats.actor_objective = update_actor(batch);
  update_targets();
  return stats;
}

double DdpgAgent::update_critic(std::span<const Transition* const> batch) {
  require_initialized();
  if (batch.empty()) throw std::invalid_argument("ddpg: empty batch");
  const Batch b = assemble(batch, observation_size_, action_size_);
  const double n = static_cast<double>(batch.size());

  const Eigen::MatrixXd next_actions = forward(actor_target_, b.next_states);
  const Eigen::MatrixXd next_q = forward(critic_target_, stack(b.next_states, next_actions));
  const Eigen::RowVectorXd targets =
      config_.reward_scale * b.rewards + config_.gamma * b.not_done.cwiseProduct(next_q.row(0));

  ForwardCache cache;
  const Eigen::MatrixXd q = forward(critic_, stack(b.states, b.actions), cache);
  const Eigen::RowVectorXd err = q.row(0) - targets;
  const Eigen::MatrixXd grad_q = (2.0 / n) * err;
  const GradientBundle grads = backward(critic_, cache, grad_q);
  adam_step(critic_, grads, critic_opt_);
  return err.squaredNorm() / n;
}

double DdpgAgent::update_actor(std::span<const Transition* const> batch) {
  require_initialized();
  if (batch.empty()) throw std::invalid_argument("ddpg: empty batch");
  const Batch b = assemble(batch, observation_size_, action_size_);
  const double n = static_cast<double>(batch.size());
  const auto act_rows = static_cast<Eigen::Index>(action_size_);

  ForwardCache actor_cache;
  const Eigen::MatrixXd actions = forward(actor_, b.states, actor_cache);
  ForwardCache critic_cache;
  const Eigen::MatrixXd q = forward(critic_, stack(b.states, actions), critic_cache);

  // dQ/da through the critic's action inputs; critic parameter grads are discarded.
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(1, q.cols(), 1.0 / n);
  const GradientBundle critic_grads = backward(critic_, critic_cache, ones);
  const Eigen::MatrixXd dq_da = critic_grads.input.bottomRows(act_rows);

  // Adam descends, so feed the negated ascent direction.
  GradientBundle actor_grads;
  if (config_.actor_preactivation_l2 > 0.0) {
    const Eigen::MatrixXd z = head_preactivation(actor_, actor_cache);
    actor_grads = backward(actor_, actor_cache, -dq_da, (2.0 * config_.actor_preactivation_l2 / n) * z);
  } else {
    actor_grads = backward(actor_, actor_cache, -dq_da);
  }
  adam_step(actor_, actor_grads, actor_opt_);
  return q.sum() / n;
}

void DdpgAgent::update_targets() {
  soft_update(actor_target_, actor_, config_.tau);
  soft_update(critic_target_, critic_, config_.tau);
}

std::uint64_t DdpgAgent::parameter_checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const Mlp* net : {&actor_, &critic_, &actor_target_, &critic_target_}) h = fnv1a(h, *net);
  return h;
}

AgentCheckpoint DdpgAgent::snapshot(std::string metadata) const {
  return {std::move(metadata), actor_, critic_, actor_target_, critic_target_};
}

void DdpgAgent::restore(const AgentCheckpoint& ckpt) {
  if (!same_architecture(ckpt.actor, actor_) || !same_architecture(ckpt.critic, critic_) ||
      !same_architecture(ckpt.actor_target, actor_) || !same_architecture(ckpt.critic_target, critic_))
    throw std::invalid_argument("ddpg: checkpoint architecture does not match agent");
  actor_ = ckpt.actor;
  critic_ = ckpt.critic;
  actor_target_ = ckpt.actor_target;
  critic_target_ = ckpt.critic_target;
}

void save_checkpoint(const AgentCheckpoint& ckpt, std::ostream& os) {
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  const auto len = static_cast<std::uint64_t>(ckpt.metadata.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(ckpt.metadata.data(), static_cast<std::streamsize>(ckpt.metadata.size()));
  for (const Mlp* net : {&ckpt.actor, &ckpt.critic, &ckpt.actor_target, &ckpt.critic_target}) save_mlp(*net, os);
  if (!os) throw std::runtime_error("agent checkpoint: write failed");
}

AgentCheckpoint load_checkpoint(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kCheckpointMagic) throw std::runtime_error("agent checkpoint: bad magic");
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is || len > (1ULL << 30)) throw std::runtime_error("agent checkpoint: bad metadata length");
  AgentCheckpoint ckpt;
  ckpt.metadata.resize(len);
  is.read(ckpt.metadata.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("agent checkpoint: truncated metadata");
  ckpt.actor = load_mlp(is);
  ckpt.critic = load_mlp(is);
  ckpt.actor_target = load_mlp(is);
  ckpt.critic_target = load_mlp(is);
  return ckpt;
}

}  // namespace opshape
