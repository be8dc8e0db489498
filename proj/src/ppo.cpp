#include "warfarin/ppo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

namespace warfarin {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

double wavelet_psi(double percent_change, const ForgingConfig& f) {
  if (percent_change == 0.0) return f.focus_peak;
  return (-f.focus_dip / f.focus_radius) * std::abs(percent_change) + f.focus_dip;
}

double forging_schedule(double delta, const ForgingConfig& f) {
  return 1.0 / (1.0 + std::exp(-f.schedule_rate * (delta - f.schedule_midpoint)));
}

Eigen::VectorXd forging_offsets(const ActionSpace& actions, const ForgingConfig& f, double delta) {
  Eigen::VectorXd off = Eigen::VectorXd::Zero(actions.size());
  if (!f.focus_enabled) return off;
  const double h = forging_schedule(delta, f);
  for (int j = 0; j < actions.size(); ++j)
    off[j] = h * wavelet_psi(actions.percent_changes[j], f);
  return off;
}

Eigen::MatrixXd policy_logits(const DenseNet& actor, const Eigen::MatrixXd& obs,
                              const ActionSpace& actions, const ForgingConfig& f, double delta) {
  Eigen::MatrixXd logits = actor.forward(obs);
  if (f.focus_enabled) logits.rowwise() += forging_offsets(actions, f, delta).transpose();
  return logits;
}

double group_lasso_penalty(const DenseNet& actor) {
  const DenseLayer& out = actor.layers().back();
  double total = 0.0;
  for (Eigen::Index j = 0; j < out.weights.rows(); ++j) {
    double sq = out.weights.row(j).squaredNorm() + out.bias[j] * out.bias[j];
    total += std::sqrt(sq);
  }
  return total;
}

void add_group_lasso_gradient(const DenseNet& actor, double coef, Gradients& grad) {
  if (coef == 0.0) return;
  const DenseLayer& out = actor.layers().back();
  const std::size_t last = actor.layers().size() - 1;
  for (Eigen::Index j = 0; j < out.weights.rows(); ++j) {
    double norm = std::sqrt(out.weights.row(j).squaredNorm() + out.bias[j] * out.bias[j]);
    if (norm == 0.0) continue;  // subgradient at the origin: stay at zero
    grad.weights[last].row(j) += (coef / norm) * out.weights.row(j);
    grad.bias[last][j] += (coef / norm) * out.bias[j];
  }
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    p.row(i) = (e / e.sum()).matrix();
  }
  return p;
}

Eigen::VectorXd log_softmax_pick(const Eigen::MatrixXd& logits, const std::vector<int>& actions) {
  if (static_cast<Eigen::Index>(actions.size()) != logits.rows())
    throw DomainError("log_softmax_pick: action count does not match logits");
  Eigen::VectorXd out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double m = logits.row(i).maxCoeff();
    double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out[i] = logits(i, actions[static_cast<std::size_t>(i)]) - lse;
  }
  return out;
}

void compute_gae(std::span<const double> rewards, std::span<const double> values, double discount,
                 double lambda, std::span<double> advantages, std::span<double> returns) {
  const std::size_t n = rewards.size();
  if (values.size() != n || advantages.size() != n || returns.size() != n)
    throw DomainError("compute_gae: span sizes differ");
  double next_adv = 0.0;
  double next_value = 0.0;  // terminal bootstrap
  for (std::size_t i = n; i-- > 0;) {
    double delta = rewards[i] + discount * next_value - values[i];
    next_adv = delta + discount * lambda * next_adv;
    advantages[i] = next_adv;
    returns[i] = next_adv + values[i];
    next_value = values[i];
  }
}

namespace {

struct SurrogateGrad {
  Eigen::MatrixXd dlogits;  // dLoss/dlogits, loss = -clipped surrogate (+ entropy term)
  double surrogate = 0.0;
  double kl = 0.0;
};

SurrogateGrad surrogate_gradient(const Eigen::MatrixXd& logits, const RolloutBuffer& buffer,
                                 const PpoConfig& cfg) {
  const Eigen::Index n = logits.rows();
  SurrogateGrad out;
  out.dlogits = Eigen::MatrixXd::Zero(n, logits.cols());
  Eigen::MatrixXd probs = softmax_rows(logits);
  Eigen::VectorXd logp_new = log_softmax_pick(logits, buffer.actions);
  const double inv_n = 1.0 / static_cast<double>(n);
  double surrogate = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = buffer.actions[static_cast<std::size_t>(i)];
    const double adv = buffer.advantages[i];
    const double ratio = std::exp(logp_new[i] - buffer.logp_old[i]);
    const double clipped =
        std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    surrogate += std::min(ratio * adv, clipped * adv);
    // Pathwise gradient of min(ratio*adv, clipped*adv): zero when the
    // clipped branch is active (its derivative wrt the logits vanishes).
    const bool unclipped_active = ratio * adv <= clipped * adv;
    if (unclipped_active) {
      const double w = -inv_n * adv * ratio;  // descent on -surrogate
      out.dlogits.row(i) += w * (-probs.row(i));
      out.dlogits(i, a) += w;
    }
    if (cfg.entropy_coef != 0.0) {
      double entropy = 0.0;
      for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        double p = probs(i, j);
        if (p > 0) entropy -= p * std::log(p);
      }
      for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        double p = probs(i, j);
        double dh = p > 0 ? -p * (std::log(p) + entropy) : 0.0;
        out.dlogits(i, j) += -cfg.entropy_coef * inv_n * dh;
      }
    }
  }
  out.surrogate = surrogate * inv_n;
  out.kl = (buffer.logp_old - logp_new).mean();
  return out;
}

}  // namespace

ActorUpdateStats actor_update(DenseNet& actor, AdamOptimizer& opt, const LrSchedule& lr,
                              RolloutBuffer& buffer, const PpoConfig& cfg,
                              const ActionSpace& actions, const ForgingConfig& forging,
                              double delta) {
  if (buffer.size() == 0) throw DomainError("actor_update: empty buffer");
  // Normalize advantages once per update pass.
  const double mean = buffer.advantages.mean();
  double var = (buffer.advantages.array() - mean).square().sum() /
               static_cast<double>(buffer.size());
  const double sd = std::sqrt(std::max(var, 1e-12));
  buffer.advantages = ((buffer.advantages.array() - mean) / sd).matrix();

  ActorUpdateStats stats;
  const Eigen::VectorXd offsets = forging_offsets(actions, forging, delta);
  for (int it = 0; it < cfg.actor_iterations; ++it) {
    ForwardCache cache;
    Eigen::MatrixXd logits = actor.forward(buffer.obs, cache);
    if (forging.focus_enabled) logits.rowwise() += offsets.transpose();
    SurrogateGrad sg = surrogate_gradient(logits, buffer, cfg);
    Gradients grad = actor.backward(cache, sg.dlogits);
    add_group_lasso_gradient(actor, forging.group_lasso_coef, grad);
    opt.step(actor, grad, lr_at(lr, opt.step_count()));
    ++stats.iterations;

    Eigen::MatrixXd new_logits = actor.forward(buffer.obs);
    if (forging.focus_enabled) new_logits.rowwise() += offsets.transpose();
    Eigen::VectorXd logp_new = log_softmax_pick(new_logits, buffer.actions);
    stats.kl = (buffer.logp_old - logp_new).mean();
    stats.surrogate_loss = -sg.surrogate;
    if (stats.kl > cfg.target_kl) {
      stats.early_stopped = true;
      break;
    }
  }
  stats.penalty = group_lasso_penalty(actor);
  return stats;
}

double critic_update(DenseNet& critic, AdamOptimizer& opt, const LrSchedule& lr,
                     const RolloutBuffer& buffer, int iterations) {
  if (buffer.size() == 0) throw DomainError("critic_update: empty buffer");
  const double inv_n = 1.0 / static_cast<double>(buffer.size());
  double loss = 0.0;
  for (int it = 0; it < iterations; ++it) {
    ForwardCache cache;
    Eigen::MatrixXd v = critic.forward(buffer.obs, cache);
    Eigen::MatrixXd diff = v.col(0) - buffer.returns;
    loss = diff.array().square().mean();
    Eigen::MatrixXd grad_out = (2.0 * inv_n) * diff;
    Gradients grad = critic.backward(cache, grad_out);
    opt.step(critic, grad, lr_at(lr, opt.step_count()));
  }
  return loss;
}

ActionUsage action_usage(const DenseNet& actor, const ForgingConfig& forging, double delta,
                         const Eigen::MatrixXd& obs, const ActionSpace& actions, double epsilon) {
  ActionUsage usage;
  const DenseLayer& out = actor.layers().back();
  for (Eigen::Index j = 0; j < out.weights.rows(); ++j) {
    double norm = std::sqrt(out.weights.row(j).squaredNorm() + out.bias[j] * out.bias[j]);
    if (norm >= epsilon) ++usage.available;
  }
  if (obs.rows() == 0) return usage;
  Eigen::MatrixXd logits = policy_logits(actor, obs, actions, forging, delta);
  std::set<int> used;
  int zero_idx = actions.zero_change_index();
  int no_change = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    logits.row(i).maxCoeff(&best);
    used.insert(static_cast<int>(best));
    if (static_cast<int>(best) == zero_idx) ++no_change;
  }
  usage.used = static_cast<int>(used.size());
  usage.no_change_fraction = static_cast<double>(no_change) / static_cast<double>(logits.rows());
  return usage;
}

bool EarlyStopTracker::update(long total_patients_seen, double pass_pttr) {
  if (pass_pttr > best_pttr_) {
    best_pttr_ = pass_pttr;
    since_improvement_ = 0;
    improved_last_ = true;
  } else {
    ++since_improvement_;
    improved_last_ = false;
  }
  return total_patients_seen >= warmup_patients_ && since_improvement_ >= patience_passes_;
}

namespace {

constexpr char kCheckpointMagic[8] = {'W', 'F', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json forging_json(const ForgingConfig& f) {
  return {{"group_lasso_coef", f.group_lasso_coef}, {"focus_enabled", f.focus_enabled},
          {"focus_peak", f.focus_peak},             {"focus_dip", f.focus_dip},
          {"focus_radius", f.focus_radius},         {"schedule_rate", f.schedule_rate},
          {"schedule_midpoint", f.schedule_midpoint}};
}

ForgingConfig forging_from_json(const nlohmann::json& j) {
  ForgingConfig f;
  f.group_lasso_coef = j.at("group_lasso_coef").get<double>();
  f.focus_enabled = j.at("focus_enabled").get<bool>();
  f.focus_peak = j.at("focus_peak").get<double>();
  f.focus_dip = j.at("focus_dip").get<double>();
  f.focus_radius = j.at("focus_radius").get<double>();
  f.schedule_rate = j.at("schedule_rate").get<double>();
  f.schedule_midpoint = j.at("schedule_midpoint").get<double>();
  return f;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyCheckpoint& ckpt) {
  nlohmann::json header;
  header["actor"] = network_architecture_json(ckpt.actor);
  header["critic"] = network_architecture_json(ckpt.critic);
  header["actions"] = {{"percent_changes", ckpt.actions.percent_changes},
                       {"duration_days", ckpt.actions.duration_days}};
  header["normalization"] = {{"inr_scale", ckpt.normalization.inr_scale},
                             {"dose_scale", ckpt.normalization.dose_scale},
                             {"duration_scale", ckpt.normalization.duration_scale}};
  header["forging"] = forging_json(ckpt.forging);
  header["forging_delta"] = ckpt.forging_delta;
  header["actor_steps"] = ckpt.actor_steps;
  header["critic_steps"] = ckpt.critic_steps;
  header["patients_seen"] = ckpt.patients_seen;
  header["pass_index"] = ckpt.pass_index;
  header["config_hash"] = ckpt.config_hash;
  const std::string header_bytes = header.dump();

  std::vector<double> blob;
  append_parameters(ckpt.actor, blob);
  append_parameters(ckpt.critic, blob);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  std::uint64_t hlen = header_bytes.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  std::uint64_t count = blob.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(double)));
  if (!out) throw DomainError("checkpoint write failed: " + path.string());
}

PolicyCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DomainError("not a policy checkpoint: " + path.string());
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCheckpointVersion)
    throw DomainError("unsupported checkpoint version: " + std::to_string(version));
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen > (1ull << 24)) throw DomainError("corrupt checkpoint header");
  std::string header_bytes(hlen, '\0');
  in.read(header_bytes.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json header = nlohmann::json::parse(header_bytes);

  PolicyCheckpoint ckpt;
  ckpt.actor = network_from_architecture_json(header.at("actor"));
  ckpt.critic = network_from_architecture_json(header.at("critic"));
  ckpt.actions.percent_changes =
      header.at("actions").at("percent_changes").get<std::vector<double>>();
  ckpt.actions.duration_days = header.at("actions").at("duration_days").get<int>();
  ckpt.normalization.inr_scale = header.at("normalization").at("inr_scale").get<double>();
  ckpt.normalization.dose_scale = header.at("normalization").at("dose_scale").get<double>();
  ckpt.normalization.duration_scale = header.at("normalization").at("duration_scale").get<double>();
  ckpt.forging = forging_from_json(header.at("forging"));
  ckpt.forging_delta = header.at("forging_delta").get<double>();
  ckpt.actor_steps = header.at("actor_steps").get<std::int64_t>();
  ckpt.critic_steps = header.at("critic_steps").get<std::int64_t>();
  ckpt.patients_seen = header.at("patients_seen").get<long>();
  ckpt.pass_index = header.at("pass_index").get<int>();
  ckpt.config_hash = header.at("config_hash").get<std::string>();

  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  const std::uint64_t expected =
      ckpt.actor.parameter_count() + ckpt.critic.parameter_count();
  if (!in || count != expected) throw DomainError("checkpoint parameter count mismatch");
  std::vector<double> blob(count);
  in.read(reinterpret_cast<char*>(blob.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw DomainError("checkpoint parameter blob truncated");
  std::size_t off = read_parameters(ckpt.actor, blob, 0);
  read_parameters(ckpt.critic, blob, off);
  return ckpt;
}

NeuralDosingPolicy::NeuralDosingPolicy(std::shared_ptr<const PolicyCheckpoint> ckpt,
                                       std::string name)
    : ckpt_(std::move(ckpt)), name_(std::move(name)) {
  if (!ckpt_) throw DomainError("neural policy: null checkpoint");
}

int NeuralDosingPolicy::select_action(const Observation& obs) const {
  Eigen::MatrixXd x(1, 4);
  x.row(0) = ckpt_->normalization.normalize(obs).transpose();
  Eigen::MatrixXd logits =
      policy_logits(ckpt_->actor, x, ckpt_->actions, ckpt_->forging, ckpt_->forging_delta);
  int best = 0;
  for (int j = 1; j < ckpt_->actions.size(); ++j)
    if (logits(0, j) > logits(0, best)) best = j;
  return best;
}

DoseDecision NeuralDosingPolicy::decide(const Observation& obs, const Patient& p, int day) {
  (void)p;
  (void)day;
  const int a = select_action(obs);
  DoseDecision d;
  d.action_index = a;
  d.percent_change = ckpt_->actions.percent_changes[a];
  d.dose_mg = next_dose(obs.dose_previous_mg, d.percent_change);
  d.duration_days = ckpt_->actions.duration_days;
  return d;
}

std::unique_ptr<DosingPolicy> NeuralDosingPolicy::clone() const {
  return std::make_unique<NeuralDosingPolicy>(ckpt_, name_);
}

namespace {

PolicyCheckpoint make_checkpoint(const DenseNet& actor, const DenseNet& critic,
                                 const TrainSetup& setup, std::int64_t actor_steps,
                                 std::int64_t critic_steps, long patients_seen, int pass_index) {
  PolicyCheckpoint c;
  c.actor = actor;
  c.critic = critic;
  c.actions = setup.actions;
  c.normalization = setup.normalization;
  c.forging = setup.forging;
  c.forging_delta = static_cast<double>(pass_index);
  c.actor_steps = actor_steps;
  c.critic_steps = critic_steps;
  c.patients_seen = patients_seen;
  c.pass_index = pass_index;
  c.config_hash = setup.config_hash;
  return c;
}

struct PassRollout {
  RolloutBuffer buffer;
  double mean_pttr = 0.0;
};

PassRollout rollout_pass(const TrainSetup& setup, const DenseNet& actor, const RandomStream& master,
                         long patient_base, int pass_index) {
  const int n_envs = setup.ppo.patients_per_pass;
  std::vector<DosingEnv> envs;
  std::vector<RandomStream> samplers;
  envs.reserve(n_envs);
  samplers.reserve(n_envs);
  for (int s = 0; s < n_envs; ++s) {
    const std::uint64_t idx = static_cast<std::uint64_t>(patient_base) + s;
    RandomStream cov = master.child("train-cohort", idx);
    RandomStream phys = master.child("train-physiology", idx);
    Patient p = sample_patient(cov, phys, static_cast<int>(idx), setup.sampling,
                               setup.pkpd.physiology);
    envs.emplace_back(p, setup.pkpd, setup.reward, setup.actions, setup.trial,
                      master.child("train-measurement", idx), setup.iwpc);
    samplers.push_back(master.child("train-sampling", idx));
  }

  const int steps = envs.front().max_decisions();
  const int n = n_envs * steps;
  PassRollout out;
  out.buffer.obs = Eigen::MatrixXd::Zero(n, 4);
  out.buffer.actions.assign(n, 0);
  out.buffer.logp_old = Eigen::VectorXd::Zero(n);
  out.buffer.rewards = Eigen::VectorXd::Zero(n);
  out.buffer.advantages = Eigen::VectorXd::Zero(n);
  out.buffer.returns = Eigen::VectorXd::Zero(n);
  out.buffer.episodes = n_envs;
  out.buffer.steps_per_episode = steps;

  Eigen::MatrixXd step_obs(n_envs, 4);
  for (int s = 0; s < n_envs; ++s)
    step_obs.row(s) = setup.normalization.normalize(envs[s].reset()).transpose();

  const double delta = static_cast<double>(pass_index);
  for (int t = 0; t < steps; ++t) {
    Eigen::MatrixXd logits =
        policy_logits(actor, step_obs, setup.actions, setup.forging, delta);
    Eigen::MatrixXd probs = softmax_rows(logits);
    std::vector<int> acts(n_envs);
    for (int s = 0; s < n_envs; ++s) {
      double u = samplers[s].uniform();
      double acc = 0.0;
      int a = setup.actions.size() - 1;
      for (int j = 0; j < setup.actions.size(); ++j) {
        acc += probs(s, j);
        if (u < acc) {
          a = j;
          break;
        }
      }
      acts[s] = a;
    }
    Eigen::VectorXd logp = log_softmax_pick(logits, acts);
    for (int s = 0; s < n_envs; ++s) {
      const int row = s * steps + t;
      out.buffer.obs.row(row) = step_obs.row(s);
      out.buffer.actions[row] = acts[s];
      out.buffer.logp_old[row] = logp[s];
      auto result = envs[s].step(acts[s]);
      out.buffer.rewards[row] = result.reward;
      if (!result.done) step_obs.row(s) = setup.normalization.normalize(result.obs).transpose();
    }
  }
  for (int s = 0; s < n_envs; ++s) {
    if (!envs[s].done()) throw DomainError("rollout: episode did not terminate in lockstep");
    out.mean_pttr += envs[s].trajectory().pttr;
  }
  out.mean_pttr /= static_cast<double>(n_envs);
  return out;
}

}  // namespace

TrainResult train(const TrainSetup& setup, const std::function<void(const TrainLogRow&)>& on_pass) {
  setup.pkpd.validate();
  if (setup.ppo.patients_per_pass < 1) throw ConfigError("train: patients_per_pass must be >= 1");
  if (setup.ppo.max_passes < 1) throw ConfigError("train: max_passes must be >= 1");
  if (setup.forging.focus_enabled) {
    double max_abs = 0.0;
    for (double p : setup.actions.percent_changes) max_abs = std::max(max_abs, std::abs(p));
    if (setup.forging.focus_radius < max_abs)
      throw ConfigError("train: focus_radius must cover the action grid");
  }

  RandomStream master(setup.seed);
  DenseNet actor, critic;
  AdamOptimizer* actor_opt = nullptr;
  AdamOptimizer* critic_opt = nullptr;
  long patients_seen = 0;
  int start_pass = 1;

  if (setup.resume_from) {
    actor = setup.resume_from->actor;
    critic = setup.resume_from->critic;
    patients_seen = setup.resume_from->patients_seen;
    start_pass = setup.resume_from->pass_index + 1;
  } else {
    actor = DenseNet::mlp(4, setup.actor_hidden, setup.actions.size());
    critic = DenseNet::mlp(4, setup.critic_hidden, 1);
    RandomStream actor_init = master.child("init-actor");
    RandomStream critic_init = master.child("init-critic");
    actor.init_weights(actor_init);
    critic.init_weights(critic_init);
  }
  AdamOptimizer actor_opt_storage(actor), critic_opt_storage(critic);
  actor_opt = &actor_opt_storage;
  critic_opt = &critic_opt_storage;
  if (setup.resume_from) {
    actor_opt->set_step_count(setup.resume_from->actor_steps);
    critic_opt->set_step_count(setup.resume_from->critic_steps);
  }

  EarlyStopTracker stopper(setup.ppo.warmup_patients, setup.ppo.patience_passes);
  TrainResult result;
  result.best_pass = 0;
  bool have_best = false;

  for (int pass = start_pass; pass <= setup.ppo.max_passes; ++pass) {
    PassRollout rollout = rollout_pass(setup, actor, master, patients_seen, pass);
    patients_seen += setup.ppo.patients_per_pass;

    RolloutBuffer& buf = rollout.buffer;
    Eigen::MatrixXd values = critic.forward(buf.obs);
    const int T = buf.steps_per_episode;
    std::vector<double> rew(T), val(T), adv(T), ret(T);
    for (int e = 0; e < buf.episodes; ++e) {
      for (int t = 0; t < T; ++t) {
        rew[t] = buf.rewards[e * T + t];
        val[t] = values(e * T + t, 0);
      }
      compute_gae(rew, val, setup.ppo.discount, setup.ppo.gae_lambda, adv, ret);
      for (int t = 0; t < T; ++t) {
        buf.advantages[e * T + t] = adv[t];
        buf.returns[e * T + t] = ret[t];
      }
    }

    const double lr_actor_now = lr_at(setup.actor_lr, actor_opt->step_count());
    const double lr_critic_now = lr_at(setup.critic_lr, critic_opt->step_count());
    ActorUpdateStats astats =
        actor_update(actor, *actor_opt, setup.actor_lr, buf, setup.ppo, setup.actions,
                     setup.forging, static_cast<double>(pass));
    double closs = critic_update(critic, *critic_opt, setup.critic_lr, buf,
                                 setup.ppo.critic_iterations);
    ActionUsage usage = action_usage(actor, setup.forging, static_cast<double>(pass), buf.obs,
                                     setup.actions, setup.ppo.action_elimination_epsilon);

    bool stop = stopper.update(patients_seen, rollout.mean_pttr);

    TrainLogRow row;
    row.pass = pass;
    row.patients_seen = patients_seen;
    row.mean_reward = buf.rewards.mean();
    row.pttr = rollout.mean_pttr;
    row.kl = astats.kl;
    row.actor_iterations = astats.iterations;
    row.lr_actor = lr_actor_now;
    row.lr_critic = lr_critic_now;
    row.actor_loss = astats.surrogate_loss;
    row.critic_loss = closs;
    row.group_lasso = astats.penalty;
    row.available_actions = usage.available;
    row.used_actions = usage.used;
    row.no_change_fraction = usage.no_change_fraction;
    row.best_pttr = stopper.best_pttr();
    row.is_best = stopper.improved_on_last_update();
    result.log.push_back(row);
    if (on_pass) on_pass(row);

    if (row.is_best || !have_best) {
      result.best = make_checkpoint(actor, critic, setup, actor_opt->step_count(),
                                    critic_opt->step_count(), patients_seen, pass);
      result.best_pass = pass;
      have_best = true;
    }
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }

  result.final_state =
      make_checkpoint(actor, critic, setup, actor_opt->step_count(), critic_opt->step_count(),
                      patients_seen, result.log.empty() ? 0 : result.log.back().pass);
  return result;
}

void write_train_log_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write training log: " + path.string());
  char buf[64];
  auto d = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  out << "pass,patients_seen,mean_reward,pttr,kl,actor_iterations,lr_actor,lr_critic,"
         "actor_loss,critic_loss,group_lasso,available_actions,used_actions,"
         "no_change_fraction,best_pttr,is_best\n";
  for (const TrainLogRow& r : log) {
    out << r.pass << ',' << r.patients_seen << ',' << d(r.mean_reward) << ',' << d(r.pttr) << ','
        << d(r.kl) << ',' << r.actor_iterations << ',' << d(r.lr_actor) << ',' << d(r.lr_critic)
        << ',' << d(r.actor_loss) << ',' << d(r.critic_loss) << ',' << d(r.group_lasso) << ','
        << r.available_actions << ',' << r.used_actions << ',' << d(r.no_change_fraction) << ','
        << d(r.best_pttr) << ',' << (r.is_best ? 1 : 0) << '\n';
  }
}

}  // namespace warfarin
