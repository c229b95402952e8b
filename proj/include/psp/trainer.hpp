#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "psp/adversarial.hpp"
#include "psp/env.hpp"
#include "psp/replay.hpp"
#include "psp/saliency.hpp"
#include "psp/world_model.hpp"

namespace psp {

struct TrainConfig {
    int batch_size = 16;    // sequences per update
    int batch_length = 16;  // frames per sequence
    int horizon = 15;       // imagination steps
    double gamma = 0.99;
    double lambda = 0.95;
    double lr_model = 3e-4;
    double lr_actor = 1e-4;
    double lr_critic = 1e-4;
    double entropy_coef = 3e-4;
    double explore_sigma = 0.3;  // collection noise on the mean action
    double train_ratio = 0.25;   // updates per env step, applied after warmup
    long warmup = 1000;          // env steps before the first update
    long buffer_capacity = 100000;
    int imagination_starts = 64;  // rollout rows taken from the batch states

    WeightingSource weighting = WeightingSource::policy;
    bool segmentation_agg = true;
    double alpha = 0.9;
    double clip_percentile = 99.0;
    bool salience_all_steps = false;    // differentiate through the recurrence
    bool debug_uniform_weights = false; // run the pipeline, then train with W=1

    double free_bits = 1.0;
    double beta_pred = 1.0;
    double beta_dyn = 0.5;
    double beta_rep = 0.1;

    int eval_episodes = 10;
    int recon_eval_episodes = 2;

    bool operator==(const TrainConfig&) const = default;
};

// Actor over the model state: mean squashed into (-1, 1), spread floored.
struct AgentDef {
    Eigen::Index state_dim = 160;
    Eigen::Index action_dim = 2;
    Eigen::Index hidden = 128;

    MlpDef actor_def() const { return {"actor", {state_dim, hidden, 2 * action_dim}, 0.01}; }
    MlpDef critic_def() const { return {"critic", {state_dim, hidden, 1}, 0.01}; }
};

struct PolicyDist {
    Tensor mean, stddev;  // (B, action_dim)
};

// raw actor output -> tanh mean, softplus spread (biased small at init).
PolicyDist actor_dist(const Mlp& actor, const Tensor& state, Eigen::Index action_dim);

// R_k = r_k + gamma * c_k * ((1 - lambda) * v_{k+1} + lambda * R_{k+1}),
// bootstrapped with R_H = v_H. rewards/conts: H entries; values: H + 1.
// Returns R_0..R_{H-1}; empty for a zero horizon.
std::vector<Tensor> lambda_returns(const std::vector<Tensor>& rewards,
                                   const std::vector<Tensor>& values,
                                   const std::vector<Tensor>& conts, double gamma, double lambda);

// Prior-dynamics rollout driven by the actor. states[k] is (S, state_dim)
// for k = 0..horizon; entry k of the other vectors describes the step from
// states[k]: the action taken, its pre-squash entropy, and the reward /
// continue predicted at the resulting state.
struct ImaginedTrajectory {
    std::vector<Tensor> states;
    std::vector<Tensor> actions;
    std::vector<Tensor> entropies;
    std::vector<Tensor> rewards;
    std::vector<Tensor> conts;
};

ImaginedTrajectory imagine(const WorldModelDef& wdef, const WorldModelNets& wm, const Mlp& actor,
                           Eigen::Index action_dim, const Tensor& start_states, int horizon,
                           Rng& rng);

struct StepMetrics {
    LossBreakdown model;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double entropy = 0.0;
    double adv_loss = 0.0;
    double salience_mean = 0.0;
    double salience_max = 0.0;
    double salience_fg_frac = 0.0;
    bool has_adv = false;
    bool has_salience = false;
    int skipped = 0;  // parameter tensors skipped for non-finite gradients
    double wall_ms = 0.0;
};

struct EvalStats {
    double return_mean = 0.0;
    double return_std = 0.0;
    double fg_mse = 0.0;
    double bg_mse = 0.0;
    bool has_recon = false;
};

// Receives one serialized JSON record per train step / evaluation.
using MetricsSink = std::function<void(const std::string&)>;

// Owns the environment, replay buffer, all parameters and optimizers, and
// the named random streams. Single-threaded; a fixed (config, seed) pair
// replays the exact same run.
class Trainer {
public:
    Trainer(const EnvConfig& env_cfg, const TrainConfig& train_cfg, const AdvConfig& adv_cfg,
            std::uint64_t seed);

    void set_metrics_sink(MetricsSink sink) { sink_ = std::move(sink); }
    // Directory for evaluation-time image dumps (empty = no dumps).
    void set_dump_dir(std::string dir) { dump_dir_ = std::move(dir); }
    // Called after every evaluation; the harness writes checkpoints here.
    void set_checkpoint_hook(std::function<void(long)> fn) { checkpoint_hook_ = std::move(fn); }

    long env_steps() const { return env_steps_; }
    long updates_done() const { return updates_done_; }
    const ParamStore& params() const { return store_; }
    ParamStore& params() { return store_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const TrainConfig& train_config() const { return tcfg_; }
    const EnvConfig& env_config() const { return ecfg_; }
    const AdvConfig& adv_config() const { return acfg_; }

    void collect_steps(long n);
    long pending_updates() const;
    StepMetrics train_step();
    EvalStats evaluate(bool with_recon);

    // The weighting pipeline on its own (gradient probe, aggregation,
    // normalization), as train_step runs it. Exposed for benchmarks and
    // inspection; advances the salience random stream.
    struct SalienceResult {
        Tensor weights;  // (T*B, image_dim) expanded per channel
        double mean = 0.0, max = 0.0, fg_frac = 0.0;
        Array last_map;  // final_w of the batch's last frame, h*w
    };
    SalienceResult compute_salience(const WindowBatch& batch);

    // Interleaves collection, updates and periodic evaluation up to
    // `target_steps` env steps; always evaluates at the end.
    void run(long target_steps, long eval_every);

    // Model/optimizer state and runtime state (buffer, env, streams,
    // counters) as two separate streams.
    void save(std::ostream& params_os, std::ostream& runtime_os) const;
    void restore(std::istream& params_is, std::istream& runtime_is);

private:
    void ensure_episode();
    void emit(const std::string& line);
    EvalStats eval_and_emit(bool with_recon);

    EnvConfig ecfg_;
    TrainConfig tcfg_;
    AdvConfig acfg_;
    std::uint64_t seed_ = 0;

    WorldModelDef wdef_;
    AgentDef adef_;
    AdvHeadDef advdef_;

    ParamStore store_;
    Adam opt_model_, opt_actor_, opt_critic_, opt_adv_;

    PointMassEnv env_;
    ReplayBuffer buffer_;

    Rng rng_explore_, rng_sample_, rng_wm_, rng_sal_, rng_imagine_;

    long env_steps_ = 0;
    long updates_done_ = 0;
    long episode_counter_ = 0;
    bool episode_open_ = false;

    // Filter state of the collection policy within the current episode.
    Array collect_h_, collect_z_;
    Eigen::Vector2d collect_prev_action_{0.0, 0.0};

    Array last_salience_map_;  // most recent final_w frame for dumps

    MetricsSink sink_;
    std::string dump_dir_;
    std::function<void(long)> checkpoint_hook_;

    std::unique_ptr<PointMassEnv> eval_env_;
};

}  // namespace psp
