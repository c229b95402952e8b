#include "psp/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "psp/checkpoint.hpp"
#include "psp/image_io.hpp"

namespace psp {

namespace {

constexpr char kRuntimeMagic[8] = {'P', 'S', 'P', 'R', 'E', 'S', 'M', '1'};
// Evaluation episodes use a fixed seed block far above anything the
// training episode counter can reach, so the eval set never overlaps the
// training episodes and stays the same across checkpoints of one run.
constexpr std::uint64_t kEvalSeedBase = 10'000'000;
// Frame indices probed for reconstruction error: evenly spread through a
// 625-step episode, away from the reset transient.
constexpr std::array<int, 5> kReconFrames = {62, 187, 312, 437, 562};

EnvConfig effective_env_cfg(EnvConfig cfg, std::uint64_t run_seed) {
    // Seed 0 means "derive from the run seed"; an explicit nonzero env
    // seed pins the background table independently of the run.
    if (cfg.seed == 0) cfg.seed = run_seed;
    return cfg;
}

WorldModelDef make_wdef(const EnvConfig& e) {
    WorldModelDef d;
    d.image_dim = static_cast<Eigen::Index>(e.image_size) * e.image_size * 3;
    return d;
}

AgentDef make_adef(const WorldModelDef& w) {
    AgentDef a;
    a.state_dim = w.state_dim();
    a.action_dim = w.action_dim;
    return a;
}

AdvHeadDef make_advdef(const WorldModelDef& w) {
    AdvHeadDef d;
    d.embed = w.embed;
    d.action_dim = w.action_dim;
    return d;
}

// One posterior filter update, mirroring the training-time recurrence:
// h' = gru(h, [z, a_prev]); z' from post(h', enc(x)), sampled when a
// stream is given, otherwise the posterior mean.
void filter_step(const WorldModelDef& def, const WorldModelNets& nets, Array& h_state,
                 Array& z_state, const Array& image, const Eigen::Vector2d& a_prev,
                 Rng* sample_rng) {
    Tensor h(Shape{1, def.h}, h_state);
    Tensor z(Shape{1, def.z}, z_state);
    Array a(def.action_dim);
    a(0) = a_prev.x();
    a(1) = a_prev.y();
    Tensor at(Shape{1, def.action_dim}, std::move(a));
    Tensor x(Shape{1, def.image_dim}, image);

    Tensor h2 = gru_step(nets.gru, h, concat({z, at}, 1));
    Tensor e = mlp_forward(nets.enc, x);
    Gaussian post = gaussian_head(mlp_forward(nets.post, concat({h2, e}, 1)));
    Tensor z2 = sample_rng ? gaussian_sample(post.mean, post.stddev, *sample_rng) : post.mean;
    h_state = h2.array();
    z_state = z2.array();
}

Tensor filter_state_tensor(const WorldModelDef& def, const Array& h, const Array& z) {
    Array s(def.state_dim());
    s << h, z;
    return Tensor(Shape{1, def.state_dim()}, std::move(s));
}

void put_i64(std::ostream& os, std::int64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::int64_t get_i64(std::istream& is) {
    std::int64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("trainer: truncated runtime state");
    return v;
}

void put_array(std::ostream& os, const Array& a) {
    put_i64(os, a.size());
    os.write(reinterpret_cast<const char*>(a.data()),
             static_cast<std::streamsize>(a.size() * sizeof(double)));
}

Array get_array(std::istream& is) {
    Array a(get_i64(is));
    is.read(reinterpret_cast<char*>(a.data()),
            static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!is) throw std::runtime_error("trainer: truncated runtime state");
    return a;
}

void put_blob(std::ostream& os, const std::string& s) {
    put_i64(os, static_cast<std::int64_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_blob(std::istream& is) {
    std::string s(static_cast<size_t>(get_i64(is)), '\0');
    is.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!is) throw std::runtime_error("trainer: truncated runtime state");
    return s;
}

void put_rng(std::ostream& os, const Rng& rng) {
    std::ostringstream ss;
    rng.save(ss);
    put_blob(os, ss.str());
}

void get_rng(std::istream& is, Rng& rng) {
    std::istringstream ss(get_blob(is));
    rng.load(ss);
}

}  // namespace

PolicyDist actor_dist(const Mlp& actor, const Tensor& state, Eigen::Index action_dim) {
    Tensor raw = mlp_forward(actor, state);
    if (raw.dim(1) != 2 * action_dim) {
        throw std::invalid_argument("actor_dist: head width " + std::to_string(raw.dim(1)) +
                                    " does not match 2 * action_dim");
    }
    Gaussian g = gaussian_head(raw, -1.0, 1e-3);
    return PolicyDist{tanh(g.mean), g.stddev};
}

std::vector<Tensor> lambda_returns(const std::vector<Tensor>& rewards,
                                   const std::vector<Tensor>& values,
                                   const std::vector<Tensor>& conts, double gamma, double lambda) {
    const size_t H = rewards.size();
    if (conts.size() != H || values.size() != H + 1) {
        throw std::invalid_argument("lambda_returns: need H rewards/conts and H+1 values");
    }
    std::vector<Tensor> returns(H);
    Tensor next = values[H];
    for (size_t k = H; k-- > 0;) {
        Tensor mix = add(scale(values[k + 1], 1.0 - lambda), scale(next, lambda));
        returns[k] = add(rewards[k], mul(conts[k], scale(mix, gamma)));
        next = returns[k];
    }
    return returns;
}

ImaginedTrajectory imagine(const WorldModelDef& wdef, const WorldModelNets& wm, const Mlp& actor,
                           Eigen::Index action_dim, const Tensor& start_states, int horizon,
                           Rng& rng) {
    if (start_states.rank() != 2 || start_states.dim(1) != wdef.state_dim()) {
        throw std::invalid_argument("imagine: start states must be (S, h+z)");
    }
    ImaginedTrajectory traj;
    traj.states.push_back(start_states);
    for (int k = 0; k < horizon; ++k) {
        const Tensor& cur = traj.states.back();
        PolicyDist dist = actor_dist(actor, cur, action_dim);
        Tensor ent = gaussian_entropy(Gaussian{dist.mean, dist.stddev});
        Tensor a = clip(gaussian_sample(dist.mean, dist.stddev, rng), -1.0, 1.0);

        Tensor h = slice(cur, 1, 0, wdef.h);
        Tensor z = slice(cur, 1, wdef.h, wdef.state_dim());
        Tensor h2 = gru_step(wm.gru, h, concat({z, a}, 1));
        Gaussian prior = gaussian_head(mlp_forward(wm.prior, h2));
        Tensor z2 = gaussian_sample(prior.mean, prior.stddev, rng);
        Tensor next = concat({h2, z2}, 1);

        traj.actions.push_back(a);
        traj.entropies.push_back(ent);
        traj.rewards.push_back(mlp_forward(wm.reward, next));
        traj.conts.push_back(sigmoid(mlp_forward(wm.cont, next)));
        traj.states.push_back(next);
    }
    return traj;
}

Trainer::Trainer(const EnvConfig& env_cfg, const TrainConfig& train_cfg, const AdvConfig& adv_cfg,
                 std::uint64_t seed)
    : ecfg_(effective_env_cfg(env_cfg, seed)),
      tcfg_(train_cfg),
      acfg_(adv_cfg),
      seed_(seed),
      wdef_(make_wdef(ecfg_)),
      adef_(make_adef(wdef_)),
      advdef_(make_advdef(wdef_)),
      opt_model_(AdamConfig{train_cfg.lr_model}),
      opt_actor_(AdamConfig{train_cfg.lr_actor}),
      opt_critic_(AdamConfig{train_cfg.lr_critic}),
      opt_adv_(AdamConfig{train_cfg.lr_model}),
      env_(ecfg_),
      buffer_(ecfg_.image_size, ecfg_.image_size, train_cfg.buffer_capacity),
      rng_explore_(derive_seed(seed, "explore")),
      rng_sample_(derive_seed(seed, "sample")),
      rng_wm_(derive_seed(seed, "wm.draw")),
      rng_sal_(derive_seed(seed, "salience.draw")),
      rng_imagine_(derive_seed(seed, "imagine.draw")) {
    Rng rng_wm_init(derive_seed(seed, "init.wm"));
    wm_init(wdef_, store_, rng_wm_init);
    Rng rng_agent_init(derive_seed(seed, "init.agent"));
    init_mlp(adef_.actor_def(), store_, rng_agent_init);
    init_mlp(adef_.critic_def(), store_, rng_agent_init);
    // The head is always constructed (its stream is independent), so
    // toggling it on or off cannot shift any other initialization.
    Rng rng_adv_init(derive_seed(seed, "init.adv"));
    adv_init(advdef_, store_, rng_adv_init);
}

void Trainer::ensure_episode() {
    if (episode_open_) return;
    const std::uint64_t ep_seed = static_cast<std::uint64_t>(episode_counter_);
    ++episode_counter_;
    Observation obs = env_.reset(ep_seed);
    buffer_.begin_episode();
    SegmentMap seg = segment_image(obs.image, ecfg_.image_size, ecfg_.image_size);
    const double zero_action[2] = {0.0, 0.0};
    buffer_.push_frame(obs.image, seg, zero_action, 0.0, 1.0, obs.t, env_.background_index());

    collect_h_ = Array::Zero(wdef_.h);
    collect_z_ = Array::Zero(wdef_.z);
    collect_prev_action_ = {0.0, 0.0};
    WorldModelNets nets = wm_freeze(wdef_, store_);
    filter_step(wdef_, nets, collect_h_, collect_z_, obs.image, collect_prev_action_,
                &rng_explore_);
    episode_open_ = true;
}

void Trainer::collect_steps(long n) {
    for (long i = 0; i < n; ++i) {
        ensure_episode();
        WorldModelNets nets = wm_freeze(wdef_, store_);
        Mlp actor = freeze_mlp(adef_.actor_def(), store_);

        Tensor state = filter_state_tensor(wdef_, collect_h_, collect_z_);
        PolicyDist dist = actor_dist(actor, state, adef_.action_dim);
        const Array& mean = dist.mean.array();
        Eigen::Vector2d a;
        for (int j = 0; j < 2; ++j) {
            const double noisy = mean(j) + tcfg_.explore_sigma * rng_explore_.normal();
            a(j) = std::clamp(noisy, -1.0, 1.0);
        }

        PointMassEnv::StepResult sr = env_.step(a);
        ++env_steps_;
        SegmentMap seg = segment_image(sr.obs.image, ecfg_.image_size, ecfg_.image_size);
        buffer_.push_frame(sr.obs.image, seg, a.data(), sr.reward, sr.cont ? 1.0 : 0.0, sr.obs.t,
                           env_.background_index());
        filter_step(wdef_, nets, collect_h_, collect_z_, sr.obs.image, a, &rng_explore_);
        collect_prev_action_ = a;
        if (!sr.cont) episode_open_ = false;
    }
}

long Trainer::pending_updates() const {
    if (!buffer_.can_sample(tcfg_.batch_length)) return 0;
    const long past = env_steps_ - tcfg_.warmup;
    if (past <= 0) return 0;
    const long want = static_cast<long>(std::floor(static_cast<double>(past) * tcfg_.train_ratio +
                                                   1e-9));
    return std::max(0L, want - updates_done_);
}

Trainer::SalienceResult Trainer::compute_salience(const WindowBatch& batch) {
    const int T = batch.T, B = batch.B;
    const int size = ecfg_.image_size;
    const Eigen::Index hw = static_cast<Eigen::Index>(size) * size;
    const Eigen::Index rows = static_cast<Eigen::Index>(T) * B;

    WorldModelNets nets = wm_freeze(wdef_, store_);
    Mlp actor = freeze_mlp(adef_.actor_def(), store_);
    Mlp critic = freeze_mlp(adef_.critic_def(), store_);
    const bool use_policy = tcfg_.weighting == WeightingSource::policy;

    // Scalar probe: the summed policy mean (or critic value) over every
    // frame's filtered state. Without `salience_all_steps` the recurrence
    // inputs are detached, so each frame's pixels influence the scalar
    // only through that frame's own posterior — one gradient pass then
    // yields every frame's local sensitivity map at once.
    auto probe = [&](Tape& tape, const Tensor& X) -> Tensor {
        (void)tape;
        Tensor E = mlp_forward(nets.enc, X);
        Tensor h = Tensor::zeros({B, wdef_.h});
        Tensor z = Tensor::zeros({B, wdef_.z});
        std::vector<Tensor> states;
        states.reserve(static_cast<size_t>(T));
        for (int t = 0; t < T; ++t) {
            Tensor a_t = slice(batch.Aprev, 0, static_cast<Eigen::Index>(t) * B,
                               static_cast<Eigen::Index>(t + 1) * B);
            Tensor e_t = slice(E, 0, static_cast<Eigen::Index>(t) * B,
                               static_cast<Eigen::Index>(t + 1) * B);
            Tensor h_in = h, z_in = z;
            if (!tcfg_.salience_all_steps && t > 0) {
                h_in = stop_gradient(h);
                z_in = stop_gradient(z);
            }
            h = gru_step(nets.gru, h_in, concat({z_in, a_t}, 1));
            Gaussian post = gaussian_head(mlp_forward(nets.post, concat({h, e_t}, 1)));
            z = gaussian_sample(post.mean, post.stddev, rng_sal_);
            states.push_back(concat({h, z}, 1));
        }
        Tensor S = concat(states, 0);
        if (use_policy) return sum(actor_dist(actor, S, adef_.action_dim).mean);
        return sum(mlp_forward(critic, S));
    };
    Array grad = input_gradient(probe, batch.X);

    SalienceResult res;
    Array weights(rows * wdef_.image_dim);
    double w_sum = 0.0, w_max = -std::numeric_limits<double>::infinity();
    double fg_mass = 0.0, total_mass = 0.0;
    const std::array<double, 3>& ac = agent_color();
    const std::array<double, 3>& gc = goal_color();

    for (Eigen::Index r = 0; r < rows; ++r) {
        Array raw = sum_channels(grad.segment(r * wdef_.image_dim, wdef_.image_dim), size, size);
        const SegmentMap* seg = tcfg_.segmentation_agg ? &batch.segs[static_cast<size_t>(r)]
                                                       : nullptr;
        SalienceFrame frame = salience_frame(raw, seg, tcfg_.clip_percentile, tcfg_.alpha);
        weights.segment(r * wdef_.image_dim, wdef_.image_dim) =
            expand_to_channels(frame.final_w);

        w_sum += frame.final_w.sum();
        w_max = std::max(w_max, frame.final_w.maxCoeff());
        for (Eigen::Index p = 0; p < hw; ++p) {
            const double* px = batch.X.array().data() + r * wdef_.image_dim + p * 3;
            const bool fg = (px[0] == ac[0] && px[1] == ac[1] && px[2] == ac[2]) ||
                            (px[0] == gc[0] && px[1] == gc[1] && px[2] == gc[2]);
            if (fg) fg_mass += frame.final_w(p);
            total_mass += frame.final_w(p);
        }
        if (r == rows - 1) res.last_map = frame.final_w;
    }
    res.weights = Tensor(Shape{rows, wdef_.image_dim}, std::move(weights));
    res.mean = w_sum / static_cast<double>(rows * hw);
    res.max = w_max;
    res.fg_frac = total_mass > 0.0 ? fg_mass / total_mass : 0.0;
    return res;
}

StepMetrics Trainer::train_step() {
    const auto t0 = std::chrono::steady_clock::now();
    StepMetrics m;

    WindowBatch batch = buffer_.sample(tcfg_.batch_length, tcfg_.batch_size, rng_sample_);

    // 1. Per-frame pixel weights from the current policy (or critic).
    Tensor weights;
    const Tensor* weights_ptr = nullptr;
    if (tcfg_.weighting != WeightingSource::none) {
        SalienceResult sal = compute_salience(batch);
        m.salience_mean = sal.mean;
        m.salience_max = sal.max;
        m.salience_fg_frac = sal.fg_frac;
        m.has_salience = true;
        last_salience_map_ = sal.last_map;
        if (!tcfg_.debug_uniform_weights) {
            weights = std::move(sal.weights);
            weights_ptr = &weights;
        }
    }

    // 2. World-model update on the weighted objective; the embedding's
    // action-prediction gradient is subtracted from the encoder's.
    Tape tape;
    BoundParams bound;
    WorldModelNets nets = wm_bind(wdef_, tape, store_, bound);
    Tensor embed;
    std::vector<RolloutStep> steps = wm_observe(wdef_, nets, batch.X, batch.Aprev, tcfg_.batch_length,
                                                tcfg_.batch_size, rng_wm_, &embed);
    WmLossConfig lcfg{tcfg_.beta_pred, tcfg_.beta_dyn, tcfg_.beta_rep, tcfg_.free_bits};
    Tensor model_loss = wm_loss(wdef_, nets, steps, batch.X, batch.rewards, batch.conts,
                                weights_ptr, lcfg, m.model);
    Gradients model_grads = tape.backward(model_loss);
    std::vector<std::pair<std::string, Array>> grads = bound.grads(model_grads);
    if (acfg_.enabled) {
        Tensor adv_loss = adv_prediction_loss(advdef_, store_, embed, batch.Aprev);
        m.adv_loss = adv_loss.value();
        m.has_adv = true;
        Gradients adv_grads = tape.backward(adv_loss);
        grads = combine_adv_gradients(std::move(grads), bound.grads(adv_grads, "enc."),
                                      acfg_.epsilon);
    }
    m.skipped += opt_model_.step(store_, grads);

    // 3. The prediction head itself trains on detached embeddings.
    if (acfg_.enabled) {
        adv_head_update(advdef_, store_, opt_adv_, embed, batch.Aprev);
    }

    // 4. Imagination from a strided subsample of the posterior states.
    Tensor all_states = wm_states(steps).constant();
    const Eigen::Index total = all_states.dim(0);
    const Eigen::Index starts =
        std::min<Eigen::Index>(std::max(1, tcfg_.imagination_starts), total);
    const Eigen::Index stride = std::max<Eigen::Index>(1, total / starts);
    Array start_rows(starts * wdef_.state_dim());
    for (Eigen::Index i = 0; i < starts; ++i) {
        start_rows.segment(i * wdef_.state_dim(), wdef_.state_dim()) =
            all_states.array().segment(i * stride * wdef_.state_dim(), wdef_.state_dim());
    }
    Tensor start_states(Shape{starts, wdef_.state_dim()}, std::move(start_rows));

    Tape actor_tape;
    BoundParams actor_bound;
    Mlp actor = bind_mlp(adef_.actor_def(), actor_tape, store_, actor_bound);
    WorldModelNets frozen = wm_freeze(wdef_, store_);
    Mlp critic_frozen = freeze_mlp(adef_.critic_def(), store_);
    ImaginedTrajectory traj =
        imagine(wdef_, frozen, actor, adef_.action_dim, start_states, tcfg_.horizon, rng_imagine_);

    std::vector<Tensor> values;
    values.reserve(traj.states.size());
    for (const Tensor& s : traj.states) values.push_back(mlp_forward(critic_frozen, s));
    std::vector<Tensor> returns =
        lambda_returns(traj.rewards, values, traj.conts, tcfg_.gamma, tcfg_.lambda);

    if (!returns.empty()) {
        // 5. Actor: maximize the mean imagined return plus an entropy bonus.
        Tensor mean_return = mean(concat(returns, 0));
        Tensor mean_entropy = mean(concat(traj.entropies, 0));
        Tensor actor_loss = sub(neg(mean_return), scale(mean_entropy, tcfg_.entropy_coef));
        m.actor_loss = actor_loss.value();
        m.entropy = mean_entropy.value();
        Gradients actor_grads = actor_tape.backward(actor_loss);
        m.skipped += opt_actor_.step(store_, actor_bound.grads(actor_grads));

        // 6. Critic: regress the detached states onto the detached returns.
        Tape critic_tape;
        BoundParams critic_bound;
        Mlp critic = bind_mlp(adef_.critic_def(), critic_tape, store_, critic_bound);
        std::vector<Tensor> state_parts, target_parts;
        state_parts.reserve(returns.size());
        target_parts.reserve(returns.size());
        for (size_t k = 0; k < returns.size(); ++k) {
            state_parts.push_back(traj.states[k].constant());
            target_parts.push_back(returns[k].constant());
        }
        Tensor preds = mlp_forward(critic, concat(state_parts, 0));
        Tensor critic_loss = mean(square(sub(preds, concat(target_parts, 0))));
        m.critic_loss = critic_loss.value();
        Gradients critic_grads = critic_tape.backward(critic_loss);
        m.skipped += opt_critic_.step(store_, critic_bound.grads(critic_grads));
    }

    ++updates_done_;
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();

    nlohmann::ordered_json j;
    j["step"] = env_steps_;
    j["wall_ms"] = m.wall_ms;
    nlohmann::ordered_json losses;
    losses["image"] = m.model.weighted_image;
    losses["reward"] = m.model.reward;
    losses["cont"] = m.model.cont;
    losses["dyn_kl"] = m.model.dyn_kl;
    losses["rep_kl"] = m.model.rep_kl;
    losses["model"] = m.model.total;
    losses["actor"] = m.actor_loss;
    losses["critic"] = m.critic_loss;
    losses["entropy"] = m.entropy;
    if (m.has_adv) losses["adv"] = m.adv_loss;
    j["losses"] = losses;
    if (m.has_salience) {
        j["salience"] = {{"mean", m.salience_mean},
                         {"max", m.salience_max},
                         {"frac_on_foreground", m.salience_fg_frac}};
    }
    emit(j.dump());
    return m;
}

EvalStats Trainer::evaluate(bool with_recon) {
    if (!eval_env_) eval_env_ = std::make_unique<PointMassEnv>(ecfg_);
    WorldModelNets nets = wm_freeze(wdef_, store_);
    Mlp actor = freeze_mlp(adef_.actor_def(), store_);
    const int size = ecfg_.image_size;

    EvalStats out;
    std::vector<double> returns;
    returns.reserve(static_cast<size_t>(tcfg_.eval_episodes));
    double fg_se = 0.0, bg_se = 0.0;
    long fg_elems = 0, bg_elems = 0;
    bool triptych_written = false;

    for (int ep = 0; ep < tcfg_.eval_episodes; ++ep) {
        Observation obs = eval_env_->reset(kEvalSeedBase + static_cast<std::uint64_t>(ep));
        Array h = Array::Zero(wdef_.h);
        Array z = Array::Zero(wdef_.z);
        filter_step(wdef_, nets, h, z, obs.image, {0.0, 0.0}, nullptr);
        const bool do_recon = with_recon && ep < tcfg_.recon_eval_episodes;

        double total = 0.0;
        bool cont = true;
        while (cont) {
            Tensor state = filter_state_tensor(wdef_, h, z);
            PolicyDist dist = actor_dist(actor, state, adef_.action_dim);
            Eigen::Vector2d a{dist.mean.array()(0), dist.mean.array()(1)};
            PointMassEnv::StepResult sr = eval_env_->step(a);
            total += sr.reward;
            filter_step(wdef_, nets, h, z, sr.obs.image, a, nullptr);

            if (do_recon &&
                std::find(kReconFrames.begin(), kReconFrames.end(), sr.obs.t) !=
                    kReconFrames.end()) {
                Tensor s = filter_state_tensor(wdef_, h, z);
                Array xhat = mlp_forward(nets.dec, s).array();
                OracleMask mask = eval_env_->oracle_mask();
                for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(mask.labels.size()); ++p) {
                    const bool fg = mask.labels[static_cast<size_t>(p)] != 2;
                    for (int c = 0; c < 3; ++c) {
                        const double d = xhat(p * 3 + c) - sr.obs.image(p * 3 + c);
                        if (fg) {
                            fg_se += d * d;
                            ++fg_elems;
                        } else {
                            bg_se += d * d;
                            ++bg_elems;
                        }
                    }
                }
                if (!triptych_written && !dump_dir_.empty() && sr.obs.t == kReconFrames[2]) {
                    write_triptych(dump_dir_ + "/triptych_step" + std::to_string(env_steps_) +
                                       ".ppm",
                                   sr.obs.image, xhat, size, size);
                    triptych_written = true;
                }
            }
            cont = sr.cont;
        }
        returns.push_back(total);
    }

    double sum = 0.0;
    for (double r : returns) sum += r;
    out.return_mean = sum / static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - out.return_mean) * (r - out.return_mean);
    out.return_std = std::sqrt(var / static_cast<double>(returns.size()));

    if (fg_elems > 0) {
        out.fg_mse = fg_se / static_cast<double>(fg_elems);
        out.bg_mse = bg_se / static_cast<double>(bg_elems);
        out.has_recon = true;
    }

    if (!dump_dir_.empty() && last_salience_map_.size() > 0) {
        write_salience_dump(dump_dir_ + "/salience_step" + std::to_string(env_steps_),
                            last_salience_map_, size, size);
    }
    return out;
}

EvalStats Trainer::eval_and_emit(bool with_recon) {
    EvalStats s = evaluate(with_recon);
    nlohmann::ordered_json e;
    e["return_mean"] = s.return_mean;
    e["return_std"] = s.return_std;
    if (s.has_recon) {
        e["fg_mse"] = s.fg_mse;
        e["bg_mse"] = s.bg_mse;
    }
    nlohmann::ordered_json j;
    j["step"] = env_steps_;
    j["eval"] = e;
    emit(j.dump());
    return s;
}

void Trainer::run(long target_steps, long eval_every) {
    long next_eval = eval_every > 0 ? (env_steps_ / eval_every + 1) * eval_every
                                    : std::numeric_limits<long>::max();
    long last_eval = -1;
    while (env_steps_ < target_steps) {
        collect_steps(1);
        const long todo = pending_updates();
        for (long i = 0; i < todo; ++i) train_step();
        if (env_steps_ >= next_eval) {
            eval_and_emit(true);
            last_eval = env_steps_;
            if (checkpoint_hook_) checkpoint_hook_(env_steps_);
            next_eval += eval_every;
        }
    }
    if (last_eval != env_steps_) {
        eval_and_emit(true);
        if (checkpoint_hook_) checkpoint_hook_(env_steps_);
    }
}

void Trainer::emit(const std::string& line) {
    if (sink_) sink_(line);
}

void Trainer::save(std::ostream& params_os, std::ostream& runtime_os) const {
    save_checkpoint(params_os, store_,
                    {{"model", &opt_model_},
                     {"actor", &opt_actor_},
                     {"critic", &opt_critic_},
                     {"adv", &opt_adv_}});

    runtime_os.write(kRuntimeMagic, sizeof(kRuntimeMagic));
    put_i64(runtime_os, env_steps_);
    put_i64(runtime_os, updates_done_);
    put_i64(runtime_os, episode_counter_);
    put_i64(runtime_os, episode_open_ ? 1 : 0);
    put_array(runtime_os, collect_h_);
    put_array(runtime_os, collect_z_);
    put_i64(runtime_os, 2);
    runtime_os.write(reinterpret_cast<const char*>(collect_prev_action_.data()),
                     2 * sizeof(double));
    std::ostringstream env_ss;
    env_.save_state(env_ss);
    put_blob(runtime_os, env_ss.str());
    put_rng(runtime_os, rng_explore_);
    put_rng(runtime_os, rng_sample_);
    put_rng(runtime_os, rng_wm_);
    put_rng(runtime_os, rng_sal_);
    put_rng(runtime_os, rng_imagine_);
    buffer_.save(runtime_os);
    if (!runtime_os) throw std::runtime_error("trainer: writing runtime state failed");
}

void Trainer::restore(std::istream& params_is, std::istream& runtime_is) {
    load_checkpoint(params_is, store_,
                    {{"model", &opt_model_},
                     {"actor", &opt_actor_},
                     {"critic", &opt_critic_},
                     {"adv", &opt_adv_}});

    char magic[8];
    runtime_is.read(magic, sizeof(magic));
    if (!runtime_is || std::string(magic, 8) != std::string(kRuntimeMagic, 8)) {
        throw std::runtime_error("trainer: bad runtime state header");
    }
    env_steps_ = get_i64(runtime_is);
    updates_done_ = get_i64(runtime_is);
    episode_counter_ = get_i64(runtime_is);
    episode_open_ = get_i64(runtime_is) != 0;
    collect_h_ = get_array(runtime_is);
    collect_z_ = get_array(runtime_is);
    if (get_i64(runtime_is) != 2) throw std::runtime_error("trainer: bad action state");
    runtime_is.read(reinterpret_cast<char*>(collect_prev_action_.data()), 2 * sizeof(double));
    std::istringstream env_ss(get_blob(runtime_is));
    env_.load_state(env_ss);
    get_rng(runtime_is, rng_explore_);
    get_rng(runtime_is, rng_sample_);
    get_rng(runtime_is, rng_wm_);
    get_rng(runtime_is, rng_sal_);
    get_rng(runtime_is, rng_imagine_);
    buffer_ = ReplayBuffer::load(runtime_is);
    last_salience_map_ = Array();
    if (!runtime_is) throw std::runtime_error("trainer: truncated runtime state");
}

}  // namespace psp
