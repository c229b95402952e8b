#include "psp/env.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "psp/image_io.hpp"

namespace psp {

namespace {

// All fixed colors are exact multiples of 1/255 so that 8-bit dumps and
// replay storage reproduce them bit-for-bit.
constexpr double kAgentColor[3] = {230.0 / 255.0, 51.0 / 255.0, 26.0 / 255.0};
constexpr double kGoalColor[3] = {26.0 / 255.0, 230.0 / 255.0, 230.0 / 255.0};
constexpr double kGrayLevel = 0.5;

constexpr double kStepSize = 0.05;
constexpr double kGoalRadius = 0.08;   // reward switches to +1 inside this
constexpr double kMinSpawnDist = 0.25; // agent never spawns on the goal

double clamp01(double v) { return std::fmin(1.0, std::fmax(0.0, v)); }
double clamp_sym(double v) { return std::fmin(1.0, std::fmax(-1.0, v)); }

}  // namespace

std::string to_string(BackgroundMode m) {
    switch (m) {
        case BackgroundMode::none: return "none";
        case BackgroundMode::noise: return "noise";
        case BackgroundMode::reafferent: return "reafferent";
    }
    return "?";
}

BackgroundMode background_mode_from_string(const std::string& s) {
    if (s == "none") return BackgroundMode::none;
    if (s == "noise") return BackgroundMode::noise;
    if (s == "reafferent") return BackgroundMode::reafferent;
    throw std::invalid_argument("env: unknown background mode '" + s + "'");
}

const std::array<double, 3>& agent_color() {
    static const std::array<double, 3> c{kAgentColor[0], kAgentColor[1], kAgentColor[2]};
    return c;
}

const std::array<double, 3>& goal_color() {
    static const std::array<double, 3> c{kGoalColor[0], kGoalColor[1], kGoalColor[2]};
    return c;
}

PointMassEnv::PointMassEnv(EnvConfig cfg) : cfg_(cfg) {
    if (cfg_.image_size < 8) throw std::invalid_argument("env: image_size must be >= 8");
    if (cfg_.n_action_bins < 1 || cfg_.n_time_values < 1 || cfg_.grid_cells < 1 ||
        cfg_.episode_len < 1) {
        throw std::invalid_argument("env: counts must be positive");
    }
    if (cfg_.background_mode == BackgroundMode::reafferent) {
        Rng table_rng(derive_seed(cfg_.seed, "env.table"));
        const int n = cfg_.n_action_bins * cfg_.n_time_values;
        table_.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            Array grid(static_cast<Eigen::Index>(cfg_.grid_cells) * cfg_.grid_cells * 3);
            for (Eigen::Index j = 0; j < grid.size(); ++j) {
                grid(j) = static_cast<double>(table_rng.uniform_int(256)) / 255.0;
            }
            table_.push_back(std::move(grid));
        }
    }
}

int PointMassEnv::action_bin(double a0, int bins) {
    const double x = clamp_sym(a0);
    const int b = static_cast<int>(std::floor((x + 1.0) / 2.0 * bins));
    return std::min(bins - 1, std::max(0, b));
}

int PointMassEnv::table_index(int bin, int t) const {
    return bin * cfg_.n_time_values + (t % cfg_.n_time_values);
}

const Array& PointMassEnv::table_grid(int index) const {
    if (index < 0 || index >= static_cast<int>(table_.size())) {
        throw std::invalid_argument("env: table index " + std::to_string(index) + " out of range");
    }
    return table_[static_cast<size_t>(index)];
}

void PointMassEnv::fill_grid(Array& grid) {
    grid.resize(static_cast<Eigen::Index>(cfg_.grid_cells) * cfg_.grid_cells * 3);
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
        grid(j) = static_cast<double>(ep_rng_.uniform_int(256)) / 255.0;
    }
}

Observation PointMassEnv::reset(std::uint64_t episode_seed) {
    ep_rng_ = Rng(derive_seed(cfg_.seed, "env.episode." + std::to_string(episode_seed)));
    goal_ = {ep_rng_.uniform(0.15, 0.85), ep_rng_.uniform(0.15, 0.85)};
    for (int attempt = 0;; ++attempt) {
        pos_ = {ep_rng_.uniform(0.15, 0.85), ep_rng_.uniform(0.15, 0.85)};
        if ((pos_ - goal_).norm() >= kMinSpawnDist) break;
        if (attempt > 1000) throw std::runtime_error("env: could not place agent away from goal");
    }
    t_ = 0;
    prev_action_ = {0.0, 0.0};
    done_ = false;
    if (cfg_.background_mode == BackgroundMode::noise) fill_grid(noise_grid_);
    bg_index_ = (cfg_.background_mode == BackgroundMode::reafferent)
                    ? table_index(action_bin(prev_action_.x(), cfg_.n_action_bins), t_)
                    : -1;
    return Observation{render(), t_};
}

PointMassEnv::StepResult PointMassEnv::step(const Eigen::Vector2d& action) {
    if (done_) throw std::logic_error("env: step() called after the episode ended");
    Eigen::Vector2d a{clamp_sym(action.x()), clamp_sym(action.y())};
    pos_.x() = clamp01(pos_.x() + kStepSize * a.x());
    pos_.y() = clamp01(pos_.y() + kStepSize * a.y());
    prev_action_ = a;
    t_ += 1;
    done_ = (t_ >= cfg_.episode_len);

    const double dist = (pos_ - goal_).norm();
    const double reward = (dist < kGoalRadius) ? 1.0 : -dist;

    if (cfg_.background_mode == BackgroundMode::noise) fill_grid(noise_grid_);
    bg_index_ = (cfg_.background_mode == BackgroundMode::reafferent)
                    ? table_index(action_bin(a.x(), cfg_.n_action_bins), t_)
                    : -1;
    return StepResult{Observation{render(), t_}, reward, !done_};
}

Array PointMassEnv::current_background() const {
    const int size = cfg_.image_size;
    Array img(static_cast<Eigen::Index>(size) * size * 3);
    switch (cfg_.background_mode) {
        case BackgroundMode::none:
            img.setConstant(kGrayLevel);
            return img;
        case BackgroundMode::noise:
        case BackgroundMode::reafferent: {
            const Array& grid = (cfg_.background_mode == BackgroundMode::noise)
                                    ? noise_grid_
                                    : table_[static_cast<size_t>(bg_index_)];
            const int cells = cfg_.grid_cells;
            for (int r = 0; r < size; ++r) {
                const int gr = r * cells / size;
                for (int c = 0; c < size; ++c) {
                    const int gc = c * cells / size;
                    const Eigen::Index src = (static_cast<Eigen::Index>(gr) * cells + gc) * 3;
                    const Eigen::Index dst = (static_cast<Eigen::Index>(r) * size + c) * 3;
                    img(dst) = grid(src);
                    img(dst + 1) = grid(src + 1);
                    img(dst + 2) = grid(src + 2);
                }
            }
            return img;
        }
    }
    throw std::logic_error("env: unhandled background mode");
}

Array PointMassEnv::render() const {
    const int size = cfg_.image_size;
    Array img = current_background();

    // Radii scale with the rendered size so the foreground stays a small
    // fraction of the frame at any resolution.
    const double k = size / 32.0;
    const double agent_r = 3.0 * k;
    const double ring_outer = 4.0 * k;
    const double ring_inner = 2.5 * k;

    const double ax = pos_.x() * size, ay = pos_.y() * size;
    const double gx = goal_.x() * size, gy = goal_.y() * size;

    for (int r = 0; r < size; ++r) {
        const double py = r + 0.5;
        for (int c = 0; c < size; ++c) {
            const double px = c + 0.5;
            const Eigen::Index at = (static_cast<Eigen::Index>(r) * size + c) * 3;
            const double dg = std::hypot(px - gx, py - gy);
            if (dg >= ring_inner && dg <= ring_outer) {
                img(at) = kGoalColor[0];
                img(at + 1) = kGoalColor[1];
                img(at + 2) = kGoalColor[2];
            }
            const double da = std::hypot(px - ax, py - ay);
            if (da <= agent_r) {  // agent occludes the goal marker
                img(at) = kAgentColor[0];
                img(at + 1) = kAgentColor[1];
                img(at + 2) = kAgentColor[2];
            }
        }
    }
    return img;
}

OracleMask PointMassEnv::oracle_mask() const {
    const int size = cfg_.image_size;
    const double k = size / 32.0;
    const double agent_r = 3.0 * k;
    const double ring_outer = 4.0 * k;
    const double ring_inner = 2.5 * k;
    const double ax = pos_.x() * size, ay = pos_.y() * size;
    const double gx = goal_.x() * size, gy = goal_.y() * size;

    OracleMask mask;
    mask.height = mask.width = size;
    mask.labels.assign(static_cast<size_t>(size) * size, 2);
    for (int r = 0; r < size; ++r) {
        const double py = r + 0.5;
        for (int c = 0; c < size; ++c) {
            const double px = c + 0.5;
            const size_t at = static_cast<size_t>(r) * size + c;
            const double dg = std::hypot(px - gx, py - gy);
            if (dg >= ring_inner && dg <= ring_outer) mask.labels[at] = 1;
            const double da = std::hypot(px - ax, py - ay);
            if (da <= agent_r) mask.labels[at] = 0;
        }
    }
    return mask;
}

void PointMassEnv::save_state(std::ostream& os) const {
    os << std::setprecision(17);
    os << pos_.x() << " " << pos_.y() << " " << goal_.x() << " " << goal_.y() << " "
       << prev_action_.x() << " " << prev_action_.y() << " " << t_ << " " << done_ << " "
       << bg_index_ << "\n";
    ep_rng_.save(os);
    os << "\n";
    if (cfg_.background_mode == BackgroundMode::noise) {
        os << noise_grid_.size() << "\n";
        for (Eigen::Index i = 0; i < noise_grid_.size(); ++i) os << noise_grid_(i) << " ";
        os << "\n";
    }
}

void PointMassEnv::load_state(std::istream& is) {
    is >> pos_.x() >> pos_.y() >> goal_.x() >> goal_.y() >> prev_action_.x() >> prev_action_.y() >>
        t_ >> done_ >> bg_index_;
    ep_rng_.load(is);
    if (cfg_.background_mode == BackgroundMode::noise) {
        Eigen::Index n;
        is >> n;
        noise_grid_.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) is >> noise_grid_(i);
    }
    if (!is) throw std::runtime_error("env: corrupt saved state");
}

EpisodeRecorder::EpisodeRecorder(std::string dir)
    : dir_(std::move(dir)), jsonl_(dir_ + "/episode.jsonl") {
    if (!jsonl_) throw std::runtime_error("recorder: cannot write to '" + dir_ + "'");
}

namespace {
std::string frame_name(int idx) {
    std::ostringstream os;
    os << "frame_" << std::setw(5) << std::setfill('0') << idx << ".ppm";
    return os.str();
}
}  // namespace

void EpisodeRecorder::record_reset(const PointMassEnv& env, const Observation& obs) {
    const int size = env.config().image_size;
    write_ppm(dir_ + "/" + frame_name(frame_++), obs.image, size, size);
    nlohmann::json j{{"t", obs.t},
                     {"action", {0.0, 0.0}},
                     {"reward", 0.0},
                     {"background_index", env.background_index()}};
    jsonl_ << j.dump() << "\n";
}

void EpisodeRecorder::record_step(const PointMassEnv& env, const Observation& obs,
                                  const Eigen::Vector2d& action, double reward) {
    const int size = env.config().image_size;
    write_ppm(dir_ + "/" + frame_name(frame_++), obs.image, size, size);
    nlohmann::json j{{"t", obs.t},
                     {"action", {action.x(), action.y()}},
                     {"reward", reward},
                     {"background_index", env.background_index()}};
    jsonl_ << j.dump() << "\n";
}

}  // namespace psp
