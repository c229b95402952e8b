#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <fstream>
#include <string>

#include "psp/rng.hpp"
#include "psp/tensor.hpp"

namespace psp {

enum class BackgroundMode { none, noise, reafferent };

std::string to_string(BackgroundMode m);
BackgroundMode background_mode_from_string(const std::string& s);

// Exact sprite colors (multiples of 1/255, so byte quantization round-trips
// them losslessly and rendered pixels can be classified by equality).
const std::array<double, 3>& agent_color();
const std::array<double, 3>& goal_color();

struct EnvConfig {
    int image_size = 32;
    int episode_len = 625;
    BackgroundMode background_mode = BackgroundMode::reafferent;
    int n_time_values = 625;
    int n_action_bins = 4;
    int grid_cells = 16;    // background grid resolution before upscaling
    std::uint64_t seed = 0; // seeds the background table

    bool operator==(const EnvConfig&) const = default;
};

struct Observation {
    Array image;  // H*W*3, row-major, channel-interleaved, values in [0, 1]
    int t = 0;
};

// Per-pixel ground-truth labels for the current frame.
// Labels: 0 = agent, 1 = goal, 2 = background (also the residual id).
struct OracleMask {
    std::vector<int> labels;
    int height = 0, width = 0;
};

// 2-D point mass on the unit square chasing a fixed goal, rendered over a
// background whose content is a deterministic function of the current time
// index and the previous action's first component. The background table
// makes self-induced visual change fully predictable: an agent (or model)
// that tracks time and its own actions can anticipate every pixel of it.
class PointMassEnv {
public:
    explicit PointMassEnv(EnvConfig cfg);

    Observation reset(std::uint64_t episode_seed);

    struct StepResult {
        Observation obs;
        double reward = 0.0;
        bool cont = true;  // false on the terminal step
    };
    // Throws std::logic_error if called after the episode ended.
    StepResult step(const Eigen::Vector2d& action);

    OracleMask oracle_mask() const;

    // --- inspection -------------------------------------------------------
    const EnvConfig& config() const { return cfg_; }
    const Eigen::Vector2d& agent_pos() const { return pos_; }
    const Eigen::Vector2d& goal_pos() const { return goal_; }
    const Eigen::Vector2d& prev_action() const { return prev_action_; }
    int t() const { return t_; }
    bool done() const { return done_; }
    // Index into the background table used for the current frame
    // (reafferent mode only; -1 otherwise).
    int background_index() const { return bg_index_; }

    // First-component action bin over [-1, 1] split into `bins` equal parts.
    static int action_bin(double a0, int bins);
    // bin * n_time_values + (t mod n_time_values)
    int table_index(int bin, int t) const;
    // Raw grid (grid_cells^2 * 3 values) for a table row.
    const Array& table_grid(int index) const;
    int table_size() const { return static_cast<int>(table_.size()); }

    // Mid-episode state round-trip (positions, time, episode rng, ...).
    void save_state(std::ostream& os) const;
    void load_state(std::istream& is);

private:
    Array render() const;
    Array current_background() const;
    void fill_grid(Array& grid);

    EnvConfig cfg_;
    std::vector<Array> table_;  // reafferent mode: one grid per (bin, time)
    Eigen::Vector2d pos_{0.5, 0.5}, goal_{0.5, 0.5};
    Eigen::Vector2d prev_action_{0.0, 0.0};
    int t_ = 0;
    bool done_ = true;  // must reset() before stepping
    int bg_index_ = -1;
    Rng ep_rng_;        // placement at reset; noise-mode backgrounds
    Array noise_grid_;  // current frame's grid in noise mode
};

// Writes frames (frame_00000.ppm, ...) plus an episode.jsonl with one
// record per step: {"t", "action", "reward", "background_index"}.
class EpisodeRecorder {
public:
    explicit EpisodeRecorder(std::string dir);
    void record_reset(const PointMassEnv& env, const Observation& obs);
    void record_step(const PointMassEnv& env, const Observation& obs,
                     const Eigen::Vector2d& action, double reward);

private:
    std::string dir_;
    std::ofstream jsonl_;
    int frame_ = 0;
};

}  // namespace psp
