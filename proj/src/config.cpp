#include "psp/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "psp/saliency.hpp"

namespace psp {
namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + s.size() || s.empty()) throw std::invalid_argument("not a number");
    return v;
}

long long parse_int(const std::string& s) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not an integer");
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not an unsigned integer");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw std::invalid_argument("expected true or false");
}

struct Field {
    const char* key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

// One entry per key; table order is file order. serialize and parse share
// this list, so they cannot drift apart.
const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
         [](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64(v); }},
        {"total_env_steps",
         [](const ExperimentConfig& c) { return std::to_string(c.total_env_steps); },
         [](ExperimentConfig& c, const std::string& v) {
             c.total_env_steps = static_cast<long>(parse_int(v));
         }},
        {"eval_every", [](const ExperimentConfig& c) { return std::to_string(c.eval_every); },
         [](ExperimentConfig& c, const std::string& v) {
             c.eval_every = static_cast<long>(parse_int(v));
         }},
        {"out_dir", [](const ExperimentConfig& c) { return c.out_dir; },
         [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }},
        {"alpha", [](const ExperimentConfig& c) { return fmt_double(c.train.alpha); },
         [](ExperimentConfig& c, const std::string& v) { c.train.alpha = parse_double(v); }},

        {"env.image_size", [](const ExperimentConfig& c) { return std::to_string(c.env.image_size); },
         [](ExperimentConfig& c, const std::string& v) {
             c.env.image_size = static_cast<int>(parse_int(v));
         }},
        {"env.episode_len",
         [](const ExperimentConfig& c) { return std::to_string(c.env.episode_len); },
         [](ExperimentConfig& c, const std::string& v) {
             c.env.episode_len = static_cast<int>(parse_int(v));
         }},
        {"env.background_mode",
         [](const ExperimentConfig& c) { return to_string(c.env.background_mode); },
         [](ExperimentConfig& c, const std::string& v) {
             c.env.background_mode = background_mode_from_string(v);
         }},
        {"env.n_time_values",
         [](const ExperimentConfig& c) { return std::to_string(c.env.n_time_values); },
         [](ExperimentConfig& c, const std::string& v) {
             c.env.n_time_values = static_cast<int>(parse_int(v));
         }},
        {"env.n_action_bins",
         [](const ExperimentConfig& c) { return std::to_string(c.env.n_action_bins); },
         [](ExperimentConfig& c, const std::string& v) {
             c.env.n_action_bins = static_cast<int>(parse_int(v));
         }},
        {"env.grid_cells", [](const ExperimentConfig& c) { return std::to_string(c.env.grid_cells); },
         [](ExperimentConfig& c, const std::string& v) {
             c.env.grid_cells = static_cast<int>(parse_int(v));
         }},
        {"env.seed", [](const ExperimentConfig& c) { return std::to_string(c.env.seed); },
         [](ExperimentConfig& c, const std::string& v) { c.env.seed = parse_u64(v); }},

        {"train.batch_size",
         [](const ExperimentConfig& c) { return std::to_string(c.train.batch_size); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.batch_size = static_cast<int>(parse_int(v));
         }},
        {"train.batch_length",
         [](const ExperimentConfig& c) { return std::to_string(c.train.batch_length); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.batch_length = static_cast<int>(parse_int(v));
         }},
        {"train.horizon", [](const ExperimentConfig& c) { return std::to_string(c.train.horizon); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.horizon = static_cast<int>(parse_int(v));
         }},
        {"train.gamma", [](const ExperimentConfig& c) { return fmt_double(c.train.gamma); },
         [](ExperimentConfig& c, const std::string& v) { c.train.gamma = parse_double(v); }},
        {"train.lambda", [](const ExperimentConfig& c) { return fmt_double(c.train.lambda); },
         [](ExperimentConfig& c, const std::string& v) { c.train.lambda = parse_double(v); }},
        {"train.lr_model", [](const ExperimentConfig& c) { return fmt_double(c.train.lr_model); },
         [](ExperimentConfig& c, const std::string& v) { c.train.lr_model = parse_double(v); }},
        {"train.lr_actor", [](const ExperimentConfig& c) { return fmt_double(c.train.lr_actor); },
         [](ExperimentConfig& c, const std::string& v) { c.train.lr_actor = parse_double(v); }},
        {"train.lr_critic", [](const ExperimentConfig& c) { return fmt_double(c.train.lr_critic); },
         [](ExperimentConfig& c, const std::string& v) { c.train.lr_critic = parse_double(v); }},
        {"train.entropy_coef",
         [](const ExperimentConfig& c) { return fmt_double(c.train.entropy_coef); },
         [](ExperimentConfig& c, const std::string& v) { c.train.entropy_coef = parse_double(v); }},
        {"train.explore_sigma",
         [](const ExperimentConfig& c) { return fmt_double(c.train.explore_sigma); },
         [](ExperimentConfig& c, const std::string& v) { c.train.explore_sigma = parse_double(v); }},
        {"train.train_ratio",
         [](const ExperimentConfig& c) { return fmt_double(c.train.train_ratio); },
         [](ExperimentConfig& c, const std::string& v) { c.train.train_ratio = parse_double(v); }},
        {"train.warmup", [](const ExperimentConfig& c) { return std::to_string(c.train.warmup); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.warmup = static_cast<long>(parse_int(v));
         }},
        {"train.buffer_capacity",
         [](const ExperimentConfig& c) { return std::to_string(c.train.buffer_capacity); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.buffer_capacity = static_cast<long>(parse_int(v));
         }},
        {"train.imagination_starts",
         [](const ExperimentConfig& c) { return std::to_string(c.train.imagination_starts); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.imagination_starts = static_cast<int>(parse_int(v));
         }},
        {"train.weighting", [](const ExperimentConfig& c) { return to_string(c.train.weighting); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.weighting = weighting_source_from_string(v);
         }},
        {"train.segmentation_agg",
         [](const ExperimentConfig& c) { return c.train.segmentation_agg ? "true" : "false"; },
         [](ExperimentConfig& c, const std::string& v) { c.train.segmentation_agg = parse_bool(v); }},
        {"train.clip_percentile",
         [](const ExperimentConfig& c) { return fmt_double(c.train.clip_percentile); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.clip_percentile = parse_double(v);
         }},
        {"train.salience_all_steps",
         [](const ExperimentConfig& c) { return c.train.salience_all_steps ? "true" : "false"; },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.salience_all_steps = parse_bool(v);
         }},
        {"train.debug_uniform_weights",
         [](const ExperimentConfig& c) { return c.train.debug_uniform_weights ? "true" : "false"; },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.debug_uniform_weights = parse_bool(v);
         }},
        {"train.free_bits", [](const ExperimentConfig& c) { return fmt_double(c.train.free_bits); },
         [](ExperimentConfig& c, const std::string& v) { c.train.free_bits = parse_double(v); }},
        {"train.beta_pred", [](const ExperimentConfig& c) { return fmt_double(c.train.beta_pred); },
         [](ExperimentConfig& c, const std::string& v) { c.train.beta_pred = parse_double(v); }},
        {"train.beta_dyn", [](const ExperimentConfig& c) { return fmt_double(c.train.beta_dyn); },
         [](ExperimentConfig& c, const std::string& v) { c.train.beta_dyn = parse_double(v); }},
        {"train.beta_rep", [](const ExperimentConfig& c) { return fmt_double(c.train.beta_rep); },
         [](ExperimentConfig& c, const std::string& v) { c.train.beta_rep = parse_double(v); }},
        {"train.eval_episodes",
         [](const ExperimentConfig& c) { return std::to_string(c.train.eval_episodes); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.eval_episodes = static_cast<int>(parse_int(v));
         }},
        {"train.recon_eval_episodes",
         [](const ExperimentConfig& c) { return std::to_string(c.train.recon_eval_episodes); },
         [](ExperimentConfig& c, const std::string& v) {
             c.train.recon_eval_episodes = static_cast<int>(parse_int(v));
         }},

        {"adv.enabled", [](const ExperimentConfig& c) { return c.adv.enabled ? "true" : "false"; },
         [](ExperimentConfig& c, const std::string& v) { c.adv.enabled = parse_bool(v); }},
        {"adv.epsilon", [](const ExperimentConfig& c) { return fmt_double(c.adv.epsilon); },
         [](ExperimentConfig& c, const std::string& v) { c.adv.epsilon = parse_double(v); }},
    };
    return table;
}

const std::map<std::string, const Field*>& field_index() {
    static const std::map<std::string, const Field*> index = [] {
        std::map<std::string, const Field*> m;
        for (const Field& f : fields()) m.emplace(f.key, &f);
        return m;
    }();
    return index;
}

std::string section_of(const std::string& key) {
    auto dot = key.find('.');
    return dot == std::string::npos ? std::string() : key.substr(0, dot);
}

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream out;
    std::string prev_section;
    bool first = true;
    for (const Field& f : fields()) {
        std::string section = section_of(f.key);
        if (!first && section != prev_section) out << "\n";
        out << f.key << " = " << f.get(c) << "\n";
        prev_section = section;
        first = false;
    }
    return out.str();
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) +
                              ": expected `key = value`, got '" + stripped + "'");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        auto it = field_index().find(key);
        if (it == field_index().end())
            throw ConfigError(source + ":" + std::to_string(lineno) + ": unknown key '" + key +
                              "'");
        try {
            it->second->set(cfg, value);
        } catch (const std::exception& e) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": bad value '" + value +
                              "' for key '" + key + "': " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

}  // namespace psp
