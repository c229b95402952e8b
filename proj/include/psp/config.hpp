#pragma once

#include <stdexcept>
#include <string>

#include "psp/adversarial.hpp"
#include "psp/env.hpp"
#include "psp/trainer.hpp"

namespace psp {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Everything one run needs, flattened into a line-oriented `key = value`
// file. Dotted prefixes select the sub-config (`env.`, `train.`, `adv.`);
// bare keys are run-level. `alpha` lives at the top level in the file but
// lands in train.alpha, which is where the trainer reads it.
struct ExperimentConfig {
    EnvConfig env;
    TrainConfig train;
    AdvConfig adv;
    std::uint64_t seed = 1;
    long total_env_steps = 60000;
    long eval_every = 5000;
    std::string out_dir = "runs/psp";

    bool operator==(const ExperimentConfig&) const = default;
};

// Emits every key, grouped by section, with doubles in shortest
// round-trippable form. parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& c);

// Blank lines and `#` comments are skipped. Unknown keys and malformed
// values raise ConfigError naming the offending key and line, prefixed
// with `source` (use the file path when parsing a file).
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");

// Reads and parses `path`; a missing or unreadable file raises ConfigError
// naming the path.
ExperimentConfig load_config_file(const std::string& path);

}  // namespace psp
