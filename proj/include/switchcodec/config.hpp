#pragma once

// Config files use a small TOML subset:
//
//   # comment
//   [section]
//   key = 42            integers
//   key = 0.01          floats (exponents allowed)
//   key = "text"        basic strings with \" \\ \n \t escapes
//   key = true          booleans
//   key = [1, 2, 3]     arrays, possibly nested, on one line
//
// Every key must belong to a section and must be known to CliConfig.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "switchcodec/eval.hpp"
#include "switchcodec/spectral.hpp"

namespace switchcodec {

struct ConfigValue {
    using Array = std::vector<ConfigValue>;
    std::variant<std::int64_t, double, std::string, bool, Array> data;
    std::size_t line = 0;

    bool is_int() const noexcept { return std::holds_alternative<std::int64_t>(data); }
    bool is_number() const noexcept { return is_int() || std::holds_alternative<double>(data); }
    std::string type_name() const;
};

// "section.key" -> value.
using ConfigTable = std::map<std::string, ConfigValue>;

// Throws ConfigError with the 1-based line number on malformed input or a
// repeated key.
ConfigTable parse_config(std::string_view text);

// Parses the right-hand side of a single `key = value` assignment.
ConfigValue parse_config_value(std::string_view text, std::size_t line = 0);

struct DataConfig {
    std::size_t clusters = 4;
    double separation = 4.0;
    std::uint64_t seed = 1;
    std::size_t frames = 32;
    std::size_t utterances_per_mode = 16;

    SyntheticLatentSource source(std::size_t dim) const;
};

struct SpectralConfig {
    std::vector<TierSpec> tiers = default_tier_specs();
    ConcatMode concat = ConcatMode::kTime;
    std::uint64_t seed = 7;
};

struct SweepConfig {
    std::vector<std::size_t> routed_values{4, 8, 16};
    std::vector<double> gammas{0.0, 0.1, 0.01, 0.001};
    double drps_gamma = 0.01;  // gamma used by the DRPS-on usage sweep
    std::size_t replicates = 5;
    std::size_t jobs = 1;
};

struct CliConfig {
    RevqConfig model;
    TrainConfig train;
    DataConfig data;
    SpectralConfig spectral;
    SweepConfig sweep;

    // Desk-scale defaults: 300 steps with a DRPS window of 20 steps.
    static CliConfig defaults();

    // Applies every entry of `table`; unknown keys and type mismatches throw
    // ConfigError naming the key and line.
    void apply(const ConfigTable& table);
    // "section.key=value", as given to --set.
    void apply_override(std::string_view assignment);

    // Cross-field checks (K_r <= N_r, C a power of two, ...). Throws ConfigError.
    void validate() const;
};

CliConfig load_config(const std::string& path);

}  // namespace switchcodec
