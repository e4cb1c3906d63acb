#include "switchcodec/config.hpp"

#include <cctype>
#include <charconv>
#include <functional>

#include "switchcodec/bitstream.hpp"
#include "switchcodec/byte_io.hpp"
#include "switchcodec/error.hpp"

namespace switchcodec {

namespace {

std::string at_line(std::size_t line) { return line ? " (line " + std::to_string(line) + ")" : std::string(); }

class ValueParser {
public:
    ValueParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

    ConfigValue parse_all() {
        ConfigValue v = parse_value();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing characters '" + std::string(text_.substr(pos_)) + "'");
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(msg + at_line(line_), {}, line_); }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }

    bool starts_with(std::string_view word) const { return text_.substr(pos_, word.size()) == word; }

    ConfigValue parse_value() {
        skip_space();
        if (pos_ >= text_.size()) fail("missing value");
        ConfigValue v;
        v.line = line_;
        const char c = text_[pos_];
        if (c == '"') {
            v.data = parse_string();
        } else if (c == '[') {
            v.data = parse_array();
        } else if (starts_with("true")) {
            pos_ += 4;
            v.data = true;
        } else if (starts_with("false")) {
            pos_ += 5;
            v.data = false;
        } else {
            parse_number(v);
        }
        return v;
    }

    std::string parse_string() {
        ++pos_;
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            char c = text_[pos_++];
            if (c == '\\') {
                if (pos_ >= text_.size()) break;
                switch (text_[pos_++]) {
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    default: fail("unsupported escape sequence in string");
                }
            }
            out.push_back(c);
        }
        if (pos_ >= text_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    ConfigValue::Array parse_array() {
        ++pos_;
        ConfigValue::Array out;
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ']') {
            ++pos_;
            return out;
        }
        for (;;) {
            out.push_back(parse_value());
            skip_space();
            if (pos_ >= text_.size()) fail("unterminated array");
            if (text_[pos_] == ',') {
                ++pos_;
                skip_space();
                if (pos_ < text_.size() && text_[pos_] == ']') {
                    ++pos_;
                    return out;
                }
                continue;
            }
            if (text_[pos_] == ']') {
                ++pos_;
                return out;
            }
            fail("expected ',' or ']' in array");
        }
    }

    void parse_number(ConfigValue& v) {
        std::size_t end = pos_;
        while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                                      text_[end] == '-' || text_[end] == '+')) {
            ++end;
        }
        std::string_view token = text_.substr(pos_, end - pos_);
        if (token.empty()) fail("unrecognized value '" + std::string(text_.substr(pos_)) + "'");
        std::string_view digits = token;
        if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
        const char* first = digits.data();
        const char* last = digits.data() + digits.size();
        const bool is_float = digits.find_first_of(".eE") != std::string_view::npos;
        if (!is_float) {
            std::int64_t i = 0;
            const auto r = std::from_chars(first, last, i);
            if (r.ec != std::errc() || r.ptr != last) fail("invalid integer '" + std::string(token) + "'");
            v.data = i;
        } else {
            double d = 0.0;
            const auto r = std::from_chars(first, last, d);
            if (r.ec != std::errc() || r.ptr != last) fail("invalid number '" + std::string(token) + "'");
            v.data = d;
        }
        pos_ = end;
    }

    std::string_view text_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string && c == '\\') {
            ++i;
        } else if (c == '"') {
            in_string = !in_string;
        } else if (c == '#' && !in_string) {
            return line.substr(0, i);
        }
    }
    return line;
}

bool valid_name(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    }
    return true;
}

// Typed accessors; each throws ConfigError naming the key.
[[noreturn]] void type_error(const std::string& key, const ConfigValue& v, const char* expected) {
    throw ConfigError("config key '" + key + "' expects " + expected + ", got " + v.type_name() + at_line(v.line),
                      key, v.line);
}

double as_double(const std::string& key, const ConfigValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v.data)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v.data)) return *d;
    type_error(key, v, "a number");
}

std::uint64_t as_u64(const std::string& key, const ConfigValue& v) {
    const auto* i = std::get_if<std::int64_t>(&v.data);
    if (!i) type_error(key, v, "a non-negative integer");
    if (*i < 0) {
        throw ConfigError("config key '" + key + "' must be non-negative" + at_line(v.line), key, v.line);
    }
    return static_cast<std::uint64_t>(*i);
}

std::size_t as_size(const std::string& key, const ConfigValue& v) { return static_cast<std::size_t>(as_u64(key, v)); }

const std::string& as_string(const std::string& key, const ConfigValue& v) {
    const auto* s = std::get_if<std::string>(&v.data);
    if (!s) type_error(key, v, "a string");
    return *s;
}

const ConfigValue::Array& as_array(const std::string& key, const ConfigValue& v) {
    const auto* a = std::get_if<ConfigValue::Array>(&v.data);
    if (!a) type_error(key, v, "an array");
    return *a;
}

DistanceMode parse_distance(const std::string& key, const ConfigValue& v) {
    const auto& s = as_string(key, v);
    if (s == "raw") return DistanceMode::kRaw;
    if (s == "normalized") return DistanceMode::kNormalized;
    throw ConfigError("config key '" + key + "' must be \"raw\" or \"normalized\"" + at_line(v.line), key, v.line);
}

RoutingMode parse_mode(const std::string& key, const ConfigValue& v) {
    const auto& s = as_string(key, v);
    if (s == "revq") return RoutingMode::kRevq;
    if (s == "fixed") return RoutingMode::kFixedRvq;
    throw ConfigError("config key '" + key + "' must be \"revq\" or \"fixed\"" + at_line(v.line), key, v.line);
}

ConcatMode parse_concat(const std::string& key, const ConfigValue& v) {
    const auto& s = as_string(key, v);
    if (s == "time") return ConcatMode::kTime;
    if (s == "height") return ConcatMode::kHeight;
    throw ConfigError("config key '" + key + "' must be \"time\" or \"height\"" + at_line(v.line), key, v.line);
}

std::vector<TierSpec> parse_tiers(const std::string& key, const ConfigValue& v) {
    std::vector<TierSpec> out;
    for (const auto& item : as_array(key, v)) {
        const auto& pair = as_array(key, item);
        if (pair.size() != 2) {
            throw ConfigError("config key '" + key + "' expects [fft_bins, period] pairs" + at_line(v.line), key,
                              v.line);
        }
        out.push_back(TierSpec{as_size(key, pair[0]), as_size(key, pair[1])});
    }
    return out;
}

using Setter = std::function<void(CliConfig&, const std::string&, const ConfigValue&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"model.dim", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.model.dim = as_size(k, v); }},
        {"model.routed", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.model.routed = as_size(k, v); }},
        {"model.active", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.model.active = as_size(k, v); }},
        {"model.shared", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.model.shared = as_size(k, v); }},
        {"model.codebook_size",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.model.codebook_size = as_size(k, v); }},
        {"model.window_frames",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.model.window_frames = as_size(k, v); }},
        {"model.distance",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.model.distance = parse_distance(k, v); }},

        {"train.steps", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.steps = as_size(k, v); }},
        {"train.batch", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.batch = as_size(k, v); }},
        {"train.lr", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.lr = as_double(k, v); }},
        {"train.commitment_weight",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.commitment_weight = as_double(k, v); }},
        {"train.ema_decay",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.ema_decay = as_double(k, v); }},
        {"train.gamma", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.gamma = as_double(k, v); }},
        {"train.drps_window",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.drps_window = as_size(k, v); }},
        {"train.dead_threshold_frac",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.dead_threshold_frac = as_double(k, v); }},
        {"train.seed", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.seed = as_u64(k, v); }},
        {"train.kmeans_iterations",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.kmeans_iterations = as_size(k, v); }},
        {"train.init_windows",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.init_windows = as_size(k, v); }},
        {"train.mode", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.train.mode = parse_mode(k, v); }},

        {"data.clusters", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.data.clusters = as_size(k, v); }},
        {"data.separation",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.data.separation = as_double(k, v); }},
        {"data.seed", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.data.seed = as_u64(k, v); }},
        {"data.frames", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.data.frames = as_size(k, v); }},
        {"data.utterances_per_mode",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.data.utterances_per_mode = as_size(k, v); }},

        {"spectral.tiers",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.spectral.tiers = parse_tiers(k, v); }},
        {"spectral.concat",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.spectral.concat = parse_concat(k, v); }},
        {"spectral.seed", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.spectral.seed = as_u64(k, v); }},

        {"sweep.routed_values",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) {
             c.sweep.routed_values.clear();
             for (const auto& item : as_array(k, v)) c.sweep.routed_values.push_back(as_size(k, item));
         }},
        {"sweep.gammas",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) {
             c.sweep.gammas.clear();
             for (const auto& item : as_array(k, v)) c.sweep.gammas.push_back(as_double(k, item));
         }},
        {"sweep.drps_gamma",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.sweep.drps_gamma = as_double(k, v); }},
        {"sweep.replicates",
         [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.sweep.replicates = as_size(k, v); }},
        {"sweep.jobs", [](CliConfig& c, const std::string& k, const ConfigValue& v) { c.sweep.jobs = as_size(k, v); }},
    };
    return table;
}

}  // namespace

std::string ConfigValue::type_name() const {
    switch (data.index()) {
        case 0: return "integer";
        case 1: return "float";
        case 2: return "string";
        case 3: return "boolean";
        default: return "array";
    }
}

ConfigValue parse_config_value(std::string_view text, std::size_t line) {
    return ValueParser(trim(text), line).parse_all();
}

ConfigTable parse_config(std::string_view text) {
    ConfigTable table;
    std::string section;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("malformed section header" + at_line(line_no), {}, line_no);
            const std::string_view name = trim(line.substr(1, line.size() - 2));
            if (!valid_name(name)) {
                throw ConfigError("invalid section name '" + std::string(name) + "'" + at_line(line_no), {}, line_no);
            }
            section = std::string(name);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'" + at_line(line_no), {}, line_no);
        const std::string_view key = trim(line.substr(0, eq));
        if (!valid_name(key)) {
            throw ConfigError("invalid key '" + std::string(key) + "'" + at_line(line_no), std::string(key), line_no);
        }
        const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
        if (section.empty()) {
            throw ConfigError("key '" + full + "' appears before any [section]" + at_line(line_no), full, line_no);
        }
        if (table.count(full)) throw ConfigError("duplicate key '" + full + "'" + at_line(line_no), full, line_no);
        table.emplace(full, parse_config_value(line.substr(eq + 1), line_no));
    }
    return table;
}

SyntheticLatentSource DataConfig::source(std::size_t dim) const {
    return SyntheticLatentSource::gaussian_clusters(dim, clusters, separation, seed, frames, utterances_per_mode);
}

CliConfig CliConfig::defaults() {
    CliConfig c;
    c.train.steps = 300;
    c.train.drps_window = 20;
    c.train.seed = 1;
    return c;
}

void CliConfig::apply(const ConfigTable& table) {
    const auto& known = setters();
    for (const auto& [key, value] : table) {
        const auto it = known.find(key);
        if (it == known.end()) {
            throw ConfigError("unknown config key '" + key + "'" + at_line(value.line), key, value.line);
        }
        it->second(*this, key, value);
    }
}

void CliConfig::apply_override(std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("override '" + std::string(assignment) + "' must look like section.key=value");
    }
    const std::string key(trim(assignment.substr(0, eq)));
    ConfigTable one;
    try {
        one.emplace(key, parse_config_value(assignment.substr(eq + 1)));
    } catch (const ConfigError& e) {
        throw ConfigError("override for '" + key + "': " + e.what(), key);
    }
    apply(one);
}

void CliConfig::validate() const {
    auto wrap = [](const char* section, const auto& fn) {
        try {
            fn();
        } catch (const ContractViolation& e) {
            throw ConfigError(std::string("[") + section + "] " + e.what(), section);
        }
    };
    wrap("model", [&] {
        model.validate();
        code_bits(model.codebook_size);
    });
    wrap("train", [&] { train.validate(); });
    wrap("data", [&] { data.source(model.dim).validate(); });
    wrap("spectral", [&] {
        if (spectral.tiers.empty()) throw ContractViolation("at least one tier spec is required");
        for (const auto& t : spectral.tiers) t.validate();
    });
    if (sweep.routed_values.empty()) throw ConfigError("[sweep] routed_values must not be empty", "sweep.routed_values");
    for (std::size_t n : sweep.routed_values) {
        if (n < model.active) {
            throw ConfigError("[sweep] routed value " + std::to_string(n) + " is below K_r = " +
                                  std::to_string(model.active),
                              "sweep.routed_values");
        }
    }
    for (double g : sweep.gammas) {
        if (!(g >= 0.0)) throw ConfigError("[sweep] gammas must be >= 0", "sweep.gammas");
    }
    if (!(sweep.drps_gamma >= 0.0)) throw ConfigError("[sweep] drps_gamma must be >= 0", "sweep.drps_gamma");
    if (sweep.replicates == 0) throw ConfigError("[sweep] replicates must be >= 1", "sweep.replicates");
}

CliConfig load_config(const std::string& path) {
    const auto bytes = read_file(path);
    CliConfig cfg = CliConfig::defaults();
    cfg.apply(parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())));
    return cfg;
}

}  // namespace switchcodec
