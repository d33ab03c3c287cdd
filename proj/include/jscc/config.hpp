#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "jscc/codec.hpp"
#include "jscc/data.hpp"
#include "jscc/error.hpp"
#include "jscc/format.hpp"
#include "jscc/training.hpp"

namespace jscc {

/// Everything a training run needs: data, architecture and schedule.
struct ExperimentConfig {
    DatasetSpec data;
    CodecConfig codec;
    TrainConfig train;
    std::string out_dir = ".";
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct FieldCodec {
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    if (!parse_number(v, out)) throw Error(ErrorCategory::config, "field '" + key + "': '" + v + "' is not a number");
    return out;
}

inline long to_long(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long out = 0;
    try {
        out = std::stol(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty())
        throw Error(ErrorCategory::config, "field '" + key + "': '" + v + "' is not an integer");
    return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    std::uint64_t out = 0;
    try {
        out = std::stoull(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != v.size() || v.empty() || v[0] == '-')
        throw Error(ErrorCategory::config, "field '" + key + "': '" + v + "' is not a non-negative integer");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(ErrorCategory::config, "field '" + key + "': '" + v + "' is not a boolean");
}

inline std::string from_bool(bool b) { return b ? "true" : "false"; }

inline const std::map<std::string, FieldCodec>& fields() {
    using E = ExperimentConfig;
    static const std::map<std::string, FieldCodec> table = {
        {"data_root", {[](E& c, const std::string& v) { c.data.root = v; }, [](const E& c) { return c.data.root; }}},
        {"out_dir", {[](E& c, const std::string& v) { c.out_dir = v; }, [](const E& c) { return c.out_dir; }}},
        {"crop_size",
         {[](E& c, const std::string& v) { c.data.crop_size = c.train.crop_size = static_cast<int>(to_long("crop_size", v)); },
          [](const E& c) { return std::to_string(c.data.crop_size); }}},
        {"split_ratio",
         {[](E& c, const std::string& v) { c.data.split_ratio = to_double("split_ratio", v); },
          [](const E& c) { return format_number(c.data.split_ratio); }}},
        {"seed",
         {[](E& c, const std::string& v) { c.data.seed = c.train.seed = to_u64("seed", v); },
          [](const E& c) { return std::to_string(c.train.seed); }}},
        {"deterministic",
         {[](E& c, const std::string& v) { c.train.deterministic = to_bool("deterministic", v); },
          [](const E& c) { return from_bool(c.train.deterministic); }}},
        {"modulation_order",
         {[](E& c, const std::string& v) {
              const long m = to_long("modulation_order", v);
              if (m < 2) throw Error(ErrorCategory::config, "field 'modulation_order': must be >= 2");
              c.train.modulation_order = static_cast<std::size_t>(m);
          },
          [](const E& c) { return std::to_string(c.train.modulation_order); }}},
        {"quantizer",
         {[](E& c, const std::string& v) { c.train.quantizer = parse_quantizer(v); },
          [](const E& c) { return std::string(quantizer_name(c.train.quantizer)); }}},
        {"lambda",
         {[](E& c, const std::string& v) { c.train.lambda = to_double("lambda", v); },
          [](const E& c) { return format_number(c.train.resolved_lambda()); }}},
        {"snr_train_db",
         {[](E& c, const std::string& v) { c.train.snr_train_db = to_double("snr_train_db", v); },
          [](const E& c) { return format_number(c.train.snr_train_db); }}},
        {"channel",
         {[](E& c, const std::string& v) { c.train.channel = parse_channel(v); },
          [](const E& c) { return std::string(channel_name(c.train.channel)); }}},
        {"metric",
         {[](E& c, const std::string& v) { c.train.metric = parse_metric(v); },
          [](const E& c) { return std::string(metric_name(c.train.metric)); }}},
        {"batch_size",
         {[](E& c, const std::string& v) { c.train.batch_size = static_cast<int>(to_long("batch_size", v)); },
          [](const E& c) { return std::to_string(c.train.batch_size); }}},
        {"lr_init",
         {[](E& c, const std::string& v) { c.train.lr_init = to_double("lr_init", v); },
          [](const E& c) { return format_number(c.train.resolved_lr()); }}},
        {"lr_decay",
         {[](E& c, const std::string& v) { c.train.lr_decay = to_double("lr_decay", v); },
          [](const E& c) { return format_number(c.train.lr_decay); }}},
        {"lr_patience",
         {[](E& c, const std::string& v) { c.train.lr_patience = static_cast<int>(to_long("lr_patience", v)); },
          [](const E& c) { return std::to_string(c.train.lr_patience); }}},
        {"early_stop_patience",
         {[](E& c, const std::string& v) {
              c.train.early_stop_patience = static_cast<int>(to_long("early_stop_patience", v));
          },
          [](const E& c) { return std::to_string(c.train.early_stop_patience); }}},
        {"max_epochs",
         {[](E& c, const std::string& v) { c.train.max_epochs = static_cast<int>(to_long("max_epochs", v)); },
          [](const E& c) { return std::to_string(c.train.max_epochs); }}},
        {"max_steps",
         {[](E& c, const std::string& v) { c.train.max_steps = to_long("max_steps", v); },
          [](const E& c) { return std::to_string(c.train.max_steps); }}},
        {"beta1",
         {[](E& c, const std::string& v) { c.train.beta1 = to_double("beta1", v); },
          [](const E& c) { return format_number(c.train.beta1); }}},
        {"beta2",
         {[](E& c, const std::string& v) { c.train.beta2 = to_double("beta2", v); },
          [](const E& c) { return format_number(c.train.beta2); }}},
        {"power_budget",
         {[](E& c, const std::string& v) { c.train.power_budget = to_double("power_budget", v); },
          [](const E& c) { return format_number(c.train.power_budget); }}},
        {"sigma_q_init",
         {[](E& c, const std::string& v) { c.train.anneal.initial = to_double("sigma_q_init", v); },
          [](const E& c) { return format_number(c.train.anneal.initial); }}},
        {"sigma_q_max",
         {[](E& c, const std::string& v) { c.train.anneal.cap = to_double("sigma_q_max", v); },
          [](const E& c) { return format_number(c.train.anneal.cap); }}},
        {"anneal_increment",
         {[](E& c, const std::string& v) { c.train.anneal.increment = to_double("anneal_increment", v); },
          [](const E& c) { return format_number(c.train.anneal.increment); }}},
        {"anneal_period",
         {[](E& c, const std::string& v) { c.train.anneal.period = to_long("anneal_period", v); },
          [](const E& c) { return std::to_string(c.train.anneal.period); }}},
        {"msssim_scales",
         {[](E& c, const std::string& v) { c.train.msssim_scales = static_cast<int>(to_long("msssim_scales", v)); },
          [](const E& c) { return std::to_string(c.train.msssim_scales); }}},
        {"msssim_window",
         {[](E& c, const std::string& v) { c.train.msssim_window = static_cast<int>(to_long("msssim_window", v)); },
          [](const E& c) { return std::to_string(c.train.msssim_window); }}},
        {"msssim_sigma",
         {[](E& c, const std::string& v) { c.train.msssim_sigma = to_double("msssim_sigma", v); },
          [](const E& c) { return format_number(c.train.msssim_sigma); }}},
        {"c_out",
         {[](E& c, const std::string& v) { c.codec.c_out = static_cast<int>(to_long("c_out", v)); },
          [](const E& c) { return std::to_string(c.codec.c_out); }}},
        {"base_width",
         {[](E& c, const std::string& v) { c.codec.base_width = static_cast<int>(to_long("base_width", v)); },
          [](const E& c) { return std::to_string(c.codec.base_width); }}},
        {"downsample_factor",
         {[](E& c, const std::string& v) {
              c.codec.downsample_factor = static_cast<int>(to_long("downsample_factor", v));
          },
          [](const E& c) { return std::to_string(c.codec.downsample_factor); }}},
        {"attention_units",
         {[](E& c, const std::string& v) { c.codec.attention_units = static_cast<int>(to_long("attention_units", v)); },
          [](const E& c) { return std::to_string(c.codec.attention_units); }}},
    };
    return table;
}

} // namespace detail

/// Checks cross-field constraints; throws a config error naming the field.
inline void validate(const ExperimentConfig& c) {
    auto field_error = [](const std::string& f, const std::string& msg) {
        throw Error(ErrorCategory::config, "field '" + f + "': " + msg);
    };
    if (c.data.root.empty()) field_error("data_root", "required");
    if (c.data.crop_size <= 0) field_error("crop_size", "must be positive");
    if (c.data.crop_size % c.codec.downsample_factor != 0)
        field_error("crop_size", "must be divisible by downsample_factor " + std::to_string(c.codec.downsample_factor));
    if (!(c.data.split_ratio > 0.0 && c.data.split_ratio < 1.0)) field_error("split_ratio", "must lie in (0, 1)");
    if (c.codec.c_out <= 0 || c.codec.c_out % 2) field_error("c_out", "must be a positive even integer");
    if (c.codec.base_width <= 0) field_error("base_width", "must be positive");
    const int f = c.codec.downsample_factor;
    if (f <= 0 || (f & (f - 1))) field_error("downsample_factor", "must be a power of two");
    if (c.codec.attention_units < 1) field_error("attention_units", "must be >= 1");
    if (c.train.quantized()) {
        const auto m = c.train.modulation_order;
        const auto l = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))));
        if (m < 4 || l * l != m) field_error("modulation_order", "must be a perfect square >= 4");
    }
    if (c.train.lambda && *c.train.lambda < 0) field_error("lambda", "must be >= 0");
    if (c.train.batch_size < 1) field_error("batch_size", "must be >= 1");
    if (c.train.lr_init && !(*c.train.lr_init > 0)) field_error("lr_init", "must be positive");
    if (c.train.lr_patience < 1) field_error("lr_patience", "must be positive");
    if (c.train.early_stop_patience < 1) field_error("early_stop_patience", "must be positive");
    if (c.train.max_epochs < 1) field_error("max_epochs", "must be >= 1");
    if (c.train.max_steps < 0) field_error("max_steps", "must be >= 0");
    if (!(c.train.power_budget > 0)) field_error("power_budget", "must be positive");
    if (c.train.anneal.period < 1) field_error("anneal_period", "must be >= 1");
    if (!(c.train.anneal.initial > 0)) field_error("sigma_q_init", "must be positive");
    if (c.train.anneal.cap < c.train.anneal.initial) field_error("sigma_q_max", "must be >= sigma_q_init");
    if (c.train.msssim_scales < 1) field_error("msssim_scales", "must be >= 1");
    if (c.train.msssim_scales > 5) field_error("msssim_scales", "at most 5 scales have default weights");
    if (c.train.msssim_window < 1 || c.train.msssim_window % 2 == 0) field_error("msssim_window", "must be a positive odd integer");
    if (c.train.metric == MetricTarget::msssim &&
        c.data.crop_size < c.train.msssim_window * (1 << (c.train.msssim_scales - 1)))
        field_error("crop_size", "too small for the configured MS-SSIM scales and window");
}

/// Parses `key = value` lines. '#' starts a comment. Sections, dotted keys,
/// braces and duplicate or unknown keys are rejected.
inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> problems;
    const auto& table = detail::fields();
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (line.front() == '[' || line.front() == '{') {
            problems.push_back(where + "nested sections are not supported");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back(where + "expected 'key = value'");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.find('.') != std::string::npos || value.starts_with('{') || value.starts_with('[')) {
            problems.push_back(where + "field '" + key + "': nested values are not supported");
            continue;
        }
        auto it = table.find(key);
        if (it == table.end()) {
            problems.push_back(where + "unknown field '" + key + "'");
            continue;
        }
        if (seen.count(key)) {
            problems.push_back(where + "field '" + key + "' repeats line " + std::to_string(seen[key]));
            continue;
        }
        seen[key] = lineno;
        try {
            it->second.set(cfg, value);
        } catch (const Error& e) {
            problems.push_back(where + e.what());
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid config:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw Error(ErrorCategory::config, msg);
    }
    validate(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCategory::config, "cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Every field with defaults materialised, one per line, sorted by key.
inline std::string resolved_config_text(const ExperimentConfig& c) {
    std::string out;
    for (const auto& [key, codec] : detail::fields()) out += key + " = " + codec.get(c) + "\n";
    return out;
}

} // namespace jscc
