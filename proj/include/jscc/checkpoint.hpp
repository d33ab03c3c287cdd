#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jscc/config.hpp"
#include "jscc/error.hpp"
#include "jscc/training.hpp"

namespace jscc {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "jscc-checkpoint";

/// A restored model together with its run configuration and optimizer.
template <class T>
struct Checkpoint {
    ExperimentConfig config;
    std::unique_ptr<JsccModel<T>> model;
    OptimizerState<T> optimizer;
};

namespace detail {

template <class V>
nlohmann::json to_json_array(const V& values) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& v : values) a.push_back(static_cast<double>(v));
    return a;
}

template <class T>
void from_json_array(const nlohmann::json& a, std::vector<T>& out, const std::string& what) {
    if (!a.is_array()) throw Error(ErrorCategory::checkpoint, "checkpoint field '" + what + "' is not an array");
    out.clear();
    out.reserve(a.size());
    for (const auto& v : a) out.push_back(static_cast<T>(v.template get<double>()));
}

} // namespace detail

template <class T>
nlohmann::json checkpoint_json(JsccModel<T>& model, const OptimizerState<T>& opt, const ExperimentConfig& cfg) {
    using nlohmann::json;
    json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;

    json conf = json::object();
    std::istringstream lines(resolved_config_text(cfg));
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) conf[line.substr(0, eq)] = line.substr(eq + 3);
    }
    j["config"] = conf;

    const auto& cc = model.codec_config();
    j["codec"] = {{"c_out", cc.c_out},
                  {"base_width", cc.base_width},
                  {"downsample_factor", cc.downsample_factor},
                  {"attention_units", cc.attention_units},
                  {"pixel_peak", cc.pixel_peak}};

    json q;
    q["kind"] = quantizer_name(model.kind());
    q["order"] = model.order();
    q["power_budget"] = model.power_budget();
    if (model.quantized()) {
        json pts = json::array();
        for (const auto& p : model.quantizer().constellation.points()) pts.push_back({p.real(), p.imag()});
        q["points"] = pts;
    } else {
        q["points"] = nullptr;
    }
    j["quantizer"] = q;

    const auto& s = model.schedule();
    j["anneal"] = {{"step", model.anneal().step},
                   {"sigma_q", model.anneal().sigma_q},
                   {"initial", s.initial},
                   {"increment", s.increment},
                   {"cap", s.cap},
                   {"period", s.period}};

    json params = json::array();
    for (auto* p : model.parameters()) {
        params.push_back({{"name", p->name},
                          {"shape", {p->value.n(), p->value.c(), p->value.h(), p->value.w()}},
                          {"values", detail::to_json_array(p->value.values())}});
    }
    j["parameters"] = params;

    json moments = json::array();
    for (const auto& m : opt.params) moments.push_back({{"m", detail::to_json_array(m.m)}, {"v", detail::to_json_array(m.v)}});
    j["optimizer"] = {{"lr", opt.config.lr},
                      {"beta1", opt.config.beta1},
                      {"beta2", opt.config.beta2},
                      {"eps", opt.config.eps},
                      {"step", opt.step},
                      {"moments", moments},
                      {"points", {{"m", detail::to_json_array(opt.points.m)}, {"v", detail::to_json_array(opt.points.v)}}}};
    return j;
}

template <class T>
void save_checkpoint(const std::string& path, JsccModel<T>& model, const OptimizerState<T>& opt,
                     const ExperimentConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCategory::checkpoint, "cannot write checkpoint " + path);
    out << checkpoint_json(model, opt, cfg).dump() << '\n';
    require(static_cast<bool>(out), ErrorCategory::checkpoint, "write failed for checkpoint " + path);
}

template <class T>
Checkpoint<T> checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (!j.contains("version")) throw Error(ErrorCategory::checkpoint, "checkpoint has no version field");
        if (j.value("format", "") != kCheckpointFormat)
            throw Error(ErrorCategory::checkpoint, "not a jscc checkpoint");
        const int version = j.at("version").template get<int>();
        if (version != kCheckpointVersion)
            throw Error(ErrorCategory::checkpoint, "unsupported checkpoint version " + std::to_string(version));

        Checkpoint<T> ck;
        std::string conf_text;
        for (const auto& [k, v] : j.at("config").items()) conf_text += k + " = " + v.template get<std::string>() + "\n";
        ck.config = parse_config(conf_text);

        CodecConfig cc;
        const auto& jc = j.at("codec");
        cc.c_out = jc.at("c_out").template get<int>();
        cc.base_width = jc.at("base_width").template get<int>();
        cc.downsample_factor = jc.at("downsample_factor").template get<int>();
        cc.attention_units = jc.at("attention_units").template get<int>();
        cc.pixel_peak = jc.at("pixel_peak").template get<double>();

        const auto& jq = j.at("quantizer");
        const QuantizerKind kind = parse_quantizer(jq.at("kind").template get<std::string>());
        const auto order = jq.at("order").get<std::size_t>();
        const double power = jq.at("power_budget").template get<double>();

        AnnealSchedule sched;
        const auto& ja = j.at("anneal");
        sched.initial = ja.at("initial").template get<double>();
        sched.increment = ja.at("increment").template get<double>();
        sched.cap = ja.at("cap").template get<double>();
        sched.period = ja.at("period").template get<long>();

        ck.model = std::make_unique<JsccModel<T>>(cc, kind, order, power, sched, ck.config.train.seed);
        JsccModel<T>& m = *ck.model;
        m.set_anneal({ja.at("step").template get<long>(), ja.at("sigma_q").template get<double>()});
        if (m.quantized()) {
            std::vector<Complex> pts;
            for (const auto& p : jq.at("points")) pts.emplace_back(p.at(0).template get<double>(), p.at(1).template get<double>());
            m.quantizer().constellation.assign(pts);
        }

        auto params = m.parameters();
        const auto& jp = j.at("parameters");
        require(jp.size() == params.size(), ErrorCategory::checkpoint,
                "checkpoint has " + std::to_string(jp.size()) + " parameter tensors, model expects " +
                    std::to_string(params.size()));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& e = jp[i];
            require(e.at("name").template get<std::string>() == params[i]->name, ErrorCategory::checkpoint,
                    "parameter " + std::to_string(i) + " is '" + e.at("name").template get<std::string>() + "', expected '" +
                        params[i]->name + "'");
            std::vector<T> vals;
            detail::from_json_array(e.at("values"), vals, params[i]->name);
            require(vals.size() == params[i]->value.size(), ErrorCategory::checkpoint,
                    "parameter '" + params[i]->name + "' has the wrong size");
            std::copy(vals.begin(), vals.end(), params[i]->value.values().begin());
        }

        const auto& jo = j.at("optimizer");
        ck.optimizer.config = {jo.at("lr").template get<double>(), jo.at("beta1").template get<double>(), jo.at("beta2").template get<double>(),
                               jo.at("eps").template get<double>()};
        ck.optimizer.step = jo.at("step").template get<long>();
        for (const auto& mm : jo.at("moments")) {
            nn::AdamMoments<T> am;
            detail::from_json_array(mm.at("m"), am.m, "optimizer.m");
            detail::from_json_array(mm.at("v"), am.v, "optimizer.v");
            ck.optimizer.params.push_back(std::move(am));
        }
        ck.optimizer.params.resize(params.size());
        detail::from_json_array(jo.at("points").at("m"), ck.optimizer.points.m, "optimizer.points.m");
        detail::from_json_array(jo.at("points").at("v"), ck.optimizer.points.v, "optimizer.points.v");
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::checkpoint, std::string("malformed checkpoint: ") + e.what());
    } catch (const Error& e) {
        if (e.category() == ErrorCategory::checkpoint) throw;
        throw Error(ErrorCategory::checkpoint, std::string("invalid checkpoint: ") + e.what());
    }
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCategory::checkpoint, "cannot read checkpoint " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::checkpoint, "checkpoint " + path + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json<T>(j);
}

} // namespace jscc
