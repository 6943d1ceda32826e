#include "dms/error.hpp"
#include "dms/pipeline.hpp"
#include "dms/text.hpp"

namespace dms {

namespace {

bool parse_bool(std::string_view v, std::string_view key) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError("'" + std::string(key) + "' expects a boolean, got '" + std::string(v) + "'");
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

} // namespace

void PipelineConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
    };
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must be in [0,1]");
    };
    positive(occlusion_alert_frames, "occlusion_alert_frames");
    positive(rgb_fail_switch_frames, "rgb_fail_switch_frames");
    positive(rgb_recover_frames, "rgb_recover_frames");
    positive(id_period_frames, "id_period_frames");
    positive(acquisition.max_estimated_frames, "max_estimated_frames");
    positive(acquisition.clahe.tiles_x, "clahe_tiles_x");
    positive(acquisition.clahe.tiles_y, "clahe_tiles_y");
    unit(acquisition.conf_threshold, "conf_threshold");
    unit(occlusion_threshold, "occlusion_threshold");
    if (!(acquisition.estimated_bb_expand >= 0.0)) throw ConfigError("estimated_bb_expand must be >= 0");
    if (!(acquisition.clahe.clip_limit >= 1.0)) throw ConfigError("clahe_clip_limit must be >= 1");
    if (!(match.rgb >= -1.0 && match.rgb <= 1.0)) throw ConfigError("rgb_threshold must be in [-1,1]");
    if (!(match.ir >= -1.0 && match.ir <= 1.0)) throw ConfigError("ir_threshold must be in [-1,1]");
    if (gaze_preprocess) {
        positive(gaze_resize, "gaze_resize");
        positive(gaze_crop, "gaze_crop");
        if (gaze_crop > gaze_resize) throw ConfigError("gaze_crop must not exceed gaze_resize");
    }
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
    auto as_int = [&] {
        try {
            return static_cast<int>(text::parse_int(value, key));
        } catch (const ParseError& e) {
            throw ConfigError(e.what());
        }
    };
    auto as_double = [&] {
        try {
            return text::parse_double(value, key);
        } catch (const ParseError& e) {
            throw ConfigError(e.what());
        }
    };
    if (key == "occlusion_alert_frames") occlusion_alert_frames = as_int();
    else if (key == "rgb_fail_switch_frames") rgb_fail_switch_frames = as_int();
    else if (key == "rgb_recover_frames") rgb_recover_frames = as_int();
    else if (key == "id_period_frames") id_period_frames = as_int();
    else if (key == "conf_threshold") acquisition.conf_threshold = as_double();
    else if (key == "estimated_bb_enabled") acquisition.estimated_bb_enabled = parse_bool(value, key);
    else if (key == "max_estimated_frames") acquisition.max_estimated_frames = as_int();
    else if (key == "estimated_bb_expand") acquisition.estimated_bb_expand = as_double();
    else if (key == "clahe_tiles_x") acquisition.clahe.tiles_x = as_int();
    else if (key == "clahe_tiles_y") acquisition.clahe.tiles_y = as_int();
    else if (key == "clahe_clip_limit") acquisition.clahe.clip_limit = as_double();
    else if (key == "occlusion_threshold") occlusion_threshold = as_double();
    else if (key == "rgb_threshold") match.rgb = as_double();
    else if (key == "ir_threshold") match.ir = as_double();
    else if (key == "auto_register") auto_register = parse_bool(value, key);
    else if (key == "auto_register_prefix") auto_register_prefix = std::string(value);
    else if (key == "reinforce_on_match") reinforce_on_match = parse_bool(value, key);
    else if (key == "gaze_preprocess") gaze_preprocess = parse_bool(value, key);
    else if (key == "gaze_resize") gaze_resize = as_int();
    else if (key == "gaze_crop") gaze_crop = as_int();
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

PipelineConfig PipelineConfig::parse(std::string_view content) {
    PipelineConfig c;
    std::size_t ln = 0;
    for (auto line : text::lines(content)) {
        ++ln;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(ln) + ": expected key=value");
        }
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    return parse(text::read_file(path));
}

std::string PipelineConfig::serialize() const {
    auto b = [](bool v) { return v ? "true" : "false"; };
    std::string out;
    auto kv = [&](const char* k, const std::string& v) { out += std::string(k) + "=" + v + "\n"; };
    kv("occlusion_alert_frames", std::to_string(occlusion_alert_frames));
    kv("rgb_fail_switch_frames", std::to_string(rgb_fail_switch_frames));
    kv("rgb_recover_frames", std::to_string(rgb_recover_frames));
    kv("id_period_frames", std::to_string(id_period_frames));
    kv("conf_threshold", text::format_shortest(acquisition.conf_threshold));
    kv("estimated_bb_enabled", b(acquisition.estimated_bb_enabled));
    kv("max_estimated_frames", std::to_string(acquisition.max_estimated_frames));
    kv("estimated_bb_expand", text::format_shortest(acquisition.estimated_bb_expand));
    kv("clahe_tiles_x", std::to_string(acquisition.clahe.tiles_x));
    kv("clahe_tiles_y", std::to_string(acquisition.clahe.tiles_y));
    kv("clahe_clip_limit", text::format_shortest(acquisition.clahe.clip_limit));
    kv("occlusion_threshold", text::format_shortest(occlusion_threshold));
    kv("rgb_threshold", text::format_shortest(match.rgb));
    kv("ir_threshold", text::format_shortest(match.ir));
    kv("auto_register", b(auto_register));
    kv("auto_register_prefix", auto_register_prefix);
    kv("reinforce_on_match", b(reinforce_on_match));
    kv("gaze_preprocess", b(gaze_preprocess));
    kv("gaze_resize", std::to_string(gaze_resize));
    kv("gaze_crop", std::to_string(gaze_crop));
    return out;
}

} // namespace dms
