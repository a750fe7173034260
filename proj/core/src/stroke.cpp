#include "facesketch/stroke.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "facesketch/errors.hpp"

namespace facesketch {

namespace {

void check_style_fields(const std::optional<double>& width,
                        const std::optional<std::array<double, 3>>& color,
                        const std::optional<double>& opacity) {
    if (width && *width <= 0.0) {
        throw ValidationError("style width must be positive");
    }
    if (color) {
        for (double c : *color) {
            if (c < 0.0 || c > 1.0) throw ValidationError("style color channels must be in [0,1]");
        }
    }
    if (opacity && (*opacity < 0.0 || *opacity > 1.0)) {
        throw ValidationError("style opacity must be in [0,1]");
    }
}

void apply_fields(StrokeStyle& s, const std::optional<double>& width,
                  const std::optional<std::array<double, 3>>& color,
                  const std::optional<double>& opacity) {
    if (width) s.width = *width;
    if (color) s.color = *color;
    if (opacity) s.opacity = *opacity;
}

} // namespace

SketchCanvas apply_style(const SketchCanvas& canvas, const StyleSpec& style) {
    check_style_fields(style.width, style.color, style.opacity);
    for (const auto& [idx, ov] : style.overrides) {
        if (idx >= canvas.strokes.size()) {
            throw ValidationError("style override index " + std::to_string(idx) +
                                  " out of range for " + std::to_string(canvas.strokes.size()) +
                                  " strokes");
        }
        check_style_fields(ov.width, ov.color, ov.opacity);
    }

    SketchCanvas out = canvas;
    for (auto& s : out.strokes) {
        apply_fields(s.style, style.width, style.color, style.opacity);
    }
    for (const auto& [idx, ov] : style.overrides) {
        apply_fields(out.strokes[idx].style, ov.width, ov.color, ov.opacity);
    }
    return out;
}

StyleSpec load_style_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open style file: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed style file " + path + ": " + e.what());
    }

    auto read_fields = [&](const nlohmann::json& node, std::optional<double>& width,
                           std::optional<std::array<double, 3>>& color,
                           std::optional<double>& opacity) {
        if (node.contains("width")) width = node.at("width").get<double>();
        if (node.contains("color")) {
            auto v = node.at("color").get<std::vector<double>>();
            if (v.size() != 3) throw ValidationError("style color must have 3 channels");
            color = std::array<double, 3>{v[0], v[1], v[2]};
        }
        if (node.contains("opacity")) opacity = node.at("opacity").get<double>();
    };

    StyleSpec spec;
    try {
        read_fields(j, spec.width, spec.color, spec.opacity);
        if (j.contains("overrides")) {
            for (const auto& [key, node] : j.at("overrides").items()) {
                StyleOverride ov;
                read_fields(node, ov.width, ov.color, ov.opacity);
                spec.overrides[std::stoul(key)] = ov;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed style file " + path + ": " + e.what());
    }
    return spec;
}

} // namespace facesketch
