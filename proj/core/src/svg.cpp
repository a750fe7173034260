#include "facesketch/svg.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "facesketch/errors.hpp"

namespace facesketch {

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string color_hex(const std::array<double, 3>& c) {
    char buf[8];
    auto q = [](double v) {
        int x = static_cast<int>(std::lround(v * 255.0));
        return std::clamp(x, 0, 255);
    };
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", q(c[0]), q(c[1]), q(c[2]));
    return buf;
}

// Pulls attr="value" out of a tag body; empty string when absent.
std::string attr_value(const std::string& tag, const std::string& name) {
    size_t pos = 0;
    const std::string needle = name + "=\"";
    while ((pos = tag.find(needle, pos)) != std::string::npos) {
        // Reject matches that are a suffix of a longer attribute name.
        if (pos > 0 && (std::isalnum(static_cast<unsigned char>(tag[pos - 1])) ||
                        tag[pos - 1] == '-' || tag[pos - 1] == '_')) {
            pos += needle.size();
            continue;
        }
        const size_t start = pos + needle.size();
        const size_t end = tag.find('"', start);
        if (end == std::string::npos) return {};
        return tag.substr(start, end - start);
    }
    return {};
}

struct NumberScanner {
    const std::string& s;
    size_t pos = 0;

    void skip_separators() {
        while (pos < s.size() &&
               (std::isspace(static_cast<unsigned char>(s[pos])) || s[pos] == ',')) {
            ++pos;
        }
    }

    bool next(double* out) {
        skip_separators();
        if (pos >= s.size()) return false;
        char* end = nullptr;
        const double v = std::strtod(s.c_str() + pos, &end);
        if (end == s.c_str() + pos) return false;
        pos = static_cast<size_t>(end - s.c_str());
        *out = v;
        return true;
    }

    // Next non-separator char without consuming it; '\0' at end.
    char peek() {
        skip_separators();
        return pos < s.size() ? s[pos] : '\0';
    }
};

double parse_positive(const std::string& text, const char* what, size_t path_index) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || !std::isfinite(v) || v <= 0.0) {
        throw ValidationError(std::string("invalid ") + what + " in path " +
                              std::to_string(path_index));
    }
    return v;
}

} // namespace

std::string render_svg(const SketchCanvas& canvas) {
    if (canvas.empty()) {
        throw ValidationError("empty sketch");
    }
    const double sx = static_cast<double>(canvas.width_px);
    const double sy = static_cast<double>(canvas.height_px);
    const double wscale = static_cast<double>(std::min(canvas.width_px, canvas.height_px));

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << canvas.width_px << "\" height=\"" << canvas.height_px << "\" viewBox=\"0 0 "
        << canvas.width_px << " " << canvas.height_px << "\">\n";
    for (const auto& s : canvas.strokes) {
        const auto& p = s.points;
        out << "<path class=\"" << round_tag_name(s.tag) << "\" d=\"M "
            << fmt6(p[0].x * sx) << " " << fmt6(p[0].y * sy) << " C "
            << fmt6(p[1].x * sx) << " " << fmt6(p[1].y * sy) << ", "
            << fmt6(p[2].x * sx) << " " << fmt6(p[2].y * sy) << ", "
            << fmt6(p[3].x * sx) << " " << fmt6(p[3].y * sy) << "\" fill=\"none\" stroke=\""
            << color_hex(s.style.color) << "\" stroke-width=\"" << fmt6(s.style.width * wscale)
            << "\" stroke-opacity=\"" << fmt6(s.style.opacity)
            << "\" stroke-linecap=\"round\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

SketchCanvas parse_svg(const std::string& doc) {
    SketchCanvas canvas;

    // Canvas dimensions from the <svg> tag; default resolution when absent.
    const size_t svg_open = doc.find("<svg");
    if (svg_open != std::string::npos) {
        const size_t svg_end = doc.find('>', svg_open);
        const std::string tag = doc.substr(svg_open, svg_end == std::string::npos
                                                         ? std::string::npos
                                                         : svg_end - svg_open + 1);
        const std::string w = attr_value(tag, "width");
        const std::string h = attr_value(tag, "height");
        if (!w.empty()) canvas.width_px = static_cast<int>(parse_positive(w, "width", 0));
        if (!h.empty()) canvas.height_px = static_cast<int>(parse_positive(h, "height", 0));
    }

    const double sx = static_cast<double>(canvas.width_px);
    const double sy = static_cast<double>(canvas.height_px);
    const double wscale = static_cast<double>(std::min(canvas.width_px, canvas.height_px));

    size_t pos = 0;
    size_t path_index = 0;
    while ((pos = doc.find("<path", pos)) != std::string::npos) {
        const size_t end = doc.find('>', pos);
        if (end == std::string::npos) {
            throw ValidationError("unterminated path element " + std::to_string(path_index));
        }
        const std::string tag = doc.substr(pos, end - pos + 1);
        pos = end + 1;

        const std::string d = attr_value(tag, "d");
        if (d.empty()) {
            throw ValidationError("path " + std::to_string(path_index) +
                                  " has no d attribute");
        }

        NumberScanner scan{d};
        if (scan.peek() != 'M') {
            throw ValidationError("unsupported path command '" +
                                  std::string(1, scan.peek()) + "' in path " +
                                  std::to_string(path_index));
        }
        ++scan.pos;
        std::array<Vec2, 4> pts;
        double x = 0.0, y = 0.0;
        if (!scan.next(&x) || !scan.next(&y)) {
            throw ValidationError("malformed M command in path " + std::to_string(path_index));
        }
        pts[0] = {x / sx, y / sy};
        if (scan.peek() != 'C') {
            throw ValidationError("unsupported path command '" +
                                  std::string(1, scan.peek()) + "' in path " +
                                  std::to_string(path_index));
        }
        ++scan.pos;
        for (int i = 1; i < 4; ++i) {
            if (!scan.next(&x) || !scan.next(&y)) {
                throw ValidationError("malformed C command in path " +
                                      std::to_string(path_index));
            }
            pts[i] = {x / sx, y / sy};
        }
        const char trailing = scan.peek();
        if (trailing != '\0') {
            throw ValidationError("unsupported path command '" + std::string(1, trailing) +
                                  "' in path " + std::to_string(path_index));
        }

        Stroke stroke;
        for (int i = 0; i < 4; ++i) stroke.set_point(i, pts[i]);
        const std::string cls = attr_value(tag, "class");
        stroke.tag = (cls == "contour") ? RoundTag::contour : RoundTag::face;

        const std::string sw = attr_value(tag, "stroke-width");
        if (!sw.empty()) {
            stroke.style.width = parse_positive(sw, "stroke-width", path_index) / wscale;
        }
        const std::string so = attr_value(tag, "stroke-opacity");
        if (!so.empty()) {
            stroke.style.opacity = std::clamp(std::strtod(so.c_str(), nullptr), 0.0, 1.0);
        }
        const std::string sc = attr_value(tag, "stroke");
        if (sc.size() == 7 && sc[0] == '#') {
            for (int c = 0; c < 3; ++c) {
                const int v = std::stoi(sc.substr(1 + 2 * c, 2), nullptr, 16);
                stroke.style.color[c] = static_cast<double>(v) / 255.0;
            }
        }
        canvas.strokes.push_back(stroke);
        ++path_index;
    }

    if (canvas.strokes.empty()) {
        throw ValidationError("empty sketch");
    }
    return canvas;
}

} // namespace facesketch
