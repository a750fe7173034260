#pragma once

#include <string>

#include "facesketch/stroke.hpp"

namespace facesketch {

// Serializes the canvas to an SVG 1.1 document: one <path> per stroke, a
// single "M x0 y0 C x1 y1, x2 y2, x3 y3" command with coordinates
// denormalized to pixels and fixed 6-decimal formatting. Byte-deterministic
// for equal input. Throws ValidationError("empty sketch") on an empty canvas.
std::string render_svg(const SketchCanvas& canvas);

// Inverse of render_svg for documents in its subset (M/C path commands only).
// Geometry is recovered within 1e-6 normalized units. Throws ValidationError
// naming the offending path index on unsupported commands, and
// ValidationError("empty sketch") when the document contains no paths.
SketchCanvas parse_svg(const std::string& doc);

} // namespace facesketch
