#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "facesketch/image.hpp"
#include "facesketch/keypoints.hpp"

namespace facesketch {

// Pretrained-model handles. The pipeline only runs inference; it never
// trains or fine-tunes these.
class FaceLandmarker {
public:
    virtual ~FaceLandmarker() = default;
    // 68 normalized landmark positions in the canonical ordering.
    virtual std::vector<Vec2> landmarks68(const RasterImage& image) = 0;
    virtual std::string name() const = 0;
};

class FaceParser {
public:
    virtual ~FaceParser() = default;
    virtual MaskImage parse(const RasterImage& image) = 0;
    virtual std::string name() const = 0;
};

// Backends:
//   "builtin" — procedural palette classifier + geometric landmark layout;
//               needs no weight files, used by CI and the bundled test face.
//   "onnx"    — OpenCV-DNN inference from <weights_dir>/landmarks.onnx and
//               <weights_dir>/face_parsing.onnx.
std::unique_ptr<FaceLandmarker> make_landmarker(const std::string& backend,
                                                const std::string& weights_dir);
std::unique_ptr<FaceParser> make_parser(const std::string& backend,
                                        const std::string& weights_dir);

// Landmark pool densified along the semantic polylines to >= min_pool points.
KeypointPool detect_landmarks(const RasterImage& image, FaceLandmarker& landmarker,
                              size_t min_pool = 256);

MaskImage parse_face(const RasterImage& image, FaceParser& parser);

// Flat-color palette shared by the builtin classifier and the synthetic test
// face generator. Colors are 8-bit sRGB.
struct PaletteEntry {
    FaceAttribute attr;
    std::array<int, 3> rgb;
};
const std::vector<PaletteEntry>& builtin_palette();

} // namespace facesketch
