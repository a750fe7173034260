#pragma once

#include <string>
#include <vector>

#include "facesketch/image.hpp"

namespace facesketch {

// Planar CHW activation tensor in double precision.
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c, int h, int w)
        : channels(c), height(h), width(w),
          v(static_cast<size_t>(c) * h * w, 0.0) {}

    double& at(int c, int y, int x) {
        return v[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return v[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

// Forward-pass record: every layer output, the tapped intermediate features,
// and the unit-norm global embedding.
struct EncoderActivations {
    Tensor input;
    std::vector<Tensor> layer_outputs;
    std::vector<int> tap_indices;       // indices into layer_outputs
    std::vector<double> raw_embedding;  // global average pool, pre-normalization
    std::vector<double> embedding;      // unit-norm

    const Tensor& tap(size_t i) const { return layer_outputs[tap_indices[i]]; }
    size_t tap_count() const { return tap_indices.size(); }
};

// Small sequential CNN loaded from the project's JSON interchange format
// (conv / relu / softplus / tanh / avgpool layers, global-average-pool
// embedding). Supports pulling loss gradients back to the input image, which
// is what the stroke optimizer needs.
class Encoder {
public:
    Encoder() = default;

    // Throws WeightsError when the file is missing or malformed.
    static Encoder load(const std::string& path);

    EncoderActivations forward(const RasterImage& image) const;

    // Vector-Jacobian product: cotangents arrive on the tapped feature maps
    // (same order and shapes as acts.tap_indices; empty tensors are treated
    // as zero) and on the unit-norm embedding (empty vector = zero), and are
    // pulled back to the input pixels.
    GradImage backward_to_input(const EncoderActivations& acts,
                                const std::vector<Tensor>& tap_cotangents,
                                const std::vector<double>& embedding_cotangent) const;

    // Tap layer ids; overridable via config.
    const std::vector<int>& taps() const { return taps_; }
    void set_taps(std::vector<int> taps);

    // Per-tap per-channel weights of the learned patch-similarity metric;
    // empty for encoders that do not carry them.
    const std::vector<std::vector<double>>& metric_weights() const { return metric_weights_; }

    int input_channels() const { return input_channels_; }
    int layer_count() const { return static_cast<int>(layers_.size()); }
    const std::string& source_path() const { return source_path_; }

private:
    enum class LayerType { conv, relu, softplus, tanh, avgpool };

    struct Layer {
        LayerType type = LayerType::relu;
        // conv
        int in_channels = 0, out_channels = 0, kernel = 0, stride = 1, padding = 0;
        std::vector<double> weight; // [oc][ic][ky][kx]
        std::vector<double> bias;   // [oc]
        // avgpool
        int pool = 2, pool_stride = 2;
    };

    Tensor apply(const Layer& layer, const Tensor& in) const;
    Tensor apply_backward(const Layer& layer, const Tensor& in, const Tensor& grad_out) const;

    std::vector<Layer> layers_;
    std::vector<int> taps_;
    std::vector<std::vector<double>> metric_weights_;
    int input_channels_ = 3;
    std::string source_path_;
};

} // namespace facesketch
