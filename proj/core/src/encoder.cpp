#include "facesketch/encoder.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "facesketch/errors.hpp"

namespace facesketch {

namespace {

int conv_out_extent(int in, int kernel, int stride, int padding) {
    return (in + 2 * padding - kernel) / stride + 1;
}

double stable_softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return 0.0;
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        const double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

} // namespace

Encoder Encoder::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw WeightsError("weights not found: " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw WeightsError("malformed encoder file " + path + ": " + e.what());
    }

    Encoder enc;
    enc.source_path_ = path;
    try {
        if (j.value("format", "") != "facesketch-encoder") {
            throw WeightsError("unrecognized encoder format in " + path);
        }
        enc.input_channels_ = j.value("input_channels", 3);
        for (const auto& node : j.at("layers")) {
            Layer layer;
            const std::string type = node.at("type").get<std::string>();
            if (type == "conv") {
                layer.type = LayerType::conv;
                layer.in_channels = node.at("in_channels").get<int>();
                layer.out_channels = node.at("out_channels").get<int>();
                layer.kernel = node.at("kernel").get<int>();
                layer.stride = node.value("stride", 1);
                layer.padding = node.value("padding", 0);
                layer.weight = node.at("weight").get<std::vector<double>>();
                layer.bias = node.at("bias").get<std::vector<double>>();
                const size_t expect = static_cast<size_t>(layer.out_channels) *
                                      layer.in_channels * layer.kernel * layer.kernel;
                if (layer.weight.size() != expect ||
                    layer.bias.size() != static_cast<size_t>(layer.out_channels)) {
                    throw WeightsError("conv weight shape mismatch in " + path);
                }
            } else if (type == "relu") {
                layer.type = LayerType::relu;
            } else if (type == "softplus") {
                layer.type = LayerType::softplus;
            } else if (type == "tanh") {
                layer.type = LayerType::tanh;
            } else if (type == "avgpool") {
                layer.type = LayerType::avgpool;
                layer.pool = node.value("kernel", 2);
                layer.pool_stride = node.value("stride", layer.pool);
            } else {
                throw WeightsError("unknown layer type '" + type + "' in " + path);
            }
            enc.layers_.push_back(std::move(layer));
        }
        enc.taps_ = j.value("taps", std::vector<int>{});
        for (int t : enc.taps_) {
            if (t < 0 || t >= static_cast<int>(enc.layers_.size())) {
                throw WeightsError("tap index out of range in " + path);
            }
        }
        if (j.contains("metric_weights")) {
            enc.metric_weights_ =
                j.at("metric_weights").get<std::vector<std::vector<double>>>();
            if (enc.metric_weights_.size() != enc.taps_.size()) {
                throw WeightsError("metric_weights/taps length mismatch in " + path);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw WeightsError("malformed encoder file " + path + ": " + e.what());
    }
    return enc;
}

void Encoder::set_taps(std::vector<int> taps) {
    for (int t : taps) {
        if (t < 0 || t >= static_cast<int>(layers_.size())) {
            throw ValidationError("tap layer id " + std::to_string(t) +
                                  " out of range for encoder with " +
                                  std::to_string(layers_.size()) + " layers");
        }
    }
    taps_ = std::move(taps);
}

Tensor Encoder::apply(const Layer& layer, const Tensor& in) const {
    switch (layer.type) {
        case LayerType::conv: {
            const int oh = conv_out_extent(in.height, layer.kernel, layer.stride, layer.padding);
            const int ow = conv_out_extent(in.width, layer.kernel, layer.stride, layer.padding);
            Tensor out(layer.out_channels, oh, ow);
            const int K = layer.kernel;
            for (int oc = 0; oc < layer.out_channels; ++oc) {
                const double* w_oc =
                    layer.weight.data() + static_cast<size_t>(oc) * layer.in_channels * K * K;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        double acc = layer.bias[oc];
                        for (int ic = 0; ic < layer.in_channels; ++ic) {
                            const double* w_ic = w_oc + static_cast<size_t>(ic) * K * K;
                            for (int ky = 0; ky < K; ++ky) {
                                const int iy = oy * layer.stride - layer.padding + ky;
                                if (iy < 0 || iy >= in.height) continue;
                                for (int kx = 0; kx < K; ++kx) {
                                    const int ix = ox * layer.stride - layer.padding + kx;
                                    if (ix < 0 || ix >= in.width) continue;
                                    acc += w_ic[ky * K + kx] * in.at(ic, iy, ix);
                                }
                            }
                        }
                        out.at(oc, oy, ox) = acc;
                    }
                }
            }
            return out;
        }
        case LayerType::relu: {
            Tensor out = in;
            for (double& v : out.v) v = v > 0.0 ? v : 0.0;
            return out;
        }
        case LayerType::softplus: {
            Tensor out = in;
            for (double& v : out.v) v = stable_softplus(v);
            return out;
        }
        case LayerType::tanh: {
            Tensor out = in;
            for (double& v : out.v) v = std::tanh(v);
            return out;
        }
        case LayerType::avgpool: {
            const int oh = (in.height - layer.pool) / layer.pool_stride + 1;
            const int ow = (in.width - layer.pool) / layer.pool_stride + 1;
            Tensor out(in.channels, oh, ow);
            const double inv = 1.0 / (layer.pool * layer.pool);
            for (int c = 0; c < in.channels; ++c) {
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        double acc = 0.0;
                        for (int ky = 0; ky < layer.pool; ++ky) {
                            for (int kx = 0; kx < layer.pool; ++kx) {
                                acc += in.at(c, oy * layer.pool_stride + ky,
                                             ox * layer.pool_stride + kx);
                            }
                        }
                        out.at(c, oy, ox) = acc * inv;
                    }
                }
            }
            return out;
        }
    }
    return {};
}

Tensor Encoder::apply_backward(const Layer& layer, const Tensor& in,
                               const Tensor& grad_out) const {
    switch (layer.type) {
        case LayerType::conv: {
            Tensor grad_in(in.channels, in.height, in.width);
            const int K = layer.kernel;
            for (int oc = 0; oc < layer.out_channels; ++oc) {
                const double* w_oc =
                    layer.weight.data() + static_cast<size_t>(oc) * layer.in_channels * K * K;
                for (int oy = 0; oy < grad_out.height; ++oy) {
                    for (int ox = 0; ox < grad_out.width; ++ox) {
                        const double g = grad_out.at(oc, oy, ox);
                        if (g == 0.0) continue;
                        for (int ic = 0; ic < layer.in_channels; ++ic) {
                            const double* w_ic = w_oc + static_cast<size_t>(ic) * K * K;
                            for (int ky = 0; ky < K; ++ky) {
                                const int iy = oy * layer.stride - layer.padding + ky;
                                if (iy < 0 || iy >= in.height) continue;
                                for (int kx = 0; kx < K; ++kx) {
                                    const int ix = ox * layer.stride - layer.padding + kx;
                                    if (ix < 0 || ix >= in.width) continue;
                                    grad_in.at(ic, iy, ix) += g * w_ic[ky * K + kx];
                                }
                            }
                        }
                    }
                }
            }
            return grad_in;
        }
        case LayerType::relu: {
            Tensor grad_in = grad_out;
            for (size_t i = 0; i < grad_in.v.size(); ++i) {
                if (in.v[i] <= 0.0) grad_in.v[i] = 0.0;
            }
            return grad_in;
        }
        case LayerType::softplus: {
            Tensor grad_in = grad_out;
            for (size_t i = 0; i < grad_in.v.size(); ++i) {
                grad_in.v[i] *= sigmoid(in.v[i]);
            }
            return grad_in;
        }
        case LayerType::tanh: {
            Tensor grad_in = grad_out;
            for (size_t i = 0; i < grad_in.v.size(); ++i) {
                const double t = std::tanh(in.v[i]);
                grad_in.v[i] *= 1.0 - t * t;
            }
            return grad_in;
        }
        case LayerType::avgpool: {
            Tensor grad_in(in.channels, in.height, in.width);
            const double inv = 1.0 / (layer.pool * layer.pool);
            for (int c = 0; c < in.channels; ++c) {
                for (int oy = 0; oy < grad_out.height; ++oy) {
                    for (int ox = 0; ox < grad_out.width; ++ox) {
                        const double g = grad_out.at(c, oy, ox) * inv;
                        for (int ky = 0; ky < layer.pool; ++ky) {
                            for (int kx = 0; kx < layer.pool; ++kx) {
                                grad_in.at(c, oy * layer.pool_stride + ky,
                                           ox * layer.pool_stride + kx) += g;
                            }
                        }
                    }
                }
            }
            return grad_in;
        }
    }
    return {};
}

EncoderActivations Encoder::forward(const RasterImage& image) const {
    if (image.channels != input_channels_) {
        throw ValidationError("encoder expects " + std::to_string(input_channels_) +
                              " input channels, got " + std::to_string(image.channels));
    }
    EncoderActivations acts;
    acts.input = Tensor(image.channels, image.height, image.width);
    std::copy(image.data.begin(), image.data.end(), acts.input.v.begin());
    acts.tap_indices = taps_;

    const Tensor* cur = &acts.input;
    acts.layer_outputs.reserve(layers_.size());
    for (const auto& layer : layers_) {
        acts.layer_outputs.push_back(apply(layer, *cur));
        cur = &acts.layer_outputs.back();
    }

    // Global average pool of the final output, then L2-normalize.
    const Tensor& last = acts.layer_outputs.empty() ? acts.input : acts.layer_outputs.back();
    acts.raw_embedding.assign(last.channels, 0.0);
    const double inv_hw = 1.0 / (static_cast<double>(last.height) * last.width);
    for (int c = 0; c < last.channels; ++c) {
        double acc = 0.0;
        const size_t base = static_cast<size_t>(c) * last.height * last.width;
        for (size_t i = 0; i < static_cast<size_t>(last.height) * last.width; ++i) {
            acc += last.v[base + i];
        }
        acts.raw_embedding[c] = acc * inv_hw;
    }
    double norm2 = 0.0;
    for (double v : acts.raw_embedding) norm2 += v * v;
    const double norm = std::sqrt(std::max(norm2, 1e-24));
    acts.embedding.resize(acts.raw_embedding.size());
    for (size_t i = 0; i < acts.embedding.size(); ++i) {
        acts.embedding[i] = acts.raw_embedding[i] / norm;
    }
    return acts;
}

GradImage Encoder::backward_to_input(const EncoderActivations& acts,
                                     const std::vector<Tensor>& tap_cotangents,
                                     const std::vector<double>& embedding_cotangent) const {
    if (!tap_cotangents.empty() && tap_cotangents.size() != acts.tap_indices.size()) {
        throw ValidationError("tap cotangent count mismatch");
    }

    // Running gradients per layer output.
    std::vector<Tensor> grads(acts.layer_outputs.size());

    // Embedding path: unit-norm VJP, then spread through the average pool.
    if (!embedding_cotangent.empty()) {
        const Tensor& last = acts.layer_outputs.back();
        double norm2 = 0.0;
        for (double v : acts.raw_embedding) norm2 += v * v;
        const double norm = std::sqrt(std::max(norm2, 1e-24));
        double dot = 0.0;
        for (size_t i = 0; i < embedding_cotangent.size(); ++i) {
            dot += embedding_cotangent[i] * acts.embedding[i];
        }
        std::vector<double> g_raw(acts.raw_embedding.size());
        for (size_t i = 0; i < g_raw.size(); ++i) {
            g_raw[i] = (embedding_cotangent[i] - acts.embedding[i] * dot) / norm;
        }
        Tensor& g_last = grads.back();
        if (g_last.v.empty()) g_last = Tensor(last.channels, last.height, last.width);
        const double inv_hw = 1.0 / (static_cast<double>(last.height) * last.width);
        for (int c = 0; c < last.channels; ++c) {
            const double g = g_raw[c] * inv_hw;
            const size_t base = static_cast<size_t>(c) * last.height * last.width;
            for (size_t i = 0; i < static_cast<size_t>(last.height) * last.width; ++i) {
                g_last.v[base + i] += g;
            }
        }
    }

    // Tap cotangents inject directly into their layer outputs.
    for (size_t t = 0; t < tap_cotangents.size(); ++t) {
        const Tensor& cot = tap_cotangents[t];
        if (cot.v.empty()) continue;
        const int idx = acts.tap_indices[t];
        const Tensor& out = acts.layer_outputs[idx];
        if (!cot.same_shape(out)) {
            throw ValidationError("tap cotangent shape mismatch at tap " + std::to_string(t));
        }
        Tensor& g = grads[idx];
        if (g.v.empty()) {
            g = cot;
        } else {
            for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += cot.v[i];
        }
    }

    // Reverse sweep.
    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
        Tensor& g_out = grads[l];
        if (g_out.v.empty()) continue;
        const Tensor& in = l == 0 ? acts.input : acts.layer_outputs[l - 1];
        Tensor g_in = apply_backward(layers_[l], in, g_out);
        if (l == 0) {
            GradImage out(acts.input.channels, acts.input.height, acts.input.width);
            out.data = std::move(g_in.v);
            return out;
        }
        Tensor& target = grads[l - 1];
        if (target.v.empty()) {
            target = std::move(g_in);
        } else {
            for (size_t i = 0; i < target.v.size(); ++i) target.v[i] += g_in.v[i];
        }
    }

    // No cotangents reached the input (e.g. all-zero request).
    return GradImage(acts.input.channels, acts.input.height, acts.input.width);
}

} // namespace facesketch
