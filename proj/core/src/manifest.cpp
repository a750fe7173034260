#include "facesketch/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "facesketch/errors.hpp"

namespace facesketch {

std::string sha256_bytes(const void* data, size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, len) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &digest_len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw NumericError("sha256 computation failed");
    }
    EVP_MD_CTX_free(ctx);
    std::string hex(digest_len * 2, '0');
    for (unsigned int i = 0; i < digest_len; ++i)
        std::snprintf(hex.data() + 2 * i, 3, "%02x", digest[i]);
    return hex;
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read file for hashing: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    return sha256_bytes(bytes.data(), bytes.size());
}

std::string manifest_to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["tool_version"] = m.tool_version;
    j["input"] = {{"path", m.input_path}, {"sha256", m.input_sha256}};
    j["resolution"] = m.resolution;
    j["abstraction"] = {
        {"n_face", m.n_face}, {"n_contour", m.n_contour}, {"seed", m.abstraction_seed}};
    j["optimization"] = {{"iterations_per_round", m.iterations_per_round},
                         {"step_size", m.step_size},
                         {"w_clip", m.w_clip},
                         {"w_vgg", m.w_vgg},
                         {"w_crop", m.w_crop},
                         {"round2_scope", m.round2_scope},
                         {"convergence_window", m.convergence_window},
                         {"convergence_tol", m.convergence_tol},
                         {"seed", m.opt_seed},
                         {"k", m.k},
                         {"n_aug", m.n_aug},
                         {"crop_on_raw", m.crop_on_raw}};
    j["backends"] = {{"models", m.model_backend}, {"rasterizer", m.raster_backend}};
    j["weights"] = {{"dir", m.weights_dir}, {"sha256", m.weight_hashes}};
    j["iterations_run"] = {{"round1", m.round1_iterations_run},
                           {"round2", m.round2_iterations_run}};
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid manifest JSON: ") + e.what());
    }
    try {
        RunManifest m;
        m.tool_version = j.value("tool_version", "");
        m.input_path = j.at("input").at("path").get<std::string>();
        m.input_sha256 = j.at("input").value("sha256", "");
        m.resolution = j.value("resolution", 224);
        const auto& a = j.at("abstraction");
        m.n_face = a.at("n_face").get<int>();
        m.n_contour = a.at("n_contour").get<int>();
        m.abstraction_seed = a.value("seed", 0ULL);
        const auto& o = j.at("optimization");
        m.iterations_per_round = o.at("iterations_per_round").get<int>();
        m.step_size = o.at("step_size").get<double>();
        m.w_clip = o.value("w_clip", 1.0);
        m.w_vgg = o.value("w_vgg", 1.0);
        m.w_crop = o.value("w_crop", 1.0);
        m.round2_scope = o.value("round2_scope", "contour_only");
        m.convergence_window = o.value("convergence_window", 100);
        m.convergence_tol = o.value("convergence_tol", 1e-3);
        m.opt_seed = o.value("seed", 0ULL);
        m.k = o.value("k", 16);
        m.n_aug = o.value("n_aug", 4);
        m.crop_on_raw = o.value("crop_on_raw", false);
        const auto& b = j.at("backends");
        m.model_backend = b.value("models", "builtin");
        m.raster_backend = b.value("rasterizer", "reference");
        const auto& w = j.at("weights");
        m.weights_dir = w.value("dir", "");
        if (w.contains("sha256"))
            m.weight_hashes = w.at("sha256").get<std::map<std::string, std::string>>();
        if (j.contains("iterations_run")) {
            m.round1_iterations_run = j["iterations_run"].value("round1", 0);
            m.round2_iterations_run = j["iterations_run"].value("round2", 0);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("manifest missing required field: ") + e.what());
    }
}

void save_manifest(const std::string& path, const RunManifest& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write manifest: " + path);
    out << manifest_to_json(m);
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read manifest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return manifest_from_json(buf.str());
}

} // namespace facesketch
