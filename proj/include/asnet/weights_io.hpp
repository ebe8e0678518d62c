#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "asnet/model.hpp"

// Weight persistence: a JSON manifest naming every tensor with its shape and
// byte offset, next to a little-endian 64-bit-float blob. The loader checks
// every shape against the config and rejects mismatches.

namespace asnet {

namespace detail {

inline void append_f64_le(std::string& out, double value) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double read_f64_le(const std::string& blob, std::size_t offset) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[offset + i]))
                << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void save_weights(const ModelWeights& weights, const std::string& manifest_path,
                         const std::string& blob_path) {
    nlohmann::json tensors = nlohmann::json::array();
    std::string blob;
    for_each_tensor(weights, [&](const std::string& name, const Matrix& m, TensorKind) {
        tensors.push_back({{"name", name},
                           {"rows", m.rows},
                           {"cols", m.cols},
                           {"offset", blob.size()}});
        for (double v : m.data) detail::append_f64_le(blob, v);
    });
    nlohmann::json manifest = {
        {"format", "asnet-weights-v1"},
        {"dtype", "f64le"},
        {"blob", std::filesystem::path(blob_path).filename().string()},
        {"tensors", tensors},
    };
    std::ofstream mf(manifest_path, std::ios::binary);
    if (!mf) throw std::runtime_error("save_weights: cannot open " + manifest_path);
    mf << manifest.dump(2) << "\n";
    std::ofstream bf(blob_path, std::ios::binary);
    if (!bf) throw std::runtime_error("save_weights: cannot open " + blob_path);
    bf.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

inline ModelWeights load_weights(const ModelConfig& cfg, std::size_t input_channels,
                                 const std::string& manifest_path,
                                 const std::string& blob_path) {
    std::ifstream mf(manifest_path, std::ios::binary);
    if (!mf) throw std::runtime_error("load_weights: cannot open " + manifest_path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mf);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_weights: " + manifest_path + ": " + e.what());
    }
    if (manifest.value("dtype", "") != "f64le")
        throw std::runtime_error("load_weights: unsupported dtype in " + manifest_path);

    struct Entry {
        std::size_t rows, cols, offset;
    };
    std::map<std::string, Entry> entries;
    for (const auto& t : manifest.at("tensors"))
        entries[t.at("name").get<std::string>()] = {t.at("rows").get<std::size_t>(),
                                                    t.at("cols").get<std::size_t>(),
                                                    t.at("offset").get<std::size_t>()};

    std::ifstream bf(blob_path, std::ios::binary);
    if (!bf) throw std::runtime_error("load_weights: cannot open " + blob_path);
    std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());

    ModelWeights weights = make_weights(cfg, input_channels);
    std::size_t used = 0;
    for_each_tensor(weights, [&](const std::string& name, Matrix& m, TensorKind) {
        const auto it = entries.find(name);
        if (it == entries.end())
            throw std::runtime_error("load_weights: manifest is missing tensor " + name);
        const Entry& e = it->second;
        if (e.rows != m.rows || e.cols != m.cols)
            throw std::runtime_error("load_weights: tensor " + name + " has shape " +
                                     std::to_string(e.rows) + "x" + std::to_string(e.cols) +
                                     ", config expects " + shape_str(m));
        if (e.offset + m.data.size() * 8 > blob.size())
            throw std::runtime_error("load_weights: tensor " + name + " overruns the blob");
        for (std::size_t i = 0; i < m.data.size(); ++i)
            m.data[i] = detail::read_f64_le(blob, e.offset + 8 * i);
        ++used;
    });
    if (used != entries.size())
        throw std::runtime_error("load_weights: manifest lists " +
                                 std::to_string(entries.size()) + " tensors, config expects " +
                                 std::to_string(used));
    return weights;
}

}  // namespace asnet
