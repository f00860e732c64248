// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmssl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "mmssl/mmft.hpp"

namespace mmssl {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'M', 'C', 'K'};
constexpr std::uint32_t kMaxHeader = 1u << 26;
constexpr std::uint32_t kMaxName = 4096;

const std::string kClassifierWeight = "classifier.layer0.weight";

}  // namespace

HeadsConfig Checkpoint::heads_config() const {
    if (!config.contains("heads")) throw CheckpointError("checkpoint: missing field 'config.heads'");
    try {
        return config.at("heads").get<HeadsConfig>();
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint: malformed 'config.heads': ") + e.what());
    }
}

ModelBundle Checkpoint::model() const {
    ModelBundle bundle(heads_config(), method, 0);
    const auto it = tensors.find(kClassifierWeight);
    if (it != tensors.end() && it->second.rank() == 2) {
        bundle.attach_classifier(it->second.rows(), it->second.cols(), 0);
    }
    bundle.import_tensors(tensors);
    return bundle;
}

void store_model(Checkpoint& ckpt, const ModelBundle& model) {
    for (auto& [name, tensor] : model.export_tensors()) ckpt.tensors[name] = tensor;
    json heads;
    to_json(heads, model.config());
    ckpt.config["heads"] = heads;
    ckpt.method = model.method();
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::ostringstream os(std::ios::binary);
    os.write(kMagic, 4);
    mmft::write_u32(os, ckpt.version);
    json header = {{"method", std::string(to_string(ckpt.method))}, {"config", ckpt.config}, {"state", ckpt.state}};
    const std::string text = header.dump();
    mmft::write_u32(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    mmft::write_u32(os, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, tensor] : ckpt.tensors) {
        mmft::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        mmft::write_tensor(os, tensor);
    }
    return os.str();
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& context) {
    std::istringstream is(bytes, std::ios::binary);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError(context + ": not a checkpoint (bad magic)");
    Checkpoint ckpt;
    try {
        ckpt.version = mmft::read_u32(is, context);
    } catch (const DataError& e) {
        throw CheckpointError(e.what());
    }
    if (ckpt.version != kCheckpointVersion) {
        throw VersionError(context + ": unsupported checkpoint version " + std::to_string(ckpt.version) +
                           " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    try {
        const std::uint32_t header_len = mmft::read_u32(is, context);
        if (header_len > kMaxHeader) throw CheckpointError(context + ": implausible header length");
        std::string text(header_len, '\0');
        is.read(text.data(), header_len);
        if (!is) throw CheckpointError(context + ": truncated header");
        json header;
        try {
            header = json::parse(text);
        } catch (const json::parse_error& e) {
            throw CheckpointError(context + ": malformed header: " + e.what());
        }
        if (!header.is_object() || !header.contains("method") || !header.at("method").is_string()) {
            throw CheckpointError(context + ": missing field 'method'");
        }
        const auto method = parse_method(header.at("method").get<std::string>());
        if (!method) throw CheckpointError(context + ": unknown method '" + header.at("method").get<std::string>() + "'");
        ckpt.method = *method;
        ckpt.config = header.value("config", json::object());
        ckpt.state = header.value("state", json::object());

        const std::uint32_t count = mmft::read_u32(is, context);
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint32_t name_len = mmft::read_u32(is, context);
            if (name_len > kMaxName) throw CheckpointError(context + ": implausible tensor name length");
            std::string name(name_len, '\0');
            is.read(name.data(), name_len);
            if (!is) throw CheckpointError(context + ": truncated tensor name");
            ckpt.tensors[name] = mmft::read_tensor(is, context + ": tensor '" + name + "'");
        }
    } catch (const CheckpointError&) {
        throw;
    } catch (const DataError& e) {
        throw CheckpointError(std::string("corrupt tensor entry: ") + e.what());
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    const std::string bytes = serialize_checkpoint(ckpt);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingFileError("missing checkpoint: " + path.string());
    std::ostringstream buffer;
    buffer << is.rdbuf();
    return deserialize_checkpoint(buffer.str(), path.string());
}

}  // namespace mmssl
