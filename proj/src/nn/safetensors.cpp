#include "sia/nn/safetensors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sia/errors.hpp"

namespace sia::nn {

using nlohmann::json;

void save_safetensors(const std::map<std::string, NamedTensor>& tensors,
                      const std::filesystem::path& file) {
    // Build the header by hand so the byte layout is fully deterministic:
    // keys sorted (std::map order), no whitespace.
    std::ostringstream header;
    header << "{";
    std::uint64_t offset = 0;
    bool first = true;
    for (const auto& [name, t] : tensors) {
        std::uint64_t bytes = static_cast<std::uint64_t>(t.data.size()) * sizeof(float);
        if (!first) header << ",";
        first = false;
        header << json(name).dump() << ":{\"dtype\":\"F32\",\"shape\":[";
        for (std::size_t i = 0; i < t.shape.size(); ++i) {
            if (i) header << ",";
            header << t.shape[i];
        }
        header << "],\"data_offsets\":[" << offset << "," << (offset + bytes) << "]}";
        offset += bytes;
    }
    header << "}";
    const std::string h = header.str();

    std::ofstream out(file, std::ios::binary);
    if (!out) throw ValidationError("cannot write tensor file: " + file.string());
    std::uint64_t hlen = h.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto& [name, t] : tensors) {
        (void)name;
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw ValidationError("write failed: " + file.string());
}

std::map<std::string, NamedTensor> load_safetensors(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ValidationError("cannot open tensor file: " + file.string());
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    if (!in || hlen == 0 || hlen > (1ull << 30))
        throw ValidationError("corrupt tensor file header: " + file.string());
    std::string h(hlen, '\0');
    in.read(h.data(), static_cast<std::streamsize>(hlen));
    json header;
    try {
        header = json::parse(h);
    } catch (const json::exception& e) {
        throw ValidationError("corrupt tensor file header: " + file.string() + ": " + e.what());
    }

    std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    std::map<std::string, NamedTensor> out;
    for (const auto& [name, meta] : header.items()) {
        if (name == "__metadata__") continue;
        if (meta.at("dtype").get<std::string>() != "F32")
            throw ValidationError("tensor " + name + ": only F32 is supported");
        NamedTensor t;
        std::size_t count = 1;
        for (const auto& d : meta.at("shape")) {
            t.shape.push_back(d.get<int>());
            count *= d.get<std::size_t>();
        }
        const auto offs = meta.at("data_offsets");
        std::uint64_t b = offs.at(0).get<std::uint64_t>();
        std::uint64_t e = offs.at(1).get<std::uint64_t>();
        if (e < b || e > payload.size() || e - b != count * sizeof(float))
            throw ValidationError("tensor " + name + ": bad data offsets");
        t.data.resize(count);
        std::memcpy(t.data.data(), payload.data() + b, e - b);
        out[name] = std::move(t);
    }
    return out;
}

}  // namespace sia::nn
