#include "sf/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sf/common.hpp"

namespace sf {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'S', 'F', 'C', 'K', 'P', 'T', '0', '1'};
}

bool LoadedCheckpoint::has_store(const std::string& store) const {
    const std::string prefix = store + "/";
    for (const auto& [name, t] : tensors)
        if (name.rfind(prefix, 0) == 0) return true;
    return false;
}

void LoadedCheckpoint::fill(const std::string& store, ParamStore& params) const {
    for (const auto& [name, leaf] : params.items()) {
        const auto it = tensors.find(store + "/" + name);
        require(it != tensors.end(), "checkpoint: missing tensor " + store + "/" + name);
        require(it->second.same_shape(leaf->value),
                "checkpoint: shape mismatch for " + store + "/" + name);
        leaf->value = it->second;
    }
}

void save_checkpoint(const std::string& path, const std::string& kind, const json& meta,
                     const std::vector<std::pair<std::string, const ParamStore*>>& stores,
                     const std::vector<std::pair<std::string, Tensor>>& extra) {
    json header;
    header["kind"] = kind;
    header["meta"] = meta;
    header["tensors"] = json::array();

    std::vector<const Tensor*> order;
    for (const auto& [store, ps] : stores)
        for (const auto& [name, leaf] : ps->items()) {
            header["tensors"].push_back(json{{"name", store + "/" + name},
                                             {"dims", {leaf->value.n, leaf->value.h, leaf->value.w,
                                                       leaf->value.c}}});
            order.push_back(&leaf->value);
        }
    for (const auto& [name, t] : extra) {
        header["tensors"].push_back(json{{"name", name}, {"dims", {t.n, t.h, t.w, t.c}}});
        order.push_back(&t);
    }

    const std::string head = header.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), "checkpoint: cannot write " + path);
    f.write(kMagic, 8);
    const std::uint64_t hlen = head.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const Tensor* t : order)
        f.write(reinterpret_cast<const char*>(t->data.data()),
                static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    require(f.good(), "checkpoint: write failed " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    require(f.good() && std::memcmp(magic, kMagic, 8) == 0, "checkpoint: bad magic in " + path);
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string head(hlen, '\0');
    f.read(head.data(), static_cast<std::streamsize>(hlen));
    require(f.good(), "checkpoint: truncated header in " + path);
    json header = json::parse(head);

    LoadedCheckpoint ck;
    ck.kind = header.at("kind").get<std::string>();
    ck.meta = header.at("meta");
    for (const auto& jt : header.at("tensors")) {
        const std::string name = jt.at("name").get<std::string>();
        const auto dims = jt.at("dims").get<std::vector<int>>();
        require(dims.size() == 4, "checkpoint: bad dims for " + name);
        Tensor t;
        t.n = dims[0]; t.h = dims[1]; t.w = dims[2]; t.c = dims[3];
        t.data.resize(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2] * dims[3]);
        f.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        require(f.good(), "checkpoint: truncated tensor " + name);
        ck.tensors.emplace(name, std::move(t));
    }
    return ck;
}

json scaffnet_config_to_json(const ScaffNetConfig& c) {
    return json{{"spp_kernels", c.spp.kernel_sizes}, {"spp_channels", c.spp.conv_channels},
                {"use_spp", c.use_spp},              {"encoder", c.encoder},
                {"decoder", c.decoder},              {"first_kernel", c.first_kernel},
                {"leaky_slope", c.leaky_slope},      {"d_floor", c.d_floor},
                {"head_bias", c.head_bias}};
}

ScaffNetConfig scaffnet_config_from_json(const json& j) {
    ScaffNetConfig c;
    c.spp.kernel_sizes = j.at("spp_kernels").get<std::vector<int>>();
    c.spp.conv_channels = j.at("spp_channels").get<int>();
    c.use_spp = j.at("use_spp").get<bool>();
    c.encoder = j.at("encoder").get<std::vector<int>>();
    c.decoder = j.at("decoder").get<std::vector<int>>();
    c.first_kernel = j.at("first_kernel").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.d_floor = j.at("d_floor").get<double>();
    c.head_bias = j.at("head_bias").get<double>();
    return c;
}

json fusionnet_config_to_json(const FusionNetConfig& c) {
    return json{{"image_channels", c.image_channels},
                {"depth_channels", c.depth_channels},
                {"decoder_deconv", c.decoder_deconv},
                {"decoder_conv", c.decoder_conv},
                {"first_kernel", c.first_kernel},
                {"leaky_slope", c.leaky_slope},
                {"head", c.head == FusionHead::AlphaBeta ? "alpha-beta" : "direct"},
                {"d_min", c.d_min},
                {"d_max", c.d_max},
                {"head_bias", c.head_bias}};
}

FusionNetConfig fusionnet_config_from_json(const json& j) {
    FusionNetConfig c;
    c.image_channels = j.at("image_channels").get<std::vector<int>>();
    c.depth_channels = j.at("depth_channels").get<std::vector<int>>();
    c.decoder_deconv = j.at("decoder_deconv").get<std::vector<int>>();
    c.decoder_conv = j.at("decoder_conv").get<std::vector<int>>();
    c.first_kernel = j.at("first_kernel").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.head = j.at("head").get<std::string>() == "direct" ? FusionHead::Direct : FusionHead::AlphaBeta;
    c.d_min = j.at("d_min").get<double>();
    c.d_max = j.at("d_max").get<double>();
    c.head_bias = j.at("head_bias").get<double>();
    return c;
}

ScaffNet scaffnet_from_checkpoint(const LoadedCheckpoint& ck) {
    require(ck.meta.contains("scaffnet_config"), "checkpoint: no scaffnet config");
    ScaffNet net(scaffnet_config_from_json(ck.meta.at("scaffnet_config")));
    ck.fill("scaffnet", net.params());
    return net;
}

FusionNet fusionnet_from_checkpoint(const LoadedCheckpoint& ck) {
    require(ck.kind == "fusionnet", "checkpoint: not a fusionnet checkpoint");
    require(ck.meta.contains("fusionnet_config"), "checkpoint: no fusionnet config");
    FusionNet net(fusionnet_config_from_json(ck.meta.at("fusionnet_config")));
    ck.fill("fusionnet", net.params());
    return net;
}

}  // namespace sf
