#pragma once

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

#include "sf/nets.hpp"

namespace sf {

// Binary checkpoint: magic + JSON header (configs, step, RNG state, tensor
// shapes) followed by raw little-endian doubles in header order. Reload is
// bit-exact.
struct LoadedCheckpoint {
    std::string kind;  // "scaffnet" | "fusionnet"
    nlohmann::json meta;
    std::map<std::string, Tensor> tensors;  // "<store>/<param>" -> values

    bool has_store(const std::string& store) const;
    void fill(const std::string& store, ParamStore& params) const;
};

void save_checkpoint(const std::string& path, const std::string& kind, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const ParamStore*>>& stores,
                     const std::vector<std::pair<std::string, Tensor>>& extra = {});

LoadedCheckpoint load_checkpoint(const std::string& path);

nlohmann::json scaffnet_config_to_json(const ScaffNetConfig& c);
ScaffNetConfig scaffnet_config_from_json(const nlohmann::json& j);
nlohmann::json fusionnet_config_to_json(const FusionNetConfig& c);
FusionNetConfig fusionnet_config_from_json(const nlohmann::json& j);

// Rebuild networks from an embedded config snapshot and load their weights.
ScaffNet scaffnet_from_checkpoint(const LoadedCheckpoint& ck);
FusionNet fusionnet_from_checkpoint(const LoadedCheckpoint& ck);

}  // namespace sf
