#include "sf/config.hpp"

#include <fstream>
#include <sstream>

#include "sf/common.hpp"

namespace sf {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        require(used == v.size(), "");
        return d;
    } catch (...) {
        throw Error("config: invalid number for key '" + key + "': " + v);
    }
}

long parse_long(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const long d = std::stol(v, &used);
        require(used == v.size(), "");
        return d;
    } catch (...) {
        throw Error("config: invalid integer for key '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error("config: invalid boolean for key '" + key + "': " + v);
}

}  // namespace

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(parse_long(item, key)));
    }
    return out;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "config: cannot open " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse(buf.str(), path);
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig c;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos,
                "config: missing '=' at " + origin + ":" + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "stage") c.stage = val;
        else if (key == "dataset") c.dataset = val;
        else if (key == "val_dataset") c.val_dataset = val;
        else if (key == "scaffnet_checkpoint") c.scaffnet_checkpoint = val;
        else if (key == "fusionnet_checkpoint") c.fusionnet_checkpoint = val;
        else if (key == "resume_from") c.resume_from = val;
        else if (key == "preset") c.preset = val;
        else if (key == "spp_kernels") c.spp_kernels = val;
        else if (key == "use_spp") c.use_spp = parse_bool(val, key);
        else if (key == "head") c.head = val;
        else if (key == "learning_rate") c.learning_rate = parse_double(val, key);
        else if (key == "beta1") c.beta1 = parse_double(val, key);
        else if (key == "beta2") c.beta2 = parse_double(val, key);
        else if (key == "adam_eps") c.adam_eps = parse_double(val, key);
        else if (key == "lr_halve_epochs") c.lr_halve_epochs = parse_int_list(val, key);
        else if (key == "epochs") c.epochs = static_cast<int>(parse_long(val, key));
        else if (key == "batch_size") c.batch_size = static_cast<int>(parse_long(val, key));
        else if (key == "crop_width") c.crop_width = static_cast<int>(parse_long(val, key));
        else if (key == "crop_height") c.crop_height = static_cast<int>(parse_long(val, key));
        else if (key == "w_ph") c.weights.w_ph = parse_double(val, key);
        else if (key == "w_co") c.weights.w_co = parse_double(val, key);
        else if (key == "w_st") c.weights.w_st = parse_double(val, key);
        else if (key == "w_sz") c.weights.w_sz = parse_double(val, key);
        else if (key == "w_sm") c.weights.w_sm = parse_double(val, key);
        else if (key == "w_tp") c.weights.w_tp = parse_double(val, key);
        else if (key == "tp_start_step") c.tp_start_step = parse_long(val, key);
        else if (key == "tp_start_ratio") c.tp_start_ratio = parse_double(val, key);
        else if (key == "pose_source") c.pose_source = val;
        else if (key == "freeze_scaffnet") c.freeze_scaffnet = parse_bool(val, key);
        else if (key == "hflip_augment") c.hflip_augment = parse_bool(val, key);
        else if (key == "d_min") c.d_min = parse_double(val, key);
        else if (key == "d_max") c.d_max = parse_double(val, key);
        else if (key == "eval_min") c.eval_min = parse_double(val, key);
        else if (key == "eval_max") c.eval_max = parse_double(val, key);
        else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_long(val, key));
        else if (key == "workers") c.workers = static_cast<int>(parse_long(val, key));
        else if (key == "deterministic") c.deterministic = parse_bool(val, key);
        else if (key == "checkpoint_every") c.checkpoint_every = static_cast<int>(parse_long(val, key));
        else throw Error("config: unknown key '" + key + "' at " + origin + ":" + std::to_string(lineno));
    }
    c.validate();
    return c;
}

void RunConfig::validate() const {
    require(stage == "scaffnet" || stage == "fusionnet",
            "config: stage must be 'scaffnet' or 'fusionnet'");
    require(preset == "tiny" || preset == "paper" || preset == "paper-scanline",
            "config: preset must be tiny, paper or paper-scanline");
    require(head == "alpha-beta" || head == "direct", "config: head must be alpha-beta or direct");
    require(pose_source == "ground-truth" || pose_source == "learned",
            "config: pose_source must be ground-truth or learned");
    require(learning_rate > 0, "config: learning_rate must be positive");
    require(epochs >= 1, "config: epochs must be >= 1");
    require(batch_size >= 1, "config: batch_size must be >= 1");
    require(workers >= 1, "config: workers must be >= 1");
    require(tp_start_ratio >= 0.0 && tp_start_ratio <= 1.0, "config: tp_start_ratio in [0,1]");
    require(d_min > 0 && d_min < d_max, "config: need 0 < d_min < d_max");
    weights.validate();
}

std::string RunConfig::serialize() const {
    std::stringstream s;
    s << "stage = " << stage << "\n";
    if (!dataset.empty()) s << "dataset = " << dataset << "\n";
    if (!val_dataset.empty()) s << "val_dataset = " << val_dataset << "\n";
    if (!scaffnet_checkpoint.empty()) s << "scaffnet_checkpoint = " << scaffnet_checkpoint << "\n";
    if (!fusionnet_checkpoint.empty()) s << "fusionnet_checkpoint = " << fusionnet_checkpoint << "\n";
    s << "preset = " << preset << "\n";
    if (!spp_kernels.empty()) s << "spp_kernels = " << spp_kernels << "\n";
    s << "use_spp = " << (use_spp ? "true" : "false") << "\n";
    s << "head = " << head << "\n";
    s << "learning_rate = " << learning_rate << "\n";
    s << "beta1 = " << beta1 << "\n";
    s << "beta2 = " << beta2 << "\n";
    s << "adam_eps = " << adam_eps << "\n";
    if (!lr_halve_epochs.empty()) {
        s << "lr_halve_epochs = ";
        for (std::size_t i = 0; i < lr_halve_epochs.size(); ++i)
            s << (i ? "," : "") << lr_halve_epochs[i];
        s << "\n";
    }
    s << "epochs = " << epochs << "\n";
    s << "batch_size = " << batch_size << "\n";
    if (crop_width) s << "crop_width = " << crop_width << "\n";
    if (crop_height) s << "crop_height = " << crop_height << "\n";
    s << "w_ph = " << weights.w_ph << "\nw_co = " << weights.w_co << "\nw_st = " << weights.w_st
      << "\nw_sz = " << weights.w_sz << "\nw_sm = " << weights.w_sm << "\nw_tp = " << weights.w_tp
      << "\n";
    s << "tp_start_step = " << tp_start_step << "\n";
    s << "tp_start_ratio = " << tp_start_ratio << "\n";
    s << "pose_source = " << pose_source << "\n";
    s << "freeze_scaffnet = " << (freeze_scaffnet ? "true" : "false") << "\n";
    s << "hflip_augment = " << (hflip_augment ? "true" : "false") << "\n";
    s << "d_min = " << d_min << "\nd_max = " << d_max << "\n";
    s << "eval_min = " << eval_min << "\neval_max = " << eval_max << "\n";
    s << "seed = " << seed << "\n";
    s << "workers = " << workers << "\n";
    s << "deterministic = " << (deterministic ? "true" : "false") << "\n";
    s << "checkpoint_every = " << checkpoint_every << "\n";
    return s.str();
}

}  // namespace sf
