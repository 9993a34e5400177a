#include "sf/dataset.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "sf/common.hpp"
#include "sf/png_io.hpp"
#include "sf/rng.hpp"

namespace sf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json intrinsics_to_json(const Intrinsics& k) {
    return json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx},
                {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

Intrinsics intrinsics_from_json(const json& j) {
    Intrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    k.validate();
    return k;
}

void write_pose_json(const std::string& path, const Pose& pose) {
    json j;
    j["rotation"] = pose.rotation;       // row-major, 9 entries
    j["translation"] = pose.translation;
    std::ofstream f(path, std::ios::trunc);
    require(f.good(), "dataset: cannot write " + path);
    f << j.dump(2) << "\n";
}

Pose read_pose_json(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "dataset: cannot read " + path);
    json j = json::parse(f);
    Pose p;
    const auto r = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    require(r.size() == 9 && t.size() == 3, "dataset: malformed pose file " + path);
    for (int i = 0; i < 9; ++i) p.rotation[i] = r[i];
    for (int i = 0; i < 3; ++i) p.translation[i] = t[i];
    p.validate();
    return p;
}

std::string frame_name(const char* stem, int index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06d", stem, index);
    return buf;
}

std::uint64_t options_key(const GenDataOptions& o) {
    std::string s = layout_to_string(o.scene.layout) + "|" +
                    sampling_kind_to_string(o.sampling.kind);
    std::uint64_t h = fnv1a64(s);
    const double nums[] = {static_cast<double>(o.scene.seed),
                           static_cast<double>(o.scene.frames),
                           static_cast<double>(o.scene.width),
                           static_cast<double>(o.scene.height),
                           o.scene.d_min,
                           o.scene.d_max,
                           static_cast<double>(o.scene.min_objects),
                           static_cast<double>(o.scene.max_objects),
                           o.scene.max_step_m,
                           o.scene.max_turn_deg,
                           o.scene.fov_deg,
                           static_cast<double>(o.sequences),
                           static_cast<double>(o.sampling.target_points),
                           o.sampling.harris_kappa,
                           o.sampling.harris_sigma,
                           static_cast<double>(o.sampling.lines),
                           o.sampling.dropout,
                           o.sampling.angular_jitter_deg};
    for (double v : nums) {
        const char* b = reinterpret_cast<const char*>(&v);
        h = fnv1a64(std::string_view(b, sizeof(double)), h);
    }
    return h;
}

void copy_tree(const fs::path& from, const fs::path& to) {
    fs::create_directories(to);
    fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

GenDataSummary summarize(const std::string& dir) {
    const DatasetManifest man = DatasetManifest::load(dir);
    GenDataSummary s;
    s.sequences = static_cast<int>(man.sequences.size());
    double density_sum = 0;
    double dmin = 1e300, dmax = 0;
    int n = 0;
    for (const auto& seq : man.sequences)
        for (const auto& fr : seq.frames) {
            Tensor sp, spv, gt, gtv;
            read_depth_png(dir + "/" + fr.sparse, sp, spv);
            read_depth_png(dir + "/" + fr.depth_gt, gt, gtv);
            density_sum += spv.mean();
            for (std::size_t i = 0; i < gt.size(); ++i)
                if (gtv[i] != 0.0) {
                    dmin = std::min(dmin, gt[i]);
                    dmax = std::max(dmax, gt[i]);
                }
            ++n;
        }
    s.frames = n;
    s.mean_density = n ? density_sum / n : 0.0;
    s.min_depth = n ? dmin : 0.0;
    s.max_depth = dmax;
    return s;
}

}  // namespace

DatasetManifest DatasetManifest::load(const std::string& dir) {
    const std::string path = dir + "/manifest.json";
    std::ifstream f(path);
    require(f.good(), "dataset: missing manifest " + path);
    json j = json::parse(f);
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    require(m.version == 1, "dataset: unsupported manifest version");
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    for (const auto& js : j.at("sequences")) {
        SequenceRecord s;
        s.id = js.at("id").get<std::string>();
        s.intrinsics = intrinsics_from_json(js.at("intrinsics"));
        for (const auto& jf : js.at("frames")) {
            FrameRecord fr;
            fr.index = jf.at("index").get<int>();
            fr.image = jf.at("image").get<std::string>();
            fr.depth_gt = jf.at("depth_gt").get<std::string>();
            fr.sparse = jf.at("sparse").get<std::string>();
            fr.pose = jf.at("pose").get<std::string>();
            s.frames.push_back(std::move(fr));
        }
        m.sequences.push_back(std::move(s));
    }
    return m;
}

void DatasetManifest::save(const std::string& dir) const {
    json j;
    j["version"] = version;
    j["width"] = width;
    j["height"] = height;
    j["sequences"] = json::array();
    for (const auto& s : sequences) {
        json js;
        js["id"] = s.id;
        js["intrinsics"] = intrinsics_to_json(s.intrinsics);
        js["frames"] = json::array();
        for (const auto& fr : s.frames) {
            js["frames"].push_back(json{{"index", fr.index},
                                        {"image", fr.image},
                                        {"depth_gt", fr.depth_gt},
                                        {"sparse", fr.sparse},
                                        {"pose", fr.pose}});
        }
        j["sequences"].push_back(std::move(js));
    }
    std::ofstream f(dir + "/manifest.json", std::ios::trunc);
    require(f.good(), "dataset: cannot write manifest in " + dir);
    f << j.dump(2) << "\n";
}

void DatasetManifest::validate_files(const std::string& dir) const {
    for (const auto& s : sequences)
        for (const auto& fr : s.frames)
            for (const std::string* p : {&fr.image, &fr.depth_gt, &fr.sparse, &fr.pose})
                require(fs::exists(dir + "/" + *p), "dataset: dangling reference " + dir + "/" + *p);
}

GenDataSummary generate_dataset(const GenDataOptions& options) {
    require(!options.out_dir.empty(), "gen-data: output directory required");
    options.scene.validate();

    const char* cache_root = std::getenv("SCAFF_FUSION_CACHE");
    fs::path cache_dir;
    if (options.use_cache && cache_root && *cache_root) {
        char key[32];
        std::snprintf(key, sizeof(key), "%016llx",
                      static_cast<unsigned long long>(options_key(options)));
        cache_dir = fs::path(cache_root) / key;
        if (fs::exists(cache_dir / "manifest.json")) {
            copy_tree(cache_dir, options.out_dir);
            GenDataSummary s = summarize(options.out_dir);
            s.from_cache = true;
            return s;
        }
    }

    fs::create_directories(options.out_dir);
    DatasetManifest man;
    man.width = options.scene.width;
    man.height = options.scene.height;

    for (int si = 0; si < options.sequences; ++si) {
        SceneConfig sc = options.scene;
        sc.seed = derive_seed(options.scene.seed, "sequence", static_cast<std::uint64_t>(si));
        const std::vector<FramePtr> frames = generate_scene(sc);

        SequenceRecord rec;
        rec.id = "seq" + std::to_string(si);
        rec.intrinsics = frames[0]->intrinsics;
        fs::create_directories(fs::path(options.out_dir) / rec.id);

        for (int fi = 0; fi < static_cast<int>(frames.size()); ++fi) {
            const RenderedFrame& fr = *frames[fi];
            FrameRecord fr_rec;
            fr_rec.index = fi;
            fr_rec.image = rec.id + "/" + frame_name("image", fi) + ".png";
            fr_rec.depth_gt = rec.id + "/" + frame_name("depth", fi) + ".png";
            fr_rec.sparse = rec.id + "/" + frame_name("sparse", fi) + ".png";
            fr_rec.pose = rec.id + "/" + frame_name("pose", fi) + ".json";

            const SparseDepthMap sparse =
                make_sparse(fr.depth_gt, &fr.image, options.sampling,
                            derive_seed(sc.seed, "sparse", static_cast<std::uint64_t>(fi)));

            write_png_rgb8(options.out_dir + "/" + fr_rec.image, fr.image);
            write_depth_png(options.out_dir + "/" + fr_rec.depth_gt, fr.depth_gt, nullptr);
            write_depth_png(options.out_dir + "/" + fr_rec.sparse, sparse.values, &sparse.validity);
            write_pose_json(options.out_dir + "/" + fr_rec.pose, fr.pose);
            rec.frames.push_back(std::move(fr_rec));
        }
        man.sequences.push_back(std::move(rec));
    }
    man.save(options.out_dir);

    if (!cache_dir.empty()) copy_tree(options.out_dir, cache_dir);
    return summarize(options.out_dir);
}

Dataset Dataset::load(const std::string& dir) {
    const DatasetManifest man = DatasetManifest::load(dir);
    man.validate_files(dir);
    Dataset ds;
    ds.width_ = man.width;
    ds.height_ = man.height;
    for (int si = 0; si < static_cast<int>(man.sequences.size()); ++si) {
        const SequenceRecord& seq = man.sequences[si];
        ds.intrinsics_.push_back(seq.intrinsics);
        for (const FrameRecord& fr : seq.frames) {
            StoredFrame sf;
            sf.sequence = si;
            sf.index = fr.index;

            const Tensor img = read_png_rgb8(dir + "/" + fr.image);
            require(img.h == man.height && img.w == man.width,
                    "dataset: frame resolution mismatch in " + fr.image);
            sf.image.resize(img.size());
            for (std::size_t i = 0; i < img.size(); ++i)
                sf.image[i] = static_cast<std::uint8_t>(std::lround(img[i] * 255.0));

            int w = 0, h = 0;
            sf.depth_mm = read_png_gray16(dir + "/" + fr.depth_gt, w, h);
            require(w == man.width && h == man.height, "dataset: depth resolution mismatch");
            sf.sparse_mm = read_png_gray16(dir + "/" + fr.sparse, w, h);
            require(w == man.width && h == man.height, "dataset: sparse resolution mismatch");
            sf.pose = read_pose_json(dir + "/" + fr.pose);
            ds.frames_.push_back(std::move(sf));
        }
    }
    require(!ds.frames_.empty(), "dataset: empty dataset in " + dir);
    return ds;
}

Dataset::Sample Dataset::sample(int i) const {
    require(i >= 0 && i < size(), "dataset: sample index out of range");
    const StoredFrame& sf = frames_[i];
    Sample s;
    s.sequence = sf.sequence;
    s.index = sf.index;
    s.pose = sf.pose;
    s.intrinsics = intrinsics_[sf.sequence];
    s.image = Tensor::hwc(height_, width_, 3);
    for (std::size_t k = 0; k < s.image.size(); ++k) s.image[k] = sf.image[k] / 255.0;
    s.depth_gt = Tensor::hwc(height_, width_, 1);
    s.gt_valid = Tensor::hwc(height_, width_, 1);
    s.sparse.values = Tensor::hwc(height_, width_, 1);
    s.sparse.validity = Tensor::hwc(height_, width_, 1);
    for (std::size_t k = 0; k < s.depth_gt.size(); ++k) {
        if (sf.depth_mm[k] != 0) {
            s.depth_gt[k] = sf.depth_mm[k] / 1000.0;
            s.gt_valid[k] = 1.0;
        }
        if (sf.sparse_mm[k] != 0) {
            s.sparse.values[k] = sf.sparse_mm[k] / 1000.0;
            s.sparse.validity[k] = 1.0;
        }
    }
    return s;
}

std::vector<int> Dataset::triplet_centers() const {
    std::vector<int> centers;
    for (int i = 1; i + 1 < size(); ++i)
        if (frames_[i - 1].sequence == frames_[i].sequence &&
            frames_[i + 1].sequence == frames_[i].sequence)
            centers.push_back(i);
    return centers;
}

Dataset::Triplet Dataset::triplet(int center) const {
    require(center >= 1 && center + 1 < size(), "dataset: triplet center out of range");
    require(frames_[center - 1].sequence == frames_[center].sequence &&
                frames_[center + 1].sequence == frames_[center].sequence,
            "dataset: triplet crosses sequence boundary");
    Triplet t;
    t.prev = sample(center - 1);
    t.center = sample(center);
    t.next = sample(center + 1);
    t.rel_prev = t.prev.pose.compose(t.center.pose.inverse());
    t.rel_next = t.next.pose.compose(t.center.pose.inverse());
    return t;
}

}  // namespace sf
