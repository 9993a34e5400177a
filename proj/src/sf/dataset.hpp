#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sf/camera.hpp"
#include "sf/sampling.hpp"
#include "sf/scenegen.hpp"

namespace sf {

// On-disk dataset layout: manifest.json at the root; per sequence a
// directory with 8-bit RGB images, 16-bit millimeter depth PNGs (0 =
// invalid) for dense and sparse depth, and row-major pose JSON files.
struct FrameRecord {
    int index = 0;
    std::string image, depth_gt, sparse, pose;  // paths relative to the root
};

struct SequenceRecord {
    std::string id;
    Intrinsics intrinsics;
    std::vector<FrameRecord> frames;
};

struct DatasetManifest {
    int version = 1;
    int width = 0, height = 0;
    std::vector<SequenceRecord> sequences;

    static DatasetManifest load(const std::string& dir);
    void save(const std::string& dir) const;
    // Rejects any dangling file reference, naming the missing path.
    void validate_files(const std::string& dir) const;
};

struct GenDataOptions {
    SceneConfig scene;
    int sequences = 1;
    SamplingStrategy sampling;
    std::string out_dir;
    bool use_cache = true;  // honor SCAFF_FUSION_CACHE when set
};

struct GenDataSummary {
    int sequences = 0;
    int frames = 0;
    double mean_density = 0.0;
    double min_depth = 0.0, max_depth = 0.0;
    bool from_cache = false;
};

GenDataSummary generate_dataset(const GenDataOptions& options);

// In-memory dataset with compact storage (8-bit images, 16-bit depths);
// samples decode to double tensors on demand.
class Dataset {
public:
    static Dataset load(const std::string& dir);

    struct Sample {
        Tensor image;      // (h,w,3)
        Tensor depth_gt;   // (h,w,1)
        Tensor gt_valid;   // (h,w,1)
        SparseDepthMap sparse;
        Pose pose;
        Intrinsics intrinsics;
        int sequence = 0;
        int index = 0;
    };

    int size() const { return static_cast<int>(frames_.size()); }
    int width() const { return width_; }
    int height() const { return height_; }
    Sample sample(int i) const;

    // Indices whose neighbors exist within the same sequence.
    std::vector<int> triplet_centers() const;
    struct Triplet {
        Sample prev, center, next;
        Pose rel_prev, rel_next;  // g_{(t-1)t}, g_{(t+1)t}
    };
    Triplet triplet(int center) const;

private:
    struct StoredFrame {
        std::vector<std::uint8_t> image;      // h*w*3
        std::vector<std::uint16_t> depth_mm;  // h*w
        std::vector<std::uint16_t> sparse_mm;
        Pose pose;
        int sequence = 0;
        int index = 0;
    };
    int width_ = 0, height_ = 0;
    std::vector<Intrinsics> intrinsics_;  // per sequence
    std::vector<StoredFrame> frames_;
};

}  // namespace sf
