#include "sf/visualize.hpp"

#include <filesystem>

#include "sf/checkpoint.hpp"
#include "sf/common.hpp"
#include "sf/metrics.hpp"
#include "sf/png_io.hpp"
#include "sf/trainer.hpp"

namespace sf {

void visualize_frame(const VisualizeOptions& options) {
    require(!options.out_dir.empty(), "visualize: output directory required");
    std::filesystem::create_directories(options.out_dir);
    const Dataset ds = Dataset::load(options.dataset_dir);
    require(options.frame >= 0 && options.frame < ds.size(), "visualize: frame index out of range");
    const Dataset::Sample s = ds.sample(options.frame);

    write_png_rgb8(options.out_dir + "/image.png", s.image);
    double dmax = 0, dmin = 1e300;
    for (std::size_t i = 0; i < s.depth_gt.size(); ++i)
        if (s.gt_valid[i] != 0.0) {
            dmax = std::max(dmax, s.depth_gt[i]);
            dmin = std::min(dmin, s.depth_gt[i]);
        }
    write_depth_map(options.out_dir + "/depth_gt.png", s.depth_gt, dmin, dmax);

    // Sparse points drawn over a dimmed image.
    Tensor overlay = s.image;
    for (double& v : overlay.data) v *= 0.35;
    for (int y = 0; y < overlay.h; ++y)
        for (int x = 0; x < overlay.w; ++x)
            if (s.sparse.validity.at(y, x, 0) != 0.0) {
                double rgb[3];
                jet_color((s.sparse.values.at(y, x, 0) - dmin) / std::max(1e-9, dmax - dmin), rgb);
                for (int ch = 0; ch < 3; ++ch) overlay.at(y, x, ch) = rgb[ch];
            }
    write_png_rgb8(options.out_dir + "/sparse.png", overlay);

    if (options.checkpoint.empty()) return;
    const LoadedCheckpoint ck = load_checkpoint(options.checkpoint);
    const ScaffNet scaff = scaffnet_from_checkpoint(ck);
    InferResult res;
    if (ck.kind == "fusionnet") {
        const FusionNet fusion = fusionnet_from_checkpoint(ck);
        res = infer_depth(scaff, &fusion, s.image, s.sparse);
    } else {
        res = infer_depth(scaff, nullptr, s.image, s.sparse);
    }
    write_depth_map(options.out_dir + "/topology.png", res.topology, dmin, dmax);
    write_depth_map(options.out_dir + "/refined.png", res.refined, dmin, dmax);
    write_error_map(options.out_dir + "/error_refined.png", res.refined, s.depth_gt, s.gt_valid);
    write_error_map(options.out_dir + "/error_topology.png", res.topology, s.depth_gt, s.gt_valid);
}

}  // namespace sf
