// Command-line front end. All functionality lives behind the C API in
// libscaffusion; this binary only parses flags and forwards.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "scaffusion.h"

namespace {

int report(sf_status status) {
    if (status == SF_OK) return 0;
    std::fprintf(stderr, "error (%s): %s\n", sf_status_name(status), sf_last_error());
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scaffusion: two-stage sparse-to-dense depth completion"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sf_version()));

    // ---- gen-data
    auto* gen = app.add_subcommand("gen-data", "Render a synthetic dataset");
    std::uint64_t seed = 0;
    std::string layout = "room", sparsity = "corner", out_dir;
    int sequences = 1, frames = 3, width = 160, height = 128, points = 100, lines = 0;
    double min_depth = 0.0, max_depth = 0.0, dropout = 0.2;
    gen->add_option("--seed", seed, "Master RNG seed");
    gen->add_option("--layout", layout, "room | corridor | outdoor-strip");
    gen->add_option("--sequences", sequences, "Number of camera trajectories");
    gen->add_option("--frames", frames, "Frames per sequence (>= 3)");
    gen->add_option("--width", width, "Image width");
    gen->add_option("--height", height, "Image height");
    gen->add_option("--min-depth", min_depth, "Scene depth lower bound (m)");
    gen->add_option("--max-depth", max_depth, "Scene depth upper bound (m)");
    gen->add_option("--sparsity", sparsity, "corner | scanline | uniform");
    gen->add_option("--points", points, "Target sparse points per frame");
    gen->add_option("--lines", lines, "Scanline count (0 = derive from --points)");
    gen->add_option("--dropout", dropout, "Scanline per-pixel dropout");
    gen->add_option("--out", out_dir, "Output dataset directory")->required();
    gen->callback([&] {
        sf_gen_data_params p{};
        p.seed = seed;
        p.layout = layout.c_str();
        p.sequences = sequences;
        p.frames = frames;
        p.width = width;
        p.height = height;
        p.min_depth_m = min_depth;
        p.max_depth_m = max_depth;
        p.sparsity = sparsity.c_str();
        p.points = points;
        p.lines = lines;
        p.dropout = dropout;
        p.out_dir = out_dir.c_str();
        p.use_cache = 1;
        sf_gen_data_summary s{};
        const sf_status st = sf_gen_data(&p, &s);
        if (st == SF_OK)
            std::printf(
                "dataset: %d sequence(s), %d frames, mean sparse density %.4f%%, depth range "
                "[%.3f, %.3f] m%s\n",
                s.sequences, s.frames, 100.0 * s.mean_density, s.min_depth_m, s.max_depth_m,
                s.from_cache ? " (from cache)" : "");
        std::exit(report(st));
    });

    // ---- train
    auto* train = app.add_subcommand("train", "Train a stage (scaffnet or fusionnet)");
    std::string config_path, train_out, stage_override;
    train->add_option("--config", config_path, "Run configuration file")->required();
    train->add_option("--out", train_out, "Run directory")->required();
    train->add_option("--stage", stage_override,
                      "Override the config's stage (scaffnet | fusionnet)");
    train->callback([&] {
        // A stage override goes through a derived config file so the C
        // surface stays narrow.
        std::string cfg_file = config_path;
        if (!stage_override.empty()) {
            std::error_code ec;
            std::filesystem::create_directories(train_out, ec);
            std::ifstream src(config_path);
            if (!src.good()) {
                std::fprintf(stderr, "error: cannot open config %s\n", config_path.c_str());
                std::exit(1);
            }
            std::stringstream text;
            text << src.rdbuf();
            text << "\nstage = " << stage_override << "\n";
            cfg_file = train_out + "/.stage_override.cfg";
            std::ofstream dst(cfg_file, std::ios::trunc);
            dst << text.str();
            if (!dst.good()) {
                std::fprintf(stderr, "error: cannot write %s\n", cfg_file.c_str());
                std::exit(1);
            }
        }
        std::exit(report(sf_train(cfg_file.c_str(), train_out.c_str())));
    });

    // ---- eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against a dataset");
    std::string ckpt, dataset_dir, eval_out, resample_kind = "uniform";
    double eval_min = 0.0, eval_max = 0.0;
    int resample_points = 0;
    std::uint64_t resample_seed = 7;
    bool error_maps = false;
    eval->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
    eval->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    eval->add_option("--out", eval_out, "Output directory for metrics and maps");
    eval->add_option("--eval-min", eval_min, "Range cap lower bound (m)");
    eval->add_option("--eval-max", eval_max, "Range cap upper bound (m)");
    eval->add_option("--points", resample_points, "Resample sparse inputs to this count");
    eval->add_option("--resample-kind", resample_kind, "uniform | corner");
    eval->add_option("--resample-seed", resample_seed, "Seed for resampling");
    eval->add_flag("--error-maps", error_maps, "Write per-frame error map PNGs");
    eval->callback([&] {
        sf_eval_params p{};
        p.checkpoint = ckpt.c_str();
        p.dataset_dir = dataset_dir.c_str();
        p.out_dir = eval_out.empty() ? nullptr : eval_out.c_str();
        p.eval_min_m = eval_min;
        p.eval_max_m = eval_max;
        p.resample_points = resample_points;
        p.resample_kind = resample_kind.c_str();
        p.resample_seed = resample_seed;
        p.write_error_maps = error_maps ? 1 : 0;
        sf_metrics m{};
        const sf_status st = sf_eval(&p, &m);
        if (st == SF_OK)
            std::printf("MAE %.3f mm | RMSE %.3f mm | iMAE %.3f 1/km | iRMSE %.3f 1/km (%ld px)\n",
                        m.mae_mm, m.rmse_mm, m.imae_per_km, m.irmse_per_km, m.valid_count);
        std::exit(report(st));
    });

    // ---- ablate
    auto* ablate = app.add_subcommand("ablate", "Run an ablation suite");
    std::string suite, ablate_config, ablate_out;
    ablate->add_option("--suite", suite, "spp-on-off | density-sweep | output-head")->required();
    ablate->add_option("--config", ablate_config, "Base run configuration")->required();
    ablate->add_option("--out", ablate_out, "Report directory")->required();
    ablate->callback([&] {
        int pass = 0;
        const sf_status st = sf_ablate(suite.c_str(), ablate_config.c_str(), ablate_out.c_str(),
                                       &pass);
        if (st == SF_OK)
            std::printf("suite %s: %s (report in %s)\n", suite.c_str(), pass ? "pass" : "fail",
                        ablate_out.c_str());
        std::exit(st == SF_OK ? (pass ? 0 : 2) : report(st));
    });

    // ---- infer
    auto* infer = app.add_subcommand("infer", "Run inference on one dataset frame");
    std::string infer_ckpt, infer_dataset, infer_out;
    int infer_frame = 0;
    infer->add_option("--checkpoint", infer_ckpt, "Checkpoint file")->required();
    infer->add_option("--dataset", infer_dataset, "Dataset directory")->required();
    infer->add_option("--frame", infer_frame, "Global frame index");
    infer->add_option("--out", infer_out, "Output directory")->required();
    infer->callback([&] {
        std::exit(report(sf_visualize(infer_dataset.c_str(), infer_ckpt.c_str(), infer_frame,
                                      infer_out.c_str())));
    });

    // ---- visualize
    auto* vis = app.add_subcommand("visualize", "Render dataset frame visualizations");
    std::string vis_dataset, vis_ckpt, vis_out;
    int vis_frame = 0;
    vis->add_option("--dataset", vis_dataset, "Dataset directory")->required();
    vis->add_option("--checkpoint", vis_ckpt, "Optional checkpoint for predictions");
    vis->add_option("--frame", vis_frame, "Global frame index");
    vis->add_option("--out", vis_out, "Output directory")->required();
    vis->callback([&] {
        std::exit(report(sf_visualize(vis_dataset.c_str(),
                                      vis_ckpt.empty() ? nullptr : vis_ckpt.c_str(), vis_frame,
                                      vis_out.c_str())));
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}
