// Exercises the shared-library C API the way an external client would.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "scaffusion.h"

namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

sf_gen_data_params small_params(const std::string& out) {
    sf_gen_data_params p{};
    p.seed = 3;
    p.layout = "room";
    p.sequences = 1;
    p.frames = 5;
    p.width = 64;
    p.height = 32;
    p.sparsity = "uniform";
    p.points = 40;
    p.dropout = 0.2;
    p.out_dir = out.c_str();
    p.use_cache = 0;
    return p;
}

}  // namespace

TEST_CASE("version and status names") {
    CHECK(sf_version() != nullptr);
    CHECK(std::string(sf_status_name(SF_OK)) == "ok");
    CHECK(std::string(sf_status_name(SF_ERROR_INVALID_ARGUMENT)) == "invalid-argument");
}

TEST_CASE("gen-data, train, eval, model inference through the C boundary") {
    const std::string ds = tmp_dir("sf_capi_ds");
    sf_gen_data_params p = small_params(ds);
    sf_gen_data_summary summary{};
    REQUIRE(sf_gen_data(&p, &summary) == SF_OK);
    CHECK(summary.frames == 5);
    CHECK(summary.mean_density > 0.0);

    // Train a one-epoch estimator.
    const std::string run = tmp_dir("sf_capi_run");
    const std::string cfg_path = run + "/run.cfg";
    {
        std::ofstream cfg(cfg_path);
        cfg << "stage = scaffnet\n"
            << "dataset = " << ds << "\n"
            << "preset = tiny\n"
            << "epochs = 1\n"
            << "batch_size = 4\n"
            << "learning_rate = 1e-3\n"
            << "seed = 5\n";
    }
    REQUIRE_MESSAGE(sf_train(cfg_path.c_str(), run.c_str()) == SF_OK, sf_last_error());
    const std::string ckpt = run + "/final.ckpt";
    REQUIRE(fs::exists(ckpt));

    // Evaluate against the training set.
    sf_eval_params ep{};
    ep.checkpoint = ckpt.c_str();
    ep.dataset_dir = ds.c_str();
    const std::string eval_out = tmp_dir("sf_capi_eval");
    ep.out_dir = eval_out.c_str();
    ep.eval_min_m = 0.2;
    ep.eval_max_m = 10.0;
    ep.write_error_maps = 1;
    sf_metrics m{};
    REQUIRE_MESSAGE(sf_eval(&ep, &m) == SF_OK, sf_last_error());
    CHECK(m.valid_count > 0);
    CHECK(m.mae_mm > 0.0);
    CHECK(std::isfinite(m.mae_mm));
    CHECK(m.rmse_mm >= m.mae_mm);
    CHECK(fs::exists(eval_out + "/metrics.csv"));
    CHECK(fs::exists(eval_out + "/metrics.json"));
    CHECK(fs::exists(eval_out + "/error_0000.png"));

    // Handle-based inference on raw buffers.
    sf_model* model = nullptr;
    REQUIRE(sf_model_open(ckpt.c_str(), &model) == SF_OK);
    int divisor = 0;
    CHECK(sf_model_input_size(model, &divisor) == SF_OK);
    CHECK(divisor == 32);
    const int W = 64, H = 32;
    std::vector<double> sparse(W * H, 0.0);
    sparse[10 * W + 20] = 2.0;
    sparse[20 * W + 40] = 3.0;
    std::vector<double> refined(W * H, -1.0), topology(W * H, -1.0);
    REQUIRE_MESSAGE(
        sf_model_infer(model, nullptr, sparse.data(), W, H, refined.data(), topology.data()) ==
            SF_OK,
        sf_last_error());
    for (int i = 0; i < W * H; ++i) {
        CHECK(refined[i] > 0.0);
        CHECK(topology[i] == refined[i]);  // estimator-only checkpoint
    }
    sf_model_close(model);

    // Visualization of a frame with predictions.
    const std::string vis = tmp_dir("sf_capi_vis");
    REQUIRE(sf_visualize(ds.c_str(), ckpt.c_str(), 0, vis.c_str()) == SF_OK);
    CHECK(fs::exists(vis + "/image.png"));
    CHECK(fs::exists(vis + "/refined.png"));
    CHECK(fs::exists(vis + "/error_refined.png"));
}

TEST_CASE("error paths set a status and a message") {
    CHECK(sf_gen_data(nullptr, nullptr) == SF_ERROR_INVALID_ARGUMENT);

    sf_eval_params ep{};
    ep.checkpoint = "/nonexistent/checkpoint.ckpt";
    ep.dataset_dir = "/nonexistent/dataset";
    CHECK(sf_eval(&ep, nullptr) != SF_OK);
    CHECK(std::strlen(sf_last_error()) > 0);

    sf_model* model = nullptr;
    CHECK(sf_model_open("/nonexistent/checkpoint.ckpt", &model) != SF_OK);
    CHECK(model == nullptr);

    CHECK(sf_train("/nonexistent/config.cfg", "/tmp/sf_capi_never") != SF_OK);
    CHECK(sf_ablate("bogus-suite", "/nonexistent.cfg", "/tmp/sf_capi_never", nullptr) != SF_OK);
}

TEST_CASE("config violations surface the offending key") {
    const std::string dir = tmp_dir("sf_capi_badcfg");
    const std::string cfg_path = dir + "/bad.cfg";
    {
        std::ofstream cfg(cfg_path);
        cfg << "stage = scaffnet\nmystery_knob = 7\n";
    }
    CHECK(sf_train(cfg_path.c_str(), dir.c_str()) == SF_ERROR_INVALID_ARGUMENT);
    CHECK(std::string(sf_last_error()).find("mystery_knob") != std::string::npos);
}
