#include "scaffusion.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include "sf/ablation.hpp"
#include "sf/checkpoint.hpp"
#include "sf/common.hpp"
#include "sf/config.hpp"
#include "sf/dataset.hpp"
#include "sf/rng.hpp"
#include "sf/trainer.hpp"
#include "sf/visualize.hpp"

namespace {

thread_local std::string g_last_error;

sf_status fail(sf_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename Fn>
sf_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const sf::Error& e) {
        return fail(SF_ERROR_INVALID_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(SF_ERROR_RUNTIME, e.what());
    }
}

}  // namespace

struct sf_model {
    std::unique_ptr<sf::ScaffNet> scaffnet;
    std::unique_ptr<sf::FusionNet> fusionnet;
};

extern "C" {

const char* sf_version(void) { return "1.0.0"; }

const char* sf_status_name(sf_status status) {
    switch (status) {
        case SF_OK: return "ok";
        case SF_ERROR_INVALID_ARGUMENT: return "invalid-argument";
        case SF_ERROR_IO: return "io-error";
        case SF_ERROR_RUNTIME: return "runtime-error";
    }
    return "unknown";
}

const char* sf_last_error(void) { return g_last_error.c_str(); }

sf_status sf_gen_data(const sf_gen_data_params* params, sf_gen_data_summary* summary) {
    if (!params) return fail(SF_ERROR_INVALID_ARGUMENT, "sf_gen_data: params is null");
    return guarded([&]() {
        sf::GenDataOptions o;
        o.scene.seed = params->seed;
        o.scene.layout = sf::layout_from_string(params->layout ? params->layout : "room");
        o.scene.frames = params->frames;
        o.scene.width = params->width;
        o.scene.height = params->height;
        if (params->min_depth_m > 0) o.scene.d_min = params->min_depth_m;
        if (params->max_depth_m > 0) o.scene.d_max = params->max_depth_m;
        o.sequences = params->sequences > 0 ? params->sequences : 1;
        o.sampling.kind = sf::sampling_kind_from_string(params->sparsity ? params->sparsity : "uniform");
        if (params->points > 0) o.sampling.target_points = params->points;
        o.sampling.lines = params->lines;
        if (params->dropout >= 0) o.sampling.dropout = params->dropout;
        o.out_dir = params->out_dir ? params->out_dir : "";
        o.use_cache = params->use_cache != 0;
        const sf::GenDataSummary s = sf::generate_dataset(o);
        if (summary) {
            summary->sequences = s.sequences;
            summary->frames = s.frames;
            summary->mean_density = s.mean_density;
            summary->min_depth_m = s.min_depth;
            summary->max_depth_m = s.max_depth;
            summary->from_cache = s.from_cache ? 1 : 0;
        }
        return SF_OK;
    });
}

sf_status sf_train(const char* config_path, const char* out_dir) {
    if (!config_path || !out_dir)
        return fail(SF_ERROR_INVALID_ARGUMENT, "sf_train: config_path and out_dir are required");
    return guarded([&]() {
        const sf::RunConfig cfg = sf::RunConfig::load(config_path);
        sf::require(!cfg.dataset.empty(), "config: 'dataset' is required for training");
        const sf::Dataset train = sf::Dataset::load(cfg.dataset);
        sf::Dataset val_storage;
        const sf::Dataset* val = nullptr;
        if (!cfg.val_dataset.empty()) {
            val_storage = sf::Dataset::load(cfg.val_dataset);
            val = &val_storage;
        }
        if (cfg.stage == "scaffnet") {
            sf::train_scaffnet(train, val, cfg, out_dir);
        } else {
            sf::require(!cfg.scaffnet_checkpoint.empty(),
                        "config: 'scaffnet_checkpoint' is required for stage fusionnet");
            const sf::LoadedCheckpoint sck = sf::load_checkpoint(cfg.scaffnet_checkpoint);
            sf::train_fusionnet(train, val, sck, cfg, out_dir);
        }
        return SF_OK;
    });
}

sf_status sf_eval(const sf_eval_params* params, sf_metrics* aggregate) {
    if (!params || !params->checkpoint || !params->dataset_dir)
        return fail(SF_ERROR_INVALID_ARGUMENT, "sf_eval: checkpoint and dataset_dir are required");
    return guarded([&]() {
        const sf::Dataset ds = sf::Dataset::load(params->dataset_dir);
        const sf::LoadedCheckpoint ck = sf::load_checkpoint(params->checkpoint);
        const sf::ScaffNet scaff = sf::scaffnet_from_checkpoint(ck);
        std::unique_ptr<sf::FusionNet> fusion;
        if (ck.kind == "fusionnet")
            fusion = std::make_unique<sf::FusionNet>(sf::fusionnet_from_checkpoint(ck));

        sf::Predictor base = fusion ? sf::fusion_predictor(scaff, *fusion)
                                    : sf::scaffnet_predictor(scaff);
        sf::Predictor predict = base;
        if (params->resample_points > 0) {
            const sf::SamplingKind kind =
                params->resample_kind ? sf::sampling_kind_from_string(params->resample_kind)
                                      : sf::SamplingKind::Uniform;
            const int points = params->resample_points;
            const std::uint64_t seed = params->resample_seed;
            predict = [base, kind, points, seed](const sf::Dataset::Sample& s_in) {
                sf::Dataset::Sample s = s_in;
                sf::resample_sparse(s, kind, points,
                                    sf::derive_seed(seed, "eval-resample",
                                                    static_cast<std::uint64_t>(s.sequence) * 1000000 +
                                                        s.index));
                return base(s);
            };
        }

        const sf::DepthRange range{params->eval_min_m > 0 ? params->eval_min_m : 0.2,
                                   params->eval_max_m > 0 ? params->eval_max_m : 10.0};
        const sf::EvalReport rep = sf::evaluate_dataset(ds, predict, range);
        if (params->out_dir && *params->out_dir) {
            std::filesystem::create_directories(params->out_dir);
            sf::write_metrics_csv(std::string(params->out_dir) + "/metrics.csv", rep);
            sf::write_metrics_json(std::string(params->out_dir) + "/metrics.json", rep);
            if (params->write_error_maps) {
                for (int i = 0; i < ds.size(); ++i) {
                    const sf::Dataset::Sample s = ds.sample(i);
                    const sf::Tensor pred = predict(s);
                    char name[64];
                    std::snprintf(name, sizeof(name), "/error_%04d.png", i);
                    sf::write_error_map(std::string(params->out_dir) + name, pred, s.depth_gt,
                                        s.gt_valid);
                }
            }
        }
        if (aggregate) {
            aggregate->mae_mm = rep.aggregate.mae;
            aggregate->rmse_mm = rep.aggregate.rmse;
            aggregate->imae_per_km = rep.aggregate.imae;
            aggregate->irmse_per_km = rep.aggregate.irmse;
            aggregate->valid_count = rep.aggregate.valid_count;
        }
        return SF_OK;
    });
}

sf_status sf_ablate(const char* suite, const char* config_path, const char* out_dir, int* pass) {
    if (!suite || !config_path || !out_dir)
        return fail(SF_ERROR_INVALID_ARGUMENT, "sf_ablate: suite, config_path and out_dir required");
    return guarded([&]() {
        const sf::RunConfig cfg = sf::RunConfig::load(config_path);
        const sf::AblationReport rep = sf::run_ablation(suite, cfg, out_dir);
        if (pass) *pass = rep.pass ? 1 : 0;
        return SF_OK;
    });
}

sf_status sf_model_open(const char* checkpoint_path, sf_model** out_model) {
    if (!checkpoint_path || !out_model)
        return fail(SF_ERROR_INVALID_ARGUMENT, "sf_model_open: null argument");
    return guarded([&]() {
        auto model = std::make_unique<sf_model>();
        const sf::LoadedCheckpoint ck = sf::load_checkpoint(checkpoint_path);
        model->scaffnet = std::make_unique<sf::ScaffNet>(sf::scaffnet_from_checkpoint(ck));
        if (ck.kind == "fusionnet")
            model->fusionnet = std::make_unique<sf::FusionNet>(sf::fusionnet_from_checkpoint(ck));
        *out_model = model.release();
        return SF_OK;
    });
}

void sf_model_close(sf_model* model) { delete model; }

sf_status sf_model_input_size(const sf_model* model, int* divisor) {
    if (!model || !divisor) return fail(SF_ERROR_INVALID_ARGUMENT, "sf_model_input_size: null");
    *divisor = model->scaffnet->config().downsample_factor();
    return SF_OK;
}

sf_status sf_model_infer(sf_model* model, const double* image, const double* sparse, int width,
                         int height, double* refined_out, double* topology_out) {
    if (!model || !sparse)
        return fail(SF_ERROR_INVALID_ARGUMENT, "sf_model_infer: model and sparse are required");
    if (model->fusionnet && !image)
        return fail(SF_ERROR_INVALID_ARGUMENT,
                    "sf_model_infer: the refinement model needs an image");
    return guarded([&]() {
        sf::SparseDepthMap sp;
        sp.values = sf::Tensor::hwc(height, width, 1);
        sp.validity = sf::Tensor::hwc(height, width, 1);
        for (std::size_t i = 0; i < sp.values.size(); ++i) {
            sp.values[i] = sparse[i] > 0 ? sparse[i] : 0.0;
            sp.validity[i] = sparse[i] > 0 ? 1.0 : 0.0;
        }
        sf::Tensor img;
        if (image) {
            img = sf::Tensor::hwc(height, width, 3);
            std::memcpy(img.data.data(), image, img.size() * sizeof(double));
        }
        const sf::InferResult res =
            sf::infer_depth(*model->scaffnet, model->fusionnet.get(), img, sp);
        if (refined_out)
            std::memcpy(refined_out, res.refined.data.data(), res.refined.size() * sizeof(double));
        if (topology_out)
            std::memcpy(topology_out, res.topology.data.data(),
                        res.topology.size() * sizeof(double));
        return SF_OK;
    });
}

sf_status sf_visualize(const char* dataset_dir, const char* checkpoint, int frame,
                       const char* out_dir) {
    if (!dataset_dir || !out_dir)
        return fail(SF_ERROR_INVALID_ARGUMENT, "sf_visualize: dataset_dir and out_dir required");
    return guarded([&]() {
        sf::VisualizeOptions o;
        o.dataset_dir = dataset_dir;
        o.checkpoint = checkpoint ? checkpoint : "";
        o.frame = frame;
        o.out_dir = out_dir;
        sf::visualize_frame(o);
        return SF_OK;
    });
}

}  // extern "C"
