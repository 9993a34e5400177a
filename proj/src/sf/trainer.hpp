#pragma once

#include <functional>
#include <optional>

#include "sf/checkpoint.hpp"
#include "sf/config.hpp"
#include "sf/dataset.hpp"
#include "sf/metrics.hpp"

namespace sf {

// Adam over an ordered parameter list; state is serialized into checkpoints
// so resumed runs continue step-for-step.
struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;
    std::vector<Tensor> m, v;

    void init(const std::vector<NodePtr>& params);
    void step(const std::vector<NodePtr>& params, const std::vector<Tensor>& grads, double lr);
};

double lr_at_epoch(double base, const std::vector<int>& halve_epochs, int epoch);

using Predictor = std::function<Tensor(const Dataset::Sample&)>;

struct EvalReport {
    MetricSet aggregate;
    struct Row {
        int sequence = 0, index = 0;
        MetricSet m;
    };
    std::vector<Row> frames;
};

// Aggregate metrics pool every valid pixel across frames.
EvalReport evaluate_dataset(const Dataset& ds, const Predictor& predict, const DepthRange& range);
void write_metrics_csv(const std::string& path, const EvalReport& report);
void write_metrics_json(const std::string& path, const EvalReport& report);

// Re-draw the sparse input from dense ground truth (density sweeps).
void resample_sparse(Dataset::Sample& s, SamplingKind kind, int points, std::uint64_t seed);

struct TrainResult {
    std::string final_checkpoint;
    std::vector<LossReport> per_epoch;
    MetricSet final_val{};
    bool has_val = false;
    std::uint64_t scaffnet_hash_before = 0, scaffnet_hash_after = 0;
    long steps = 0;
};

TrainResult train_scaffnet(const Dataset& train, const Dataset* val, const RunConfig& cfg,
                           const std::string& out_dir);

// Stage 2: FusionNet (+ optional pose regressor) against the unsupervised
// objective; ScaffNet stays frozen unless the config opts into joint updates.
TrainResult train_fusionnet(const Dataset& train, const Dataset* val,
                            const LoadedCheckpoint& scaff_ck, const RunConfig& cfg,
                            const std::string& out_dir);

ScaffNetConfig scaffnet_config_for(const RunConfig& cfg);
FusionNetConfig fusionnet_config_for(const RunConfig& cfg);

struct InferResult {
    Tensor refined;   // final prediction
    Tensor topology;  // intermediate estimate
};
InferResult infer_depth(const ScaffNet& scaff, const FusionNet* fusion, const Tensor& image,
                        const SparseDepthMap& sparse);

// Predictors for evaluation pipelines.
Predictor scaffnet_predictor(const ScaffNet& net);
Predictor fusion_predictor(const ScaffNet& scaff, const FusionNet& fusion);

}  // namespace sf
