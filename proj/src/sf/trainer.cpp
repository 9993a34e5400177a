#include "sf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>

#include "sf/common.hpp"
#include "sf/losses.hpp"
#include "sf/rng.hpp"

namespace sf {

namespace fs = std::filesystem;
using nlohmann::json;

void Adam::init(const std::vector<NodePtr>& params) {
    t = 0;
    m.clear();
    v.clear();
    for (const auto& p : params) {
        m.push_back(p->value.zeros_like());
        v.push_back(p->value.zeros_like());
    }
}

void Adam::step(const std::vector<NodePtr>& params, const std::vector<Tensor>& grads, double lr) {
    require(params.size() == m.size() && grads.size() == m.size(), "adam: state size mismatch");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& pv = params[i]->value;
        for (std::size_t k = 0; k < pv.size(); ++k) {
            const double g = grads[i][k];
            m[i][k] = beta1 * m[i][k] + (1.0 - beta1) * g;
            v[i][k] = beta2 * v[i][k] + (1.0 - beta2) * g * g;
            const double mh = m[i][k] / bc1;
            const double vh = v[i][k] / bc2;
            pv[k] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

double lr_at_epoch(double base, const std::vector<int>& halve_epochs, int epoch) {
    double lr = base;
    for (int h : halve_epochs)
        if (epoch >= h) lr *= 0.5;
    return lr;
}

namespace {

struct BatchItem {
    double loss = 0.0;
    LossReport report;
    std::vector<Tensor> grads;
};

std::vector<BatchItem> run_parallel(int count, int workers,
                                    const std::function<BatchItem(int)>& fn) {
    std::vector<BatchItem> out(count);
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    const int n = std::min(workers, count);
    std::vector<std::future<void>> tasks;
    tasks.reserve(n);
    for (int w = 0; w < n; ++w)
        tasks.push_back(std::async(std::launch::async, [&, w] {
            for (int i = w; i < count; i += n) out[i] = fn(i);
        }));
    for (auto& t : tasks) t.get();
    return out;
}

std::vector<Tensor> extract_grads(const Gradients& g, const std::vector<NodePtr>& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) {
        const Tensor* gp = g.find(p);
        out.push_back(gp ? *gp : p->value.zeros_like());
    }
    return out;
}

// Deterministic reduction: element order, then parameter order.
std::vector<Tensor> mean_grads(const std::vector<BatchItem>& items,
                               const std::vector<NodePtr>& params) {
    std::vector<Tensor> acc;
    acc.reserve(params.size());
    for (const auto& p : params) acc.push_back(p->value.zeros_like());
    for (const BatchItem& it : items)
        for (std::size_t i = 0; i < acc.size(); ++i)
            for (std::size_t k = 0; k < acc[i].size(); ++k) acc[i][k] += it.grads[i][k];
    const double inv = 1.0 / static_cast<double>(items.size());
    for (Tensor& t : acc)
        for (double& v : t.data) v *= inv;
    return acc;
}

struct CropSpec {
    int x0 = 0, y0 = 0, w = 0, h = 0;
    bool flip = false;
};

CropSpec make_crop(const RunConfig& cfg, int W, int H, Rng& rng) {
    CropSpec c;
    c.w = cfg.crop_width > 0 ? std::min(cfg.crop_width, W) : W;
    c.h = cfg.crop_height > 0 ? std::min(cfg.crop_height, H) : H;
    if (c.w < W) c.x0 = static_cast<int>(rng.below(W - c.w + 1));
    if (c.h < H) c.y0 = static_cast<int>(rng.below(H - c.h + 1));
    if (cfg.hflip_augment) c.flip = rng.uniform() < 0.5;
    return c;
}

Tensor crop_tensor(const Tensor& t, const CropSpec& c) {
    Tensor out = Tensor::hwc(c.h, c.w, t.c);
    for (int y = 0; y < c.h; ++y)
        for (int x = 0; x < c.w; ++x)
            for (int ch = 0; ch < t.c; ++ch) {
                const int sx = c.flip ? c.x0 + c.w - 1 - x : c.x0 + x;
                out.at(y, x, ch) = t.at(c.y0 + y, sx, ch);
            }
    return out;
}

Intrinsics crop_intrinsics(const Intrinsics& k, const CropSpec& c) {
    Intrinsics out = k;
    out.width = c.w;
    out.height = c.h;
    out.cx = k.cx - c.x0;
    out.cy = k.cy - c.y0;
    if (c.flip) out.cx = (c.w - 1) - out.cx;
    return out;
}

// Mirroring the image plane conjugates camera-frame geometry by
// M = diag(-1,1,1): R' = M R M, t' = M t.
Pose flip_pose(const Pose& p) {
    Pose out = p;
    out.rotation[1] = -p.rotation[1];
    out.rotation[2] = -p.rotation[2];
    out.rotation[3] = -p.rotation[3];
    out.rotation[6] = -p.rotation[6];
    out.translation[0] = -p.translation[0];
    return out;
}

void apply_crop(Dataset::Sample& s, const CropSpec& c) {
    s.image = crop_tensor(s.image, c);
    s.depth_gt = crop_tensor(s.depth_gt, c);
    s.gt_valid = crop_tensor(s.gt_valid, c);
    s.sparse.values = crop_tensor(s.sparse.values, c);
    s.sparse.validity = crop_tensor(s.sparse.validity, c);
    s.intrinsics = crop_intrinsics(s.intrinsics, c);
}

void save_train_checkpoint(const std::string& path, const std::string& kind, const RunConfig& cfg,
                           long step, int epoch, const Rng& rng,
                           const std::vector<std::pair<std::string, const ParamStore*>>& stores,
                           const Adam& adam, const std::vector<NodePtr>& opt_params,
                           const json& net_meta) {
    json meta = net_meta;
    meta["run_config"] = cfg.serialize();
    meta["step"] = step;
    meta["epoch"] = epoch;
    meta["adam_t"] = adam.t;
    json rng_state = json::array();
    for (std::uint64_t s : rng.state()) rng_state.push_back(std::to_string(s));
    meta["rng_state"] = rng_state;

    std::vector<std::pair<std::string, Tensor>> extra;
    for (std::size_t i = 0; i < opt_params.size(); ++i) {
        extra.emplace_back("adam_m/" + std::to_string(i), adam.m[i]);
        extra.emplace_back("adam_v/" + std::to_string(i), adam.v[i]);
    }
    save_checkpoint(path, kind, meta, stores, extra);
}

void maybe_resume_adam(const LoadedCheckpoint& ck, Adam& adam,
                       const std::vector<NodePtr>& opt_params) {
    adam.t = ck.meta.at("adam_t").get<long>();
    for (std::size_t i = 0; i < opt_params.size(); ++i) {
        const auto mi = ck.tensors.find("adam_m/" + std::to_string(i));
        const auto vi = ck.tensors.find("adam_v/" + std::to_string(i));
        require(mi != ck.tensors.end() && vi != ck.tensors.end(),
                "checkpoint: missing optimizer state");
        adam.m[i] = mi->second;
        adam.v[i] = vi->second;
    }
}

}  // namespace

ScaffNetConfig scaffnet_config_for(const RunConfig& cfg) {
    ScaffNetConfig sc = cfg.preset == "paper"            ? ScaffNetConfig::paper_preset()
                        : cfg.preset == "paper-scanline" ? ScaffNetConfig::paper_preset_scanline()
                                                         : ScaffNetConfig::tiny_preset();
    if (!cfg.spp_kernels.empty()) sc.spp.kernel_sizes = parse_int_list(cfg.spp_kernels, "spp_kernels");
    sc.use_spp = cfg.use_spp;
    return sc;
}

FusionNetConfig fusionnet_config_for(const RunConfig& cfg) {
    FusionNetConfig fc = cfg.preset == "tiny" ? FusionNetConfig::tiny_preset()
                                              : FusionNetConfig::paper_preset();
    fc.head = cfg.head == "direct" ? FusionHead::Direct : FusionHead::AlphaBeta;
    fc.d_min = cfg.d_min;
    fc.d_max = cfg.d_max;
    return fc;
}

EvalReport evaluate_dataset(const Dataset& ds, const Predictor& predict, const DepthRange& range) {
    EvalReport rep;
    double ae = 0, se = 0, iae = 0, ise = 0;
    long n = 0;
    for (int i = 0; i < ds.size(); ++i) {
        const Dataset::Sample s = ds.sample(i);
        const Tensor pred = predict(s);
        EvalReport::Row row;
        row.sequence = s.sequence;
        row.index = s.index;
        row.m = evaluate(pred, s.depth_gt, s.gt_valid, range);
        rep.frames.push_back(row);
        // Pool raw sums for the aggregate.
        for (std::size_t k = 0; k < pred.size(); ++k) {
            if (s.gt_valid[k] == 0.0) continue;
            const double gt = s.depth_gt[k];
            if (gt < range.min_m || gt > range.max_m) continue;
            const double e = pred[k] - gt;
            const double ie = 1.0 / pred[k] - 1.0 / gt;
            ae += std::fabs(e);
            se += e * e;
            iae += std::fabs(ie);
            ise += ie * ie;
            ++n;
        }
    }
    require(n > 0, "evaluate_dataset: no valid pixels");
    rep.aggregate.valid_count = n;
    rep.aggregate.mae = ae / n * 1000.0;
    rep.aggregate.rmse = std::sqrt(se / n) * 1000.0;
    rep.aggregate.imae = iae / n * 1000.0;
    rep.aggregate.irmse = std::sqrt(ise / n) * 1000.0;
    return rep;
}

void write_metrics_csv(const std::string& path, const EvalReport& report) {
    std::ofstream f(path, std::ios::trunc);
    require(f.good(), "metrics: cannot write " + path);
    f << "sequence,index,mae_mm,rmse_mm,imae_per_km,irmse_per_km,valid_count\n";
    for (const auto& r : report.frames)
        f << r.sequence << "," << r.index << "," << r.m.mae << "," << r.m.rmse << "," << r.m.imae
          << "," << r.m.irmse << "," << r.m.valid_count << "\n";
    f << "aggregate,," << report.aggregate.mae << "," << report.aggregate.rmse << ","
      << report.aggregate.imae << "," << report.aggregate.irmse << ","
      << report.aggregate.valid_count << "\n";
}

void write_metrics_json(const std::string& path, const EvalReport& report) {
    json j;
    j["aggregate"] = {{"mae_mm", report.aggregate.mae},
                      {"rmse_mm", report.aggregate.rmse},
                      {"imae_per_km", report.aggregate.imae},
                      {"irmse_per_km", report.aggregate.irmse},
                      {"valid_count", report.aggregate.valid_count}};
    j["frames"] = json::array();
    for (const auto& r : report.frames)
        j["frames"].push_back({{"sequence", r.sequence},
                               {"index", r.index},
                               {"mae_mm", r.m.mae},
                               {"rmse_mm", r.m.rmse},
                               {"imae_per_km", r.m.imae},
                               {"irmse_per_km", r.m.irmse},
                               {"valid_count", r.m.valid_count}});
    std::ofstream f(path, std::ios::trunc);
    require(f.good(), "metrics: cannot write " + path);
    f << j.dump(2) << "\n";
}

void resample_sparse(Dataset::Sample& s, SamplingKind kind, int points, std::uint64_t seed) {
    SamplingStrategy strat;
    strat.kind = kind;
    strat.target_points = points;
    s.sparse = make_sparse(s.depth_gt, &s.image, strat, seed);
}

InferResult infer_depth(const ScaffNet& scaff, const FusionNet* fusion, const Tensor& image,
                        const SparseDepthMap& sparse) {
    InferResult out;
    out.topology = scaff.infer(sparse_input_tensor(sparse));
    if (fusion) {
        const FusionOutput fo = fusion->forward(image, sparse.values, out.topology);
        out.refined = fo.depth->value;
    } else {
        out.refined = out.topology;
    }
    return out;
}

Predictor scaffnet_predictor(const ScaffNet& net) {
    return [&net](const Dataset::Sample& s) {
        return net.infer(sparse_input_tensor(s.sparse));
    };
}

Predictor fusion_predictor(const ScaffNet& scaff, const FusionNet& fusion) {
    return [&scaff, &fusion](const Dataset::Sample& s) {
        return infer_depth(scaff, &fusion, s.image, s.sparse).refined;
    };
}

// ------------------------------------------------------------- stage 1

TrainResult train_scaffnet(const Dataset& train, const Dataset* val, const RunConfig& cfg,
                           const std::string& out_dir) {
    require(train.size() > 0, "train_scaffnet: empty dataset");
    fs::create_directories(out_dir);

    ScaffNet net(scaffnet_config_for(cfg), cfg.seed);
    std::vector<NodePtr> params;
    for (const auto& [name, p] : net.params().items()) params.push_back(p);

    Adam adam;
    adam.beta1 = cfg.beta1;
    adam.beta2 = cfg.beta2;
    adam.eps = cfg.adam_eps;
    adam.init(params);

    long step = 0;
    int start_epoch = 0;
    if (!cfg.resume_from.empty()) {
        const LoadedCheckpoint ck = load_checkpoint(cfg.resume_from);
        require(ck.kind == "scaffnet", "resume: checkpoint is not a scaffnet checkpoint");
        ck.fill("scaffnet", net.params());
        maybe_resume_adam(ck, adam, params);
        step = ck.meta.at("step").get<long>();
        start_epoch = ck.meta.at("epoch").get<int>() + 1;
    }

    std::ofstream curve(out_dir + "/loss_curve.csv",
                        start_epoch == 0 ? std::ios::trunc : std::ios::app);
    if (start_epoch == 0) curve << "step,epoch,l0\n";
    std::ofstream valcsv(out_dir + "/val_metrics.csv",
                         start_epoch == 0 ? std::ios::trunc : std::ios::app);
    if (start_epoch == 0) valcsv << "epoch,mae_mm,rmse_mm,imae_per_km,irmse_per_km\n";
    {
        std::ofstream snap(out_dir + "/run_config.txt", std::ios::trunc);
        snap << cfg.serialize();
    }

    const int workers = cfg.deterministic ? 1 : cfg.workers;
    TrainResult result;
    Rng ckpt_rng(derive_seed(cfg.seed, "train-rng"));
    const json net_meta = {{"scaffnet_config", scaffnet_config_to_json(net.config())}};

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg.learning_rate, cfg.lr_halve_epochs, epoch);
        std::vector<int> order(train.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0;
        int epoch_batches = 0;
        for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const int bsz = static_cast<int>(std::min<std::size_t>(cfg.batch_size, order.size() - off));
            auto fn = [&](int b) {
                BatchItem item;
                Dataset::Sample s = train.sample(order[off + b]);
                Rng aug(derive_seed(cfg.seed, "aug",
                                    static_cast<std::uint64_t>(epoch) * train.size() + off + b));
                const CropSpec crop = make_crop(cfg, train.width(), train.height(), aug);
                apply_crop(s, crop);
                NodePtr input = make_const(sparse_input_tensor(s.sparse));
                NodePtr d0 = net.forward(input);
                NodePtr loss = supervised_l0(d0, s.depth_gt);
                item.loss = scalar_of(loss);
                item.report.l0 = item.loss;
                item.report.total = item.loss;
                Gradients g = backward(loss);
                item.grads = extract_grads(g, params);
                return item;
            };
            const std::vector<BatchItem> items = run_parallel(bsz, workers, fn);
            const std::vector<Tensor> grads = mean_grads(items, params);
            adam.step(params, grads, lr);
            ++step;
            double mean_loss = 0;
            for (const auto& it : items) mean_loss += it.loss;
            mean_loss /= bsz;
            epoch_loss += mean_loss;
            ++epoch_batches;
            curve << step << "," << epoch << "," << mean_loss << "\n";
        }

        LossReport er;
        er.l0 = epoch_batches ? epoch_loss / epoch_batches : 0.0;
        er.total = er.l0;
        result.per_epoch.push_back(er);

        if (val) {
            const EvalReport ev =
                evaluate_dataset(*val, scaffnet_predictor(net), {cfg.eval_min, cfg.eval_max});
            valcsv << epoch << "," << ev.aggregate.mae << "," << ev.aggregate.rmse << ","
                   << ev.aggregate.imae << "," << ev.aggregate.irmse << "\n";
            result.final_val = ev.aggregate;
            result.has_val = true;
        }

        if ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_epoch%03d.ckpt", epoch);
            save_train_checkpoint(out_dir + "/" + name, "scaffnet", cfg, step, epoch, ckpt_rng,
                                  {{"scaffnet", &net.params()}}, adam, params, net_meta);
        }
    }

    result.final_checkpoint = out_dir + "/final.ckpt";
    save_train_checkpoint(result.final_checkpoint, "scaffnet", cfg, step, cfg.epochs - 1, ckpt_rng,
                          {{"scaffnet", &net.params()}}, adam, params, net_meta);
    result.steps = step;
    return result;
}

// ------------------------------------------------------------- stage 2

TrainResult train_fusionnet(const Dataset& train, const Dataset* val,
                            const LoadedCheckpoint& scaff_ck, const RunConfig& cfg,
                            const std::string& out_dir) {
    const std::vector<int> centers = train.triplet_centers();
    require(!centers.empty(), "train_fusionnet: dataset has no triplets");
    fs::create_directories(out_dir);

    ScaffNet scaff = scaffnet_from_checkpoint(scaff_ck);
    FusionNet fusion(fusionnet_config_for(cfg), cfg.seed);
    const bool learned_pose = cfg.pose_source == "learned";
    PoseNet posenet(PoseNetConfig{}, cfg.seed);

    std::vector<NodePtr> params;
    for (const auto& [name, p] : fusion.params().items()) params.push_back(p);
    if (learned_pose)
        for (const auto& [name, p] : posenet.params().items()) params.push_back(p);
    if (!cfg.freeze_scaffnet)
        for (const auto& [name, p] : scaff.params().items()) params.push_back(p);

    Adam adam;
    adam.beta1 = cfg.beta1;
    adam.beta2 = cfg.beta2;
    adam.eps = cfg.adam_eps;
    adam.init(params);

    long step = 0;
    int start_epoch = 0;
    if (!cfg.resume_from.empty()) {
        const LoadedCheckpoint ck = load_checkpoint(cfg.resume_from);
        require(ck.kind == "fusionnet", "resume: checkpoint is not a fusionnet checkpoint");
        ck.fill("fusionnet", fusion.params());
        ck.fill("scaffnet", scaff.params());
        if (learned_pose) ck.fill("posenet", posenet.params());
        maybe_resume_adam(ck, adam, params);
        step = ck.meta.at("step").get<long>();
        start_epoch = ck.meta.at("epoch").get<int>() + 1;
    }

    const long total_steps =
        static_cast<long>((centers.size() + cfg.batch_size - 1) / cfg.batch_size) * cfg.epochs;
    const long tp_start = cfg.resolve_tp_start(total_steps);

    TrainResult result;
    result.scaffnet_hash_before = scaff.params().content_hash();

    std::ofstream curve(out_dir + "/loss_curve.csv",
                        start_epoch == 0 ? std::ios::trunc : std::ios::app);
    if (start_epoch == 0) curve << "step,epoch,l_ph,l_sz,l_sm,l_tp,total,w_coverage,tp_active\n";
    std::ofstream valcsv(out_dir + "/val_metrics.csv",
                         start_epoch == 0 ? std::ios::trunc : std::ios::app);
    if (start_epoch == 0) valcsv << "epoch,mae_mm,rmse_mm,imae_per_km,irmse_per_km\n";
    {
        std::ofstream snap(out_dir + "/run_config.txt", std::ios::trunc);
        snap << cfg.serialize();
    }

    const int workers = cfg.deterministic ? 1 : cfg.workers;
    Rng ckpt_rng(derive_seed(cfg.seed, "train-rng"));
    json net_meta = {{"scaffnet_config", scaffnet_config_to_json(scaff.config())},
                     {"fusionnet_config", fusionnet_config_to_json(fusion.config())},
                     {"learned_pose", learned_pose}};

    std::vector<std::pair<std::string, const ParamStore*>> stores = {
        {"fusionnet", &fusion.params()}, {"scaffnet", &scaff.params()}};
    if (learned_pose) stores.emplace_back("posenet", &posenet.params());

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg.learning_rate, cfg.lr_halve_epochs, epoch);
        std::vector<int> order = centers;
        Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        LossReport epoch_acc;
        int epoch_batches = 0;
        for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const int bsz = static_cast<int>(std::min<std::size_t>(cfg.batch_size, order.size() - off));
            auto fn = [&](int b) {
                BatchItem item;
                Dataset::Triplet t = train.triplet(order[off + b]);
                Rng aug(derive_seed(cfg.seed, "aug",
                                    static_cast<std::uint64_t>(epoch) * train.size() + off + b));
                const CropSpec crop = make_crop(cfg, train.width(), train.height(), aug);
                apply_crop(t.prev, crop);
                apply_crop(t.center, crop);
                apply_crop(t.next, crop);
                if (crop.flip) {
                    t.rel_prev = flip_pose(t.rel_prev);
                    t.rel_next = flip_pose(t.rel_next);
                }

                // Topology estimate; constant unless jointly finetuning.
                NodePtr d0;
                if (cfg.freeze_scaffnet) {
                    d0 = make_const(scaff.infer(sparse_input_tensor(t.center.sparse)));
                } else {
                    d0 = scaff.forward(make_const(sparse_input_tensor(t.center.sparse)));
                }
                const Tensor d0_value = d0->value;

                const FusionOutput fo =
                    fusion.forward(make_const(t.center.image), make_const(t.center.sparse.values), d0);

                PoseNodes pose_prev, pose_next;
                if (learned_pose) {
                    pose_prev = posenet.forward(t.center.image, t.prev.image);
                    pose_next = posenet.forward(t.center.image, t.next.image);
                } else {
                    pose_prev = pose_nodes_from(t.rel_prev);
                    pose_next = pose_nodes_from(t.rel_next);
                }

                const Intrinsics& K = t.center.intrinsics;
                std::vector<WarpResult> recon_pred;
                recon_pred.push_back(reconstruct_node(t.prev.image, fo.depth, K, pose_prev));
                recon_pred.push_back(reconstruct_node(t.next.image, fo.depth, K, pose_next));

                // Prior reconstructions never carry gradients.
                PoseNodes cp{make_const(pose_prev.rotvec->value), make_const(pose_prev.trans->value)};
                PoseNodes cn{make_const(pose_next.rotvec->value), make_const(pose_next.trans->value)};
                std::vector<WarpResult> recon_prior;
                recon_prior.push_back(reconstruct_node(t.prev.image, make_const(d0_value), K, cp));
                recon_prior.push_back(reconstruct_node(t.next.image, make_const(d0_value), K, cn));

                StageTwoParts parts;
                parts.l_ph = photometric_loss(t.center.image, recon_pred, cfg.weights.w_co,
                                              cfg.weights.w_st);
                parts.l_sz = sparse_consistency_loss(fo.depth, t.center.sparse);
                parts.l_sm = smoothness_loss(fo.depth, t.center.image);
                const PriorMask pm = prior_mask(t.center.image, recon_pred, recon_prior);
                parts.l_tp = topology_prior_loss(fo.depth, d0_value, pm);
                parts.w_coverage = pm.coverage;

                TotalLoss tl = total_loss(parts, cfg.weights, step, tp_start);
                item.loss = tl.report.total;
                item.report = tl.report;
                Gradients g = backward(tl.total);
                item.grads = extract_grads(g, params);
                return item;
            };
            const std::vector<BatchItem> items = run_parallel(bsz, workers, fn);
            const std::vector<Tensor> grads = mean_grads(items, params);
            adam.step(params, grads, lr);
            ++step;

            LossReport mean;
            for (const auto& it : items) {
                mean.l_ph += it.report.l_ph;
                mean.l_sz += it.report.l_sz;
                mean.l_sm += it.report.l_sm;
                mean.l_tp += it.report.l_tp;
                mean.total += it.report.total;
                mean.w_coverage += it.report.w_coverage;
            }
            const double inv = 1.0 / bsz;
            mean.l_ph *= inv;
            mean.l_sz *= inv;
            mean.l_sm *= inv;
            mean.l_tp *= inv;
            mean.total *= inv;
            mean.w_coverage *= inv;
            mean.tp_active = items[0].report.tp_active;
            curve << step << "," << epoch << "," << mean.l_ph << "," << mean.l_sz << ","
                  << mean.l_sm << "," << mean.l_tp << "," << mean.total << "," << mean.w_coverage
                  << "," << (mean.tp_active ? 1 : 0) << "\n";

            epoch_acc.l_ph += mean.l_ph;
            epoch_acc.l_sz += mean.l_sz;
            epoch_acc.l_sm += mean.l_sm;
            epoch_acc.l_tp += mean.l_tp;
            epoch_acc.total += mean.total;
            epoch_acc.w_coverage += mean.w_coverage;
            ++epoch_batches;
        }

        if (epoch_batches) {
            const double inv = 1.0 / epoch_batches;
            epoch_acc.l_ph *= inv;
            epoch_acc.l_sz *= inv;
            epoch_acc.l_sm *= inv;
            epoch_acc.l_tp *= inv;
            epoch_acc.total *= inv;
            epoch_acc.w_coverage *= inv;
        }
        result.per_epoch.push_back(epoch_acc);

        if (val) {
            const EvalReport ev = evaluate_dataset(*val, fusion_predictor(scaff, fusion),
                                                   {cfg.eval_min, cfg.eval_max});
            valcsv << epoch << "," << ev.aggregate.mae << "," << ev.aggregate.rmse << ","
                   << ev.aggregate.imae << "," << ev.aggregate.irmse << "\n";
            result.final_val = ev.aggregate;
            result.has_val = true;
        }

        if ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_epoch%03d.ckpt", epoch);
            save_train_checkpoint(out_dir + "/" + name, "fusionnet", cfg, step, epoch, ckpt_rng,
                                  stores, adam, params, net_meta);
        }
    }

    result.scaffnet_hash_after = scaff.params().content_hash();
    if (cfg.freeze_scaffnet)
        require(result.scaffnet_hash_before == result.scaffnet_hash_after,
                "train_fusionnet: frozen scaffnet weights changed");

    result.final_checkpoint = out_dir + "/final.ckpt";
    save_train_checkpoint(result.final_checkpoint, "fusionnet", cfg, step, cfg.epochs - 1, ckpt_rng,
                          stores, adam, params, net_meta);
    result.steps = step;
    return result;
}

}  // namespace sf
