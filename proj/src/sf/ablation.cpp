#include "sf/ablation.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sf/common.hpp"
#include "sf/rng.hpp"
#include "sf/trainer.hpp"

namespace sf {

namespace fs = std::filesystem;

std::string AblationReport::to_markdown() const {
    std::stringstream s;
    s << "# Ablation: " << suite << "\n\n";
    s << "| variant | MAE (mm) | RMSE (mm) | iMAE (1/km) | iRMSE (1/km) |\n";
    s << "|---|---|---|---|---|\n";
    for (const auto& r : rows)
        s << "| " << r.variant << " | " << r.metrics.mae << " | " << r.metrics.rmse << " | "
          << r.metrics.imae << " | " << r.metrics.irmse << " |\n";
    s << "\nverdict: " << (pass ? "pass" : "fail") << " (" << verdict << ")\n";
    return s.str();
}

std::string AblationReport::to_csv() const {
    std::stringstream s;
    s << "variant,mae_mm,rmse_mm,imae_per_km,irmse_per_km\n";
    for (const auto& r : rows)
        s << r.variant << "," << r.metrics.mae << "," << r.metrics.rmse << "," << r.metrics.imae
          << "," << r.metrics.irmse << "\n";
    s << "verdict," << (pass ? "pass" : "fail") << ",,,\n";
    return s.str();
}

namespace {

void write_report(const AblationReport& rep, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream md(out_dir + "/report.md", std::ios::trunc);
    md << rep.to_markdown();
    std::ofstream csv(out_dir + "/report.csv", std::ios::trunc);
    csv << rep.to_csv();
}

const Dataset& val_or_train(const Dataset& train, const Dataset* val) {
    return val ? *val : train;
}

AblationReport spp_on_off(const RunConfig& base, const std::string& out_dir) {
    const Dataset train = Dataset::load(base.dataset);
    Dataset val_storage;
    const Dataset* val = nullptr;
    if (!base.val_dataset.empty()) {
        val_storage = Dataset::load(base.val_dataset);
        val = &val_storage;
    }

    AblationReport rep;
    rep.suite = "spp-on-off";
    for (const bool with_spp : {true, false}) {
        RunConfig cfg = base;
        cfg.stage = "scaffnet";
        cfg.use_spp = with_spp;
        const std::string dir = out_dir + (with_spp ? "/with_spp" : "/without_spp");
        train_scaffnet(train, nullptr, cfg, dir);
        const LoadedCheckpoint ck = load_checkpoint(dir + "/final.ckpt");
        const ScaffNet net = scaffnet_from_checkpoint(ck);
        const EvalReport ev = evaluate_dataset(val_or_train(train, val), scaffnet_predictor(net),
                                               {cfg.eval_min, cfg.eval_max});
        rep.rows.push_back({with_spp ? "scaffnet_with_spp" : "scaffnet_without_spp", ev.aggregate});
    }
    const double with = rep.rows[0].metrics.mae;
    const double without = rep.rows[1].metrics.mae;
    const double margin = (without - with) / without;
    rep.pass = with < without && margin >= 0.05;
    std::stringstream v;
    v << "MAE with SPP " << with << " vs without " << without << "; relative margin " << margin;
    rep.verdict = v.str();
    return rep;
}

AblationReport density_sweep(const RunConfig& base, const std::string& out_dir) {
    require(!base.scaffnet_checkpoint.empty() && !base.fusionnet_checkpoint.empty(),
            "density-sweep: set scaffnet_checkpoint and fusionnet_checkpoint in the config");
    const Dataset eval_ds =
        Dataset::load(base.val_dataset.empty() ? base.dataset : base.val_dataset);

    const LoadedCheckpoint sck = load_checkpoint(base.scaffnet_checkpoint);
    const ScaffNet scaff = scaffnet_from_checkpoint(sck);
    const LoadedCheckpoint fck = load_checkpoint(base.fusionnet_checkpoint);
    const FusionNet fusion = fusionnet_from_checkpoint(fck);
    // The frozen estimator embedded in the stage-2 checkpoint drives the
    // refined predictions during the sweep.
    const ScaffNet scaff_for_fusion = scaffnet_from_checkpoint(fck);

    AblationReport rep;
    rep.suite = "density-sweep";
    const double densities[] = {0.005, 0.0015, 0.0005};
    const char* labels[] = {"0.5%", "0.15%", "0.05%"};
    const int total = eval_ds.width() * eval_ds.height();
    std::vector<double> scaff_mae, fusion_mae;
    for (int di = 0; di < 3; ++di) {
        const int points = std::max(1, static_cast<int>(std::lround(densities[di] * total)));
        auto with_density = [&](const Predictor& p) {
            return [&, p, di, points](const Dataset::Sample& s_in) {
                Dataset::Sample s = s_in;
                resample_sparse(s, SamplingKind::Uniform, points,
                                derive_seed(base.seed, "density-sweep",
                                            static_cast<std::uint64_t>(di * 100000 + s.sequence * 10000 +
                                                                       s.index)));
                return p(s);
            };
        };
        const EvalReport es = evaluate_dataset(eval_ds, with_density(scaffnet_predictor(scaff)),
                                               {base.eval_min, base.eval_max});
        const EvalReport ef =
            evaluate_dataset(eval_ds, with_density(fusion_predictor(scaff_for_fusion, fusion)),
                             {base.eval_min, base.eval_max});
        rep.rows.push_back({std::string("scaffnet_") + labels[di], es.aggregate});
        rep.rows.push_back({std::string("fusionnet_") + labels[di], ef.aggregate});
        scaff_mae.push_back(es.aggregate.mae);
        fusion_mae.push_back(ef.aggregate.mae);
    }
    const bool scaff_mono = scaff_mae[0] < scaff_mae[1] && scaff_mae[1] < scaff_mae[2];
    const bool fusion_mono = fusion_mae[0] < fusion_mae[1] && fusion_mae[1] < fusion_mae[2];
    const double scaff_deg = scaff_mae[2] / scaff_mae[0];
    const double fusion_deg = fusion_mae[2] / fusion_mae[0];
    rep.pass = scaff_mono && fusion_mono && scaff_deg > fusion_deg;
    std::stringstream v;
    v << "MAE must rise as density falls; scaffnet relative degradation " << scaff_deg
      << " vs fusionnet " << fusion_deg;
    rep.verdict = v.str();
    return rep;
}

AblationReport output_head(const RunConfig& base, const std::string& out_dir) {
    require(!base.scaffnet_checkpoint.empty(),
            "output-head: set scaffnet_checkpoint in the config");
    const Dataset train = Dataset::load(base.dataset);
    Dataset val_storage;
    const Dataset* val = nullptr;
    if (!base.val_dataset.empty()) {
        val_storage = Dataset::load(base.val_dataset);
        val = &val_storage;
    }
    const LoadedCheckpoint sck = load_checkpoint(base.scaffnet_checkpoint);

    AblationReport rep;
    rep.suite = "output-head";
    for (const char* head : {"alpha-beta", "direct"}) {
        RunConfig cfg = base;
        cfg.stage = "fusionnet";
        cfg.head = head;
        const std::string dir = out_dir + "/" + head;
        train_fusionnet(train, nullptr, sck, cfg, dir);
        const LoadedCheckpoint fck = load_checkpoint(dir + "/final.ckpt");
        const ScaffNet scaff = scaffnet_from_checkpoint(fck);
        const FusionNet fusion = fusionnet_from_checkpoint(fck);
        const EvalReport ev = evaluate_dataset(val_or_train(train, val),
                                               fusion_predictor(scaff, fusion),
                                               {cfg.eval_min, cfg.eval_max});
        rep.rows.push_back({head, ev.aggregate});
    }
    rep.pass = rep.rows[0].metrics.mae <= rep.rows[1].metrics.mae;
    std::stringstream v;
    v << "alpha-beta MAE " << rep.rows[0].metrics.mae << " must not exceed direct-map MAE "
      << rep.rows[1].metrics.mae;
    rep.verdict = v.str();
    return rep;
}

}  // namespace

AblationReport run_ablation(const std::string& suite, const RunConfig& base,
                            const std::string& out_dir) {
    AblationReport rep;
    if (suite == "spp-on-off") rep = spp_on_off(base, out_dir);
    else if (suite == "density-sweep") rep = density_sweep(base, out_dir);
    else if (suite == "output-head") rep = output_head(base, out_dir);
    else throw Error("unknown ablation suite '" + suite +
                     "' (expected spp-on-off, density-sweep or output-head)");
    write_report(rep, out_dir);
    return rep;
}

}  // namespace sf
