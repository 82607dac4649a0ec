#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "swinhaze/dataset.hpp"
#include "swinhaze/losses.hpp"
#include "swinhaze/metrics.hpp"
#include "swinhaze/network.hpp"

namespace swinhaze::pipeline {

struct TrainConfig {
    double learning_rate = 1e-5;
    int epochs = 1000;
    int batch_size = 1;
    std::uint64_t seed = 0;
    losses::LossConfig loss;
    bool use_guided = true;   // false zeroes the guided weight
    bool use_water = true;    // false zeroes the watershed weight
    bool desk_preset = false;
    bool deterministic = true;
    bool shuffle = false;     // seeded per-epoch reshuffle of the train split
    int checkpoint_every = 0; // epochs; 0 writes only the final checkpoint
    std::filesystem::path out_dir;  // empty: no log or checkpoint files

    // lr 1e-4, batch 2, 500 epochs.
    static TrainConfig desk();
    losses::LossConfig effective_loss() const;
    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const losses::LossReport& r);
nlohmann::json to_json(const metrics::MetricReport& r);

struct EpochLog {
    int epoch = 0;
    losses::LossReport loss;  // mean over the epoch's samples
};

struct CheckpointMeta {
    int epoch = 0;
    losses::LossReport train_loss;
    std::optional<metrics::MetricReport> eval;
    nlohmann::json config;
    int format_version = 1;
    std::filesystem::path path;
};

nlohmann::json to_json(const CheckpointMeta& m);

struct TrainResult {
    network::ParameterStore params;
    std::vector<EpochLog> history;
    std::vector<CheckpointMeta> checkpoints;
};

// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochLog&)>;

TrainResult train(const std::vector<Sample>& data, const network::NetworkConfig& net_cfg,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});
TrainResult train(const DatasetManifest& manifest, const network::NetworkConfig& net_cfg,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Mean loss of fixed parameters over samples (no parameter update).
losses::LossReport mean_loss(const std::vector<Sample>& data, const network::ParameterStore& params,
                             const network::NetworkConfig& net_cfg, const losses::LossConfig& loss);

// Dehazes one unit-range image; the output is in unit range.
ImageBuffer dehaze(const ImageBuffer& hazy, const network::ParameterStore& params,
                   const network::NetworkConfig& net_cfg);

struct EvalRow {
    std::string name;
    HazeLevel tag = HazeLevel::None;
    metrics::MetricReport metrics;
};

struct EvalTable {
    std::vector<EvalRow> rows;
    metrics::MetricReport mean;
    std::map<HazeLevel, metrics::MetricReport> per_level;  // only tagged rows
};

// Maps a hazy unit-range image to a prediction (either range tag).
using Predictor = std::function<ImageBuffer(const ImageBuffer&)>;

EvalTable evaluate_pairs(const std::vector<Sample>& data, const Predictor& predict);
EvalTable evaluate(const std::vector<Sample>& data, const network::ParameterStore& params,
                   const network::NetworkConfig& net_cfg);

// CSV header "pair,psnr,ssim,uqi", one row per pair, then per-level means and a
// final "mean" row.
void write_eval_csv(const EvalTable& table, const std::filesystem::path& path);
nlohmann::json to_json(const EvalTable& table);

struct ReferenceValues {
    double psnr = 0;
    double ssim = 0;
    std::optional<double> uqi;
};

struct AblationRow {
    std::string label;
    bool l2 = true;
    bool guided = false;
    bool water = false;
    bool swinrrdb = true;
    losses::LossReport final_loss;  // full-weight loss of the final parameters on the train split
    metrics::MetricReport metrics;  // on the evaluation samples
    std::optional<ReferenceValues> reference;
};

struct AblationTable {
    std::vector<AblationRow> loss_rows;  // L2, L2+water, L2+guided, L2+guided+water
    AblationRow swin_off;
    AblationRow swin_on;
};

AblationTable ablate(const std::vector<Sample>& train_data, const std::vector<Sample>& eval_data,
                     const network::NetworkConfig& net_cfg, const TrainConfig& cfg);
std::string format_ablation(const AblationTable& table);
nlohmann::json to_json(const AblationTable& table);

}  // namespace swinhaze::pipeline
