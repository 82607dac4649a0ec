#include "swinhaze/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "swinhaze/checkpoint.hpp"
#include "swinhaze/error.hpp"
#include "swinhaze/imaging.hpp"
#include "swinhaze/optim.hpp"

namespace swinhaze::pipeline {

namespace {

using network::NetworkConfig;
using network::ParameterStore;

void accumulate(losses::LossReport& acc, const losses::LossReport& r, double scale) {
    acc.l2 += scale * r.l2;
    acc.guided += scale * r.guided;
    acc.water += scale * r.water;
    acc.total += scale * r.total;
    acc.weights = r.weights;
}

metrics::MetricReport mean_of(const std::vector<metrics::MetricReport>& rows) {
    metrics::MetricReport m;
    if (rows.empty()) return m;
    for (const auto& r : rows) {
        m.psnr += r.psnr;
        m.ssim += r.ssim;
        m.uqi += r.uqi;
    }
    const double n = static_cast<double>(rows.size());
    m.psnr /= n;
    m.ssim /= n;
    m.uqi /= n;
    return m;
}

void check_samples(const std::vector<Sample>& data, const NetworkConfig& net_cfg) {
    if (data.empty()) fail(ErrorCode::EmptyDataset, "no training samples");
    const ImageBuffer& first = data.front().hazy;
    for (const Sample& s : data) {
        if (!s.hazy.same_shape(first) || !s.clear.same_shape(first)) {
            fail(ErrorCode::ShapeMismatch, "training samples must share one shape (" + s.name + ")");
        }
    }
    if (first.channels() != 3) fail(ErrorCode::InvalidChannels, "training images must be RGB");
    net_cfg.validate_input(first.height(), first.width());
}

std::string epoch_name(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04d", epoch);
    return buf;
}

}  // namespace

TrainConfig TrainConfig::desk() {
    TrainConfig cfg;
    cfg.learning_rate = 1e-4;
    cfg.batch_size = 2;
    cfg.epochs = 500;
    cfg.desk_preset = true;
    return cfg;
}

losses::LossConfig TrainConfig::effective_loss() const {
    losses::LossConfig l = loss;
    if (!use_guided) l.weights.guided = 0.0;
    if (!use_water) l.weights.water = 0.0;
    return l;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) fail(ErrorCode::ConfigError, "learning rate must be positive");
    if (epochs < 1) fail(ErrorCode::ConfigError, "epochs must be at least 1");
    if (batch_size < 1) fail(ErrorCode::ConfigError, "batch size must be at least 1");
    if (checkpoint_every < 0) fail(ErrorCode::ConfigError, "checkpoint interval must be non-negative");
    if (loss.weights.l2 < 0 || loss.weights.guided < 0 || loss.weights.water < 0) {
        fail(ErrorCode::ConfigError, "loss weights must be non-negative");
    }
}

nlohmann::json to_json(const TrainConfig& cfg) {
    const auto& l = cfg.loss;
    return {
        {"learning_rate", cfg.learning_rate},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"seed", cfg.seed},
        {"lambda_l2", l.weights.l2},
        {"lambda_guided", l.weights.guided},
        {"lambda_water", l.weights.water},
        {"guided_radius", l.guided_radius},
        {"guided_eps", l.guided_eps},
        {"coef_smoothing", l.coef_smoothing},
        {"water_sigma", l.water.sigma},
        {"water_grad", l.water_grad == losses::WaterGrad::None ? "none" : "straight_through"},
        {"water_metric", l.water_metric == losses::WaterMetric::L2 ? "l2" : "l1"},
        {"use_guided", cfg.use_guided},
        {"use_water", cfg.use_water},
        {"desk_preset", cfg.desk_preset},
        {"deterministic", cfg.deterministic},
        {"shuffle", cfg.shuffle},
        {"checkpoint_every", cfg.checkpoint_every},
    };
}

nlohmann::json to_json(const losses::LossReport& r) {
    return {{"l2", r.l2}, {"guided", r.guided}, {"water", r.water}, {"total", r.total}};
}

nlohmann::json to_json(const metrics::MetricReport& r) {
    return {{"psnr", r.psnr}, {"ssim", r.ssim}, {"uqi", r.uqi}};
}

nlohmann::json to_json(const CheckpointMeta& m) {
    nlohmann::json j = {{"epoch", m.epoch},
                        {"train_loss", to_json(m.train_loss)},
                        {"config", m.config},
                        {"format_version", m.format_version}};
    if (m.eval) j["eval"] = to_json(*m.eval);
    return j;
}

TrainResult train(const std::vector<Sample>& data, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    net_cfg.validate();
    check_samples(data, net_cfg);

    TrainResult result;
    result.params = network::init_params(net_cfg, cfg.seed);
    optim::Adam adam(result.params, {cfg.learning_rate});
    const losses::LossConfig loss_cfg = cfg.effective_loss();
    const nlohmann::json snapshot = {{"network", network::config_to_json(net_cfg)}, {"train", to_json(cfg)}};

    std::ofstream log;
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        log.open(cfg.out_dir / "train_log.jsonl", std::ios::trunc);
        if (!log) fail(ErrorCode::IoError, "cannot write " + (cfg.out_dir / "train_log.jsonl").string());
    }
    auto write_checkpoint = [&](int epoch, const losses::LossReport& loss, const std::string& name) {
        CheckpointMeta meta;
        meta.epoch = epoch;
        meta.train_loss = loss;
        meta.config = snapshot;
        meta.format_version = network::kCheckpointFormat;
        if (!cfg.out_dir.empty()) {
            meta.path = network::save_checkpoint(cfg.out_dir / name, result.params, net_cfg, cfg.seed, to_json(meta));
        }
        result.checkpoints.push_back(std::move(meta));
    };

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5eedULL);
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
        losses::LossReport epoch_loss;
        int step = 0;
        for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
            const std::size_t end = std::min(order.size(), start + batch);
            std::vector<ImageBuffer> inputs;
            for (std::size_t i = start; i < end; ++i) inputs.push_back(data[order[i]].hazy);
            const double inv = 1.0 / static_cast<double>(end - start);

            result.params.zero_grad();
            nn::Tensor out;
            try {
                out = network::forward(network::to_tensor(inputs), result.params, net_cfg);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NumericalError) throw;
                fail(ErrorCode::NumericalError, "epoch " + std::to_string(epoch) + " step " +
                                                    std::to_string(step) + ": " + e.what());
            }
            const auto preds = network::to_images(out);
            std::vector<nn::real> seed(out.size());
            const std::size_t per = out.size() / preds.size();
            for (std::size_t b = 0; b < preds.size(); ++b) {
                const Sample& s = data[order[start + b]];
                const auto l = losses::total_loss(preds[b], s.clear, loss_cfg);
                if (!std::isfinite(l.report.total)) {
                    fail(ErrorCode::NumericalError, "non-finite loss at epoch " + std::to_string(epoch) +
                                                        " step " + std::to_string(step) + " (" + s.name + ")");
                }
                accumulate(epoch_loss, l.report, 1.0 / static_cast<double>(data.size()));
                for (std::size_t i = 0; i < per; ++i) seed[b * per + i] = static_cast<nn::real>(inv * l.grad.data[i]);
            }
            out.backward(seed);
            adam.step();
        }

        EpochLog entry{epoch, epoch_loss};
        result.history.push_back(entry);
        if (log) {
            nlohmann::json j = to_json(epoch_loss);
            j["epoch"] = epoch;
            log << j.dump() << '\n';
            log.flush();
        }
        const bool keep_going = !on_epoch || on_epoch(entry);
        if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
            write_checkpoint(epoch, epoch_loss, epoch_name(epoch));
        }
        if (!keep_going) break;
    }
    write_checkpoint(result.history.back().epoch, result.history.back().loss, "final");
    return result;
}

TrainResult train(const DatasetManifest& manifest, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    return train(load_samples(manifest, Split::Train, net_cfg.input_size), net_cfg, cfg, on_epoch);
}

losses::LossReport mean_loss(const std::vector<Sample>& data, const ParameterStore& params,
                             const NetworkConfig& net_cfg, const losses::LossConfig& loss) {
    if (data.empty()) fail(ErrorCode::EmptyDataset, "no samples");
    losses::LossReport acc;
    for (const Sample& s : data) {
        const ImageBuffer pred = network::forward(s.hazy, params, net_cfg);
        accumulate(acc, losses::total_loss(pred, s.clear, loss).report, 1.0 / static_cast<double>(data.size()));
    }
    return acc;
}

ImageBuffer dehaze(const ImageBuffer& hazy, const ParameterStore& params, const NetworkConfig& net_cfg) {
    ImageBuffer input = hazy.channels() == 3 ? hazy : ImageBuffer();
    if (hazy.channels() != 3) fail(ErrorCode::InvalidChannels, "dehazing needs an RGB image");
    bool resized = false;
    try {
        net_cfg.validate_input(hazy.height(), hazy.width());
    } catch (const Error&) {
        input = imaging::resize_bilinear(hazy, net_cfg.input_size, net_cfg.input_size);
        resized = true;
    }
    ImageBuffer out = to_unit_range(network::forward(input, params, net_cfg));
    if (resized) out = imaging::resize_bilinear(out, hazy.height(), hazy.width());
    for (double& v : out.storage()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

EvalTable evaluate_pairs(const std::vector<Sample>& data, const Predictor& predict) {
    if (data.empty()) fail(ErrorCode::EmptyDataset, "nothing to evaluate");
    EvalTable table;
    std::vector<metrics::MetricReport> all;
    std::map<HazeLevel, std::vector<metrics::MetricReport>> levels;
    for (const Sample& s : data) {
        const ImageBuffer pred = to_unit_range(predict(s.hazy));
        const auto m = metrics::evaluate_pair(pred, s.clear);
        table.rows.push_back({s.name, s.tag, m});
        all.push_back(m);
        if (s.tag != HazeLevel::None) levels[s.tag].push_back(m);
    }
    table.mean = mean_of(all);
    for (const auto& [level, rows] : levels) table.per_level[level] = mean_of(rows);
    return table;
}

EvalTable evaluate(const std::vector<Sample>& data, const ParameterStore& params, const NetworkConfig& net_cfg) {
    return evaluate_pairs(data, [&](const ImageBuffer& hazy) { return dehaze(hazy, params, net_cfg); });
}

void write_eval_csv(const EvalTable& table, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    auto row = [&](const std::string& name, const metrics::MetricReport& m) {
        out << name << ',' << metrics::format_psnr(m.psnr) << ',' << metrics::format_index(m.ssim) << ','
            << metrics::format_index(m.uqi) << '\n';
    };
    out << "pair,psnr,ssim,uqi\n";
    for (const auto& r : table.rows) row(r.name, r.metrics);
    for (const auto& [level, m] : table.per_level) row("mean:" + to_string(level), m);
    row("mean", table.mean);
}

nlohmann::json to_json(const EvalTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows) {
        auto j = to_json(r.metrics);
        j["pair"] = r.name;
        j["tag"] = to_string(r.tag);
        rows.push_back(j);
    }
    nlohmann::json levels = nlohmann::json::object();
    for (const auto& [level, m] : table.per_level) levels[to_string(level)] = to_json(m);
    return {{"rows", rows}, {"mean", to_json(table.mean)}, {"per_level", levels}};
}

AblationTable ablate(const std::vector<Sample>& train_data, const std::vector<Sample>& eval_data,
                     const NetworkConfig& net_cfg, const TrainConfig& cfg) {
    const losses::LossConfig full = cfg.loss;
    auto run = [&](const std::string& label, bool guided, bool water, bool swin) {
        TrainConfig c = cfg;
        c.use_guided = guided;
        c.use_water = water;
        c.out_dir.clear();
        NetworkConfig n = net_cfg;
        n.use_swinrrdb = swin;
        const TrainResult r = train(train_data, n, c);
        AblationRow row;
        row.label = label;
        row.guided = guided;
        row.water = water;
        row.swinrrdb = swin;
        row.final_loss = mean_loss(train_data, r.params, n, full);
        row.metrics = evaluate(eval_data, r.params, n).mean;
        return row;
    };

    AblationTable t;
    const struct {
        const char* label;
        bool guided, water;
        ReferenceValues ref;
    } loss_rows[] = {
        {"L2", false, false, {32.71, 0.947, 0.791}},
        {"L2+water", false, true, {32.28, 0.965, 0.833}},
        {"L2+guided", true, false, {32.61, 0.966, 0.827}},
        {"L2+guided+water", true, true, {33.24, 0.967, 0.835}},
    };
    for (const auto& spec : loss_rows) {
        AblationRow row = run(spec.label, spec.guided, spec.water, net_cfg.use_swinrrdb);
        row.reference = spec.ref;
        t.loss_rows.push_back(std::move(row));
    }
    t.swin_off = run("SwinRRDB off", true, true, false);
    t.swin_off.reference = ReferenceValues{30.50, 0.952, std::nullopt};
    if (net_cfg.use_swinrrdb) {
        t.swin_on = t.loss_rows.back();
        t.swin_on.label = "SwinRRDB on";
    } else {
        t.swin_on = run("SwinRRDB on", true, true, true);
    }
    t.swin_on.reference = ReferenceValues{33.24, 0.967, std::nullopt};
    return t;
}

std::string format_ablation(const AblationTable& table) {
    std::ostringstream out;
    auto flag = [](bool on) { return on ? "O" : "X"; };
    char line[256];
    out << "Loss ablation (desk run; reference columns are full-scale, not a target)\n";
    std::snprintf(line, sizeof line, "%-4s %-6s %-6s | %-9s %-8s %-8s %-9s | %-9s %-8s %-8s\n", "L2", "guide",
                  "water", "loss", "PSNR", "SSIM", "UQI", "ref PSNR", "ref SSIM", "ref UQI");
    out << line;
    for (const auto& r : table.loss_rows) {
        std::snprintf(line, sizeof line, "%-4s %-6s %-6s | %-9.5f %-8s %-8s %-9s | %-9s %-8s %-8s\n", flag(r.l2),
                      flag(r.guided), flag(r.water), r.final_loss.total, metrics::format_psnr(r.metrics.psnr).c_str(),
                      metrics::format_index(r.metrics.ssim).c_str(), metrics::format_index(r.metrics.uqi).c_str(),
                      metrics::format_psnr(r.reference->psnr).c_str(), metrics::format_index(r.reference->ssim).c_str(),
                      metrics::format_index(*r.reference->uqi).c_str());
        out << line;
    }
    out << "\nSwinRRDB ablation (desk run; reference columns are RICE full-scale, not a target)\n";
    std::snprintf(line, sizeof line, "%-9s | %-9s %-8s %-8s | %-9s %-8s\n", "SwinRRDB", "loss", "PSNR", "SSIM",
                  "ref PSNR", "ref SSIM");
    out << line;
    for (const AblationRow* r : {&table.swin_off, &table.swin_on}) {
        std::snprintf(line, sizeof line, "%-9s | %-9.5f %-8s %-8s | %-9s %-8s\n", flag(r->swinrrdb),
                      r->final_loss.total, metrics::format_psnr(r->metrics.psnr).c_str(),
                      metrics::format_index(r->metrics.ssim).c_str(), metrics::format_psnr(r->reference->psnr).c_str(),
                      metrics::format_index(r->reference->ssim).c_str());
        out << line;
    }
    return out.str();
}

nlohmann::json to_json(const AblationTable& table) {
    auto row = [](const AblationRow& r) {
        nlohmann::json j = {{"label", r.label},
                            {"l2", r.l2},
                            {"guided", r.guided},
                            {"water", r.water},
                            {"swinrrdb", r.swinrrdb},
                            {"final_loss", to_json(r.final_loss)},
                            {"metrics", to_json(r.metrics)}};
        if (r.reference) {
            nlohmann::json ref = {{"psnr", r.reference->psnr}, {"ssim", r.reference->ssim}};
            if (r.reference->uqi) ref["uqi"] = *r.reference->uqi;
            ref["note"] = "full-scale, not a target";
            j["reference"] = ref;
        }
        return j;
    };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.loss_rows) rows.push_back(row(r));
    return {{"loss_rows", rows}, {"swin_off", row(table.swin_off)}, {"swin_on", row(table.swin_on)}};
}

}  // namespace swinhaze::pipeline
