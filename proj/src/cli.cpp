#include "swinhaze/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <optional>
#include <ostream>

#include "swinhaze/checkpoint.hpp"
#include "swinhaze/error.hpp"
#include "swinhaze/imaging.hpp"
#include "swinhaze/losses.hpp"
#include "swinhaze/pipeline.hpp"
#include "swinhaze/watershed.hpp"

namespace swinhaze::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Values not given on the command line (or config file) stay empty so presets
// can fill them.
struct NetFlags {
    std::optional<int> window, base_channels, rrdb_per_stage, resize;
    bool no_swinrrdb = false;
};

struct TrainFlags {
    std::optional<double> lr;
    std::optional<int> epochs, batch;
    std::uint64_t seed = 0;
    double lambda_l2 = 5.0, lambda_guided = 1.0, lambda_water = 0.5;
    std::string water_grad = "none", water_metric = "l2";
    int guided_radius = 0;
    double guided_eps = 1e-4;
    bool coef_smoothing = false;
    bool deterministic = false;
    int checkpoint_every = 0;
};

struct DataFlags {
    std::string dataset_root, manifest, layout = "rice";
    int synthetic = 0;
};

void add_net_flags(CLI::App* app, NetFlags& f) {
    app->add_option("--window", f.window, "attention window (desk 4, full 8)")->default_str("4");
    app->add_option("--base-channels", f.base_channels, "stem channels")->default_str("8");
    app->add_option("--rrdb-per-stage", f.rrdb_per_stage, "SwinRRDBs per encoder stage")->default_str("1");
    app->add_option("--resize", f.resize, "network input size in pixels (desk 64)")->default_str("256");
    app->add_flag("--no-swinrrdb", f.no_swinrrdb, "replace SwinRRDBs by plain residual conv blocks");
}

void add_loss_flags(CLI::App* app, TrainFlags& f) {
    app->add_option("--lambda-l2", f.lambda_l2, "L2 weight")->capture_default_str();
    app->add_option("--lambda-guided", f.lambda_guided, "guided-filter loss weight")->capture_default_str();
    app->add_option("--lambda-water", f.lambda_water, "watershed loss weight")->capture_default_str();
    app->add_option("--water-grad", f.water_grad, "watershed gradient: none|straight_through")
        ->check(CLI::IsMember({"none", "straight_through"}))
        ->capture_default_str();
    app->add_option("--water-metric", f.water_metric, "watershed map distance: l1|l2")
        ->check(CLI::IsMember({"l1", "l2"}))
        ->capture_default_str();
    app->add_option("--guided-radius", f.guided_radius, "guided-filter radius (0: scale with image size)")
        ->capture_default_str();
    app->add_option("--guided-eps", f.guided_eps, "guided-filter regularizer")->capture_default_str();
    app->add_flag("--coef-smoothing", f.coef_smoothing, "box-average the guided coefficients");
}

void add_train_flags(CLI::App* app, TrainFlags& f) {
    app->add_option("--lr", f.lr, "Adam learning rate (desk 1e-4)")->default_str("1e-5");
    app->add_option("--epochs", f.epochs, "training epochs (desk 500)")->default_str("1000");
    app->add_option("--batch", f.batch, "batch size (desk 2)")->default_str("1");
    app->add_option("--seed", f.seed, "seed for initialization and shuffling")->capture_default_str();
    app->add_flag("--deterministic", f.deterministic, "fully serial execution");
    app->add_option("--checkpoint-every", f.checkpoint_every, "epochs between checkpoints (0: final only)")
        ->capture_default_str();
    add_loss_flags(app, f);
}

void add_data_flags(CLI::App* app, DataFlags& f) {
    app->add_option("--dataset-root", f.dataset_root, "dataset directory (or CSV for generic)");
    app->add_option("--manifest", f.manifest, "manifest JSON (e.g. from prepare)");
    app->add_option("--layout", f.layout, "rice|satehaze1k|generic")
        ->check(CLI::IsMember({"rice", "satehaze1k", "generic"}))
        ->capture_default_str();
    app->add_option("--synthetic", f.synthetic, "use N generated pairs instead of a dataset")
        ->capture_default_str();
}

network::NetworkConfig resolve_net(const NetFlags& f, bool desk) {
    network::NetworkConfig cfg = desk ? network::NetworkConfig::desk() : network::NetworkConfig{};
    if (f.window) cfg.window = *f.window;
    if (f.base_channels) cfg.base_channels = *f.base_channels;
    if (f.rrdb_per_stage) cfg.rrdb_per_stage = *f.rrdb_per_stage;
    if (f.resize) cfg.input_size = *f.resize;
    cfg.use_swinrrdb = !f.no_swinrrdb;
    cfg.validate();
    return cfg;
}

losses::LossConfig resolve_loss(const TrainFlags& f) {
    losses::LossConfig l;
    l.weights = {f.lambda_l2, f.lambda_guided, f.lambda_water};
    l.water_grad = f.water_grad == "none" ? losses::WaterGrad::None : losses::WaterGrad::StraightThrough;
    l.water_metric = f.water_metric == "l1" ? losses::WaterMetric::L1 : losses::WaterMetric::L2;
    l.guided_radius = f.guided_radius;
    l.guided_eps = f.guided_eps;
    l.coef_smoothing = f.coef_smoothing;
    return l;
}

pipeline::TrainConfig resolve_train(const TrainFlags& f, bool desk, const std::string& out_dir) {
    pipeline::TrainConfig cfg = desk ? pipeline::TrainConfig::desk() : pipeline::TrainConfig{};
    if (f.lr) cfg.learning_rate = *f.lr;
    if (f.epochs) cfg.epochs = *f.epochs;
    if (f.batch) cfg.batch_size = *f.batch;
    cfg.seed = f.seed;
    cfg.deterministic = true;  // the trainer is serial either way
    cfg.checkpoint_every = f.checkpoint_every;
    cfg.loss = resolve_loss(f);
    cfg.out_dir = out_dir;
    cfg.validate();
    return cfg;
}

pipeline::DatasetManifest resolve_manifest(const DataFlags& f, int resize) {
    if (!f.manifest.empty()) return pipeline::load_manifest(f.manifest, resize);
    if (f.dataset_root.empty()) fail(ErrorCode::ConfigError, "give --dataset-root, --manifest or --synthetic");
    return pipeline::build_manifest(f.dataset_root, pipeline::parse_layout(f.layout), resize);
}

std::vector<pipeline::Sample> synthetic_samples(int count, int size, std::uint64_t seed) {
    std::vector<pipeline::Sample> out;
    for (int i = 0; i < count; ++i) out.push_back(pipeline::synthetic_pair(size, size, seed + 1 + i));
    return out;
}

// Train and evaluation samples for train/ablate.
std::pair<std::vector<pipeline::Sample>, std::vector<pipeline::Sample>> resolve_data(const DataFlags& f, int size,
                                                                                    std::uint64_t seed) {
    if (f.synthetic > 0) {
        auto s = synthetic_samples(f.synthetic, size, seed);
        return {s, s};
    }
    const auto m = resolve_manifest(f, size);
    auto train = pipeline::load_samples(m, pipeline::Split::Train, size);
    auto test = m.count(pipeline::Split::Test) > 0 ? pipeline::load_samples(m, pipeline::Split::Test, size) : train;
    return {std::move(train), std::move(test)};
}

void log_config(std::ostream& err, const std::string& command, const json& j) {
    err << "config " << command << ' ' << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Satellite image dehazing with SwinRRDB U-Net and structure-aware losses", "swinhaze"};
    app.set_config("--config", "", "read flags from a TOML/INI file (flags given here win)");
    app.require_subcommand(1);

    bool desk = false;
    NetFlags net;
    TrainFlags tr;
    DataFlags data;
    std::string out_path, checkpoint, in_path, pred_path, gt_path, a_path, b_path, split = "test";
    double lo = 100.0, hi = 200.0, sigma = 2.0;

    auto* prepare = app.add_subcommand("prepare", "build a manifest and a resized PNG cache");
    prepare->add_option("--dataset-root", data.dataset_root, "dataset directory")->required();
    prepare->add_option("--layout", data.layout, "rice|satehaze1k|generic")
        ->check(CLI::IsMember({"rice", "satehaze1k", "generic"}))
        ->capture_default_str();
    prepare->add_option("--resize", net.resize, "cache image size (desk 64)")->default_str("256");
    prepare->add_option("--out", out_path, "cache directory")->required();
    prepare->add_flag("--desk", desk, "desk preset (64 px)");

    auto* train = app.add_subcommand("train", "train the network");
    add_data_flags(train, data);
    add_net_flags(train, net);
    add_train_flags(train, tr);
    train->add_flag("--desk", desk, "desk preset: 64 px, lr 1e-4, batch 2, 500 epochs");
    train->add_option("--out", out_path, "run directory (log and checkpoints)")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    add_data_flags(eval, data);
    eval->add_option("--checkpoint", checkpoint, "checkpoint (.json, .bin or stem)")->required();
    eval->add_option("--split", split, "train|test")->check(CLI::IsMember({"train", "test"}))->capture_default_str();
    eval->add_option("--out", out_path, "directory for metrics.csv and metrics.json")->required();

    auto* dehaze = app.add_subcommand("dehaze", "dehaze one image");
    dehaze->add_option("--checkpoint", checkpoint, "checkpoint (.json, .bin or stem)")->required();
    dehaze->add_option("--in", in_path, "hazy PNG")->required();
    dehaze->add_option("--out", out_path, "output PNG")->required();

    auto* loss_report = app.add_subcommand("loss-report", "print the loss terms between two images");
    loss_report->add_option("--pred", pred_path, "prediction PNG")->required();
    loss_report->add_option("--gt", gt_path, "ground-truth PNG")->required();
    add_loss_flags(loss_report, tr);

    auto* water_map = app.add_subcommand("watershed-map", "write the normalized watershed map of an image");
    water_map->add_option("--in", in_path, "input PNG")->required();
    water_map->add_option("--out", out_path, "output PNG")->required();
    water_map->add_option("--sigma", sigma, "pre-smoothing sigma")->capture_default_str();
    std::string grid_path;
    water_map->add_option("--grid", grid_path, "also write the map as a text grid");

    auto* edges = app.add_subcommand("edge-compare", "Canny edge maps of two images and their disagreement");
    edges->add_option("--a", a_path, "first PNG")->required();
    edges->add_option("--b", b_path, "second PNG")->required();
    edges->add_option("--lo", lo, "low hysteresis threshold")->capture_default_str();
    edges->add_option("--hi", hi, "high hysteresis threshold")->capture_default_str();
    edges->add_option("--out", out_path, "output directory")->required();

    auto* ablate = app.add_subcommand("ablate", "loss and SwinRRDB ablation under one seed and budget");
    add_data_flags(ablate, data);
    add_net_flags(ablate, net);
    add_train_flags(ablate, tr);
    ablate->add_flag("--desk", desk, "desk preset: 64 px, lr 1e-4, batch 2, 500 epochs");
    ablate->add_option("--out", out_path, "directory for ablation.json");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    if (!argv.empty()) argv.pop_back();  // program name
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << '\n';
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    try {
        if (prepare->parsed()) {
            const int size = net.resize.value_or(desk ? 64 : 256);
            log_config(err, "prepare", {{"dataset_root", data.dataset_root}, {"layout", data.layout},
                                        {"resize", size}, {"out", out_path}});
            const auto m = pipeline::build_manifest(data.dataset_root, pipeline::parse_layout(data.layout), size);
            const auto r = pipeline::prepare_dataset(m, out_path);
            json levels = json::object();
            for (auto lv : {pipeline::HazeLevel::Thin, pipeline::HazeLevel::Moderate, pipeline::HazeLevel::Thick}) {
                if (m.count(pipeline::Split::Test, lv) + m.count(pipeline::Split::Train, lv) == 0) continue;
                levels[pipeline::to_string(lv)] = {{"train", m.count(pipeline::Split::Train, lv)},
                                                   {"test", m.count(pipeline::Split::Test, lv)}};
            }
            out << json{{"written", r.written},
                        {"skipped", r.skipped},
                        {"train", m.count(pipeline::Split::Train)},
                        {"test", m.count(pipeline::Split::Test)},
                        {"levels", levels},
                        {"manifest", (r.cache_dir / "manifest.json").string()}}
                       .dump()
                << '\n';
        } else if (train->parsed()) {
            const auto net_cfg = resolve_net(net, desk);
            const auto cfg = resolve_train(tr, desk, out_path);
            log_config(err, "train", {{"network", network::config_to_json(net_cfg)}, {"train", pipeline::to_json(cfg)}});
            const auto [train_set, test_set] = resolve_data(data, net_cfg.input_size, cfg.seed);
            (void)test_set;
            const auto r = pipeline::train(train_set, net_cfg, cfg, [&](const pipeline::EpochLog& e) {
                if (e.epoch == 1 || e.epoch % 10 == 0 || e.epoch == cfg.epochs) {
                    err << "epoch " << e.epoch << ' ' << pipeline::to_json(e.loss).dump() << '\n';
                }
                return true;
            });
            json j = pipeline::to_json(r.history.back().loss);
            j["epochs"] = r.history.back().epoch;
            j["checkpoint"] = r.checkpoints.back().path.string();
            out << j.dump() << '\n';
        } else if (eval->parsed()) {
            const auto ck = network::load_checkpoint(checkpoint);
            log_config(err, "eval", {{"checkpoint", checkpoint}, {"split", split}, {"network", network::config_to_json(ck.config)}});
            std::vector<pipeline::Sample> samples;
            if (data.synthetic > 0) {
                samples = synthetic_samples(data.synthetic, ck.config.input_size, ck.seed);
            } else {
                samples = pipeline::load_samples(resolve_manifest(data, ck.config.input_size),
                                                 pipeline::parse_split(split), ck.config.input_size);
            }
            const auto table = pipeline::evaluate(samples, ck.params, ck.config);
            fs::create_directories(out_path);
            pipeline::write_eval_csv(table, fs::path(out_path) / "metrics.csv");
            std::ofstream(fs::path(out_path) / "metrics.json") << pipeline::to_json(table).dump(2) << '\n';
            out << "mean PSNR " << metrics::format_psnr(table.mean.psnr) << " SSIM "
                << metrics::format_index(table.mean.ssim) << " UQI " << metrics::format_index(table.mean.uqi) << '\n';
            for (const auto& [level, m] : table.per_level) {
                out << pipeline::to_string(level) << " PSNR " << metrics::format_psnr(m.psnr) << " SSIM "
                    << metrics::format_index(m.ssim) << " UQI " << metrics::format_index(m.uqi) << '\n';
            }
        } else if (dehaze->parsed()) {
            const auto ck = network::load_checkpoint(checkpoint);
            log_config(err, "dehaze", {{"checkpoint", checkpoint}, {"in", in_path}, {"out", out_path}});
            const ImageBuffer hazy = imaging::load_image(in_path);
            if (hazy.channels() != 3) fail(ErrorCode::InvalidChannels, in_path + " is not an RGB image");
            const ImageBuffer clean = pipeline::dehaze(hazy, ck.params, ck.config);
            imaging::save_image(clean, out_path);
            out << json{{"out", out_path}, {"height", clean.height()}, {"width", clean.width()}}.dump() << '\n';
        } else if (loss_report->parsed()) {
            const auto cfg = resolve_loss(tr);
            log_config(err, "loss-report", {{"pred", pred_path}, {"gt", gt_path}});
            const ImageBuffer pred = imaging::load_image(pred_path);
            const ImageBuffer gt = imaging::load_image(gt_path);
            const auto r = losses::total_loss(pred, gt, cfg).report;
            out << pipeline::to_json(r).dump() << '\n';
        } else if (water_map->parsed()) {
            log_config(err, "watershed-map", {{"in", in_path}, {"out", out_path}, {"sigma", sigma}});
            watershed::WatershedConfig cfg;
            cfg.sigma = sigma;
            const auto map = watershed::watershed_map(imaging::load_image(in_path), cfg);
            imaging::save_image(map.to_image(), out_path);
            if (!grid_path.empty()) watershed::write_text_grid(map, grid_path);
            out << json{{"out", out_path}, {"height", map.height}, {"width", map.width}}.dump() << '\n';
        } else if (edges->parsed()) {
            log_config(err, "edge-compare", {{"a", a_path}, {"b", b_path}, {"lo", lo}, {"hi", hi}});
            const ImageBuffer a = imaging::load_image(a_path);
            const ImageBuffer b = imaging::load_image(b_path);
            if (a.height() != b.height() || a.width() != b.width()) {
                fail(ErrorCode::ShapeMismatch, "edge-compare needs images of equal size");
            }
            imaging::CannyOptions opt;
            opt.low = lo;
            opt.high = hi;
            const EdgeMap ea = imaging::canny_edges(a, opt);
            const EdgeMap eb = imaging::canny_edges(b, opt);
            std::size_t disagree = 0;
            for (std::size_t i = 0; i < ea.data.size(); ++i) disagree += ea.data[i] != eb.data[i];
            fs::create_directories(out_path);
            const fs::path pa = fs::path(out_path) / "edges_a.png";
            const fs::path pb = fs::path(out_path) / "edges_b.png";
            imaging::save_edge_map(ea, pa);
            imaging::save_edge_map(eb, pb);
            out << json{{"edges_a", ea.count()},
                        {"edges_b", eb.count()},
                        {"disagreement", disagree},
                        {"edge_map_a", pa.string()},
                        {"edge_map_b", pb.string()}}
                       .dump()
                << '\n';
        } else if (ablate->parsed()) {
            const auto net_cfg = resolve_net(net, desk);
            const auto cfg = resolve_train(tr, desk, "");
            log_config(err, "ablate", {{"network", network::config_to_json(net_cfg)}, {"train", pipeline::to_json(cfg)}});
            const auto [train_set, test_set] = resolve_data(data, net_cfg.input_size, cfg.seed);
            const auto table = pipeline::ablate(train_set, test_set, net_cfg, cfg);
            out << pipeline::format_ablation(table);
            if (!out_path.empty()) {
                fs::create_directories(out_path);
                std::ofstream(fs::path(out_path) / "ablation.json") << pipeline::to_json(table).dump(2) << '\n';
            }
        }
    } catch (const Error& e) {
        err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: IoError: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: Internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace swinhaze::cli
