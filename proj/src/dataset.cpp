#include "swinhaze/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "swinhaze/error.hpp"
#include "swinhaze/imaging.hpp"

namespace swinhaze::pipeline {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool is_image(const fs::path& p) {
    static const std::set<std::string> exts{".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"};
    return exts.count(lower(p.extension().string())) != 0;
}

std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

std::optional<fs::path> find_child(const fs::path& dir, std::initializer_list<const char*> names) {
    if (!fs::is_directory(dir)) return std::nullopt;
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) subdirs.push_back(e.path());
    }
    std::sort(subdirs.begin(), subdirs.end());
    for (const char* want : names) {
        for (const auto& d : subdirs) {
            if (lower(d.filename().string()) == want) return d;
        }
    }
    return std::nullopt;
}

const std::initializer_list<const char*> kHazyNames{"cloud", "hazy", "input"};
const std::initializer_list<const char*> kClearNames{"label", "clear", "gt", "target", "reference"};

// Pairs identically named files of two folders; any orphan is an error.
std::vector<std::pair<fs::path, fs::path>> pair_folders(const fs::path& hazy_dir, const fs::path& clear_dir) {
    const auto hazy = list_images(hazy_dir);
    const auto clear = list_images(clear_dir);
    std::map<std::string, fs::path> by_name;
    for (const auto& c : clear) by_name.emplace(c.filename().string(), c);
    std::vector<std::pair<fs::path, fs::path>> pairs;
    for (const auto& h : hazy) {
        const auto it = by_name.find(h.filename().string());
        if (it == by_name.end()) fail(ErrorCode::PairingError, "no clear counterpart for " + h.string());
        pairs.emplace_back(h, it->second);
        by_name.erase(it);
    }
    if (!by_name.empty()) {
        fail(ErrorCode::PairingError, "no hazy counterpart for " + by_name.begin()->second.string());
    }
    return pairs;
}

DatasetManifest build_rice(const fs::path& root) {
    fs::path base = root;
    auto hazy = find_child(base, kHazyNames);
    auto clear = find_child(base, kClearNames);
    if (!hazy || !clear) {
        // Accept a single wrapping directory such as RICE1/.
        std::vector<fs::path> subdirs;
        for (const auto& e : fs::directory_iterator(root)) {
            if (e.is_directory()) subdirs.push_back(e.path());
        }
        if (subdirs.size() == 1) {
            base = subdirs.front();
            hazy = find_child(base, kHazyNames);
            clear = find_child(base, kClearNames);
        }
    }
    if (!hazy || !clear) {
        fail(ErrorCode::EmptyDataset, "no hazy/clear folder pair under " + root.string());
    }
    const auto pairs = pair_folders(*hazy, *clear);
    if (pairs.empty()) fail(ErrorCode::EmptyDataset, "no image pairs under " + base.string());
    DatasetManifest m;
    m.layout = Layout::Rice;
    const std::size_t n_train = rice_train_count(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        m.records.push_back({pairs[i].first, pairs[i].second, i < n_train ? Split::Train : Split::Test,
                             HazeLevel::None});
    }
    return m;
}

std::optional<HazeLevel> level_of_dir(const std::string& name) {
    const std::string s = lower(name);
    if (s.find("thin") != std::string::npos) return HazeLevel::Thin;
    if (s.find("moderate") != std::string::npos) return HazeLevel::Moderate;
    if (s.find("thick") != std::string::npos) return HazeLevel::Thick;
    return std::nullopt;
}

DatasetManifest build_satehaze(const fs::path& root) {
    fs::path base = root;
    if (auto inner = find_child(root, {"dataset"})) base = *inner;
    std::vector<std::pair<HazeLevel, fs::path>> levels;
    for (const auto& e : fs::directory_iterator(base)) {
        if (!e.is_directory()) continue;
        if (auto lv = level_of_dir(e.path().filename().string())) levels.emplace_back(*lv, e.path());
    }
    std::sort(levels.begin(), levels.end());
    if (levels.empty()) fail(ErrorCode::EmptyDataset, "no thin/moderate/thick folders under " + base.string());
    DatasetManifest m;
    m.layout = Layout::SateHaze1k;
    for (const auto& [level, dir] : levels) {
        for (const Split split : {Split::Train, Split::Test}) {
            const auto split_dir = find_child(dir, {split == Split::Train ? "train" : "test"});
            if (!split_dir) continue;
            const auto hazy = find_child(*split_dir, kHazyNames);
            const auto clear = find_child(*split_dir, kClearNames);
            if (!hazy || !clear) {
                fail(ErrorCode::PairingError, "missing input/target folders under " + split_dir->string());
            }
            for (const auto& [h, c] : pair_folders(*hazy, *clear)) m.records.push_back({h, c, split, level});
        }
    }
    if (m.records.empty()) fail(ErrorCode::EmptyDataset, "no image pairs under " + base.string());
    return m;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    return out;
}

DatasetManifest build_generic(const fs::path& root) {
    const fs::path csv = fs::is_directory(root) ? root / "pairs.csv" : root;
    std::ifstream in(csv);
    if (!in) fail(ErrorCode::NotFound, "pair list not found: " + csv.string());
    const fs::path dir = csv.parent_path();
    DatasetManifest m;
    m.layout = Layout::Generic;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto f = split_csv_line(line);
        if (f.empty() || f[0].empty() || f[0][0] == '#') continue;
        if (line_no == 1 && lower(f[0]) == "hazy") continue;
        if (f.size() < 2) fail(ErrorCode::PairingError, csv.string() + ":" + std::to_string(line_no) + ": need hazy,clear");
        PairRecord r;
        r.hazy = fs::path(f[0]).is_absolute() ? fs::path(f[0]) : dir / f[0];
        r.clear = fs::path(f[1]).is_absolute() ? fs::path(f[1]) : dir / f[1];
        if (f.size() > 2 && !f[2].empty()) r.split = parse_split(f[2]);
        if (f.size() > 3 && !f[3].empty()) r.tag = parse_level(f[3]);
        for (const auto& p : {r.hazy, r.clear}) {
            if (!fs::is_regular_file(p)) fail(ErrorCode::PairingError, "listed file does not exist: " + p.string());
        }
        m.records.push_back(std::move(r));
    }
    if (m.records.empty()) fail(ErrorCode::EmptyDataset, "no pairs listed in " + csv.string());
    return m;
}

void check_unique(const DatasetManifest& m) {
    std::set<std::string> seen;
    for (const auto& r : m.records) {
        if (!seen.insert(r.hazy.lexically_normal().string()).second) {
            fail(ErrorCode::PairingError, "hazy image listed twice: " + r.hazy.string());
        }
    }
}

std::string hex(const unsigned char* bytes, unsigned len) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) {
        s += digits[bytes[i] >> 4];
        s += digits[bytes[i] & 15];
    }
    return s;
}

ImageBuffer load_with_context(const fs::path& p) {
    try {
        return imaging::load_image(p);
    } catch (const Error& e) {
        const std::string msg = e.what();
        if (msg.find(p.string()) != std::string::npos) throw;
        fail(e.code(), p.string() + ": " + msg);
    }
}

ImageBuffer to_size(const ImageBuffer& img, int size) {
    if (img.height() == size && img.width() == size) return img;
    return imaging::resize_bilinear(img, size, size);
}

ImageBuffer as_rgb(const ImageBuffer& img) {
    if (img.channels() == 3) return img;
    ImageBuffer out(img.height(), img.width(), 3, img.range());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
        }
    }
    return out;
}

}  // namespace

std::string to_string(Layout v) {
    switch (v) {
        case Layout::Rice: return "rice";
        case Layout::SateHaze1k: return "satehaze1k";
        case Layout::Generic: return "generic";
    }
    return "?";
}

std::string to_string(Split v) { return v == Split::Train ? "train" : "test"; }

std::string to_string(HazeLevel v) {
    switch (v) {
        case HazeLevel::None: return "none";
        case HazeLevel::Thin: return "thin";
        case HazeLevel::Moderate: return "moderate";
        case HazeLevel::Thick: return "thick";
    }
    return "?";
}

Layout parse_layout(const std::string& s) {
    const auto v = lower(s);
    if (v == "rice") return Layout::Rice;
    if (v == "satehaze1k") return Layout::SateHaze1k;
    if (v == "generic") return Layout::Generic;
    fail(ErrorCode::InvalidParameter, "unknown layout '" + s + "'");
}

Split parse_split(const std::string& s) {
    const auto v = lower(s);
    if (v == "train") return Split::Train;
    if (v == "test") return Split::Test;
    fail(ErrorCode::InvalidParameter, "unknown split '" + s + "'");
}

HazeLevel parse_level(const std::string& s) {
    const auto v = lower(s);
    if (v == "none" || v.empty()) return HazeLevel::None;
    if (v == "thin") return HazeLevel::Thin;
    if (v == "moderate") return HazeLevel::Moderate;
    if (v == "thick") return HazeLevel::Thick;
    fail(ErrorCode::InvalidParameter, "unknown haze level '" + s + "'");
}

std::size_t DatasetManifest::count(Split split) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](const PairRecord& r) { return r.split == split; }));
}

std::size_t DatasetManifest::count(Split split, HazeLevel tag) const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const PairRecord& r) {
        return r.split == split && r.tag == tag;
    }));
}

std::vector<PairRecord> DatasetManifest::select(Split split) const {
    std::vector<PairRecord> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(r);
    }
    return out;
}

std::size_t rice_train_count(std::size_t pairs) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(pairs) * 390.0 / 500.0));
}

DatasetManifest build_manifest(const fs::path& root, Layout layout, int resize_to) {
    if (resize_to < 1) fail(ErrorCode::InvalidParameter, "resize target must be positive");
    if (!fs::exists(root)) fail(ErrorCode::NotFound, "dataset root not found: " + root.string());
    if (layout != Layout::Generic && fs::is_directory(root) && fs::is_empty(root)) {
        fail(ErrorCode::EmptyDataset, "dataset root is empty: " + root.string());
    }
    DatasetManifest m;
    switch (layout) {
        case Layout::Rice: m = build_rice(root); break;
        case Layout::SateHaze1k: m = build_satehaze(root); break;
        case Layout::Generic: m = build_generic(root); break;
    }
    m.resize_to = resize_to;
    check_unique(m);
    return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : manifest.records) {
        j.push_back({{"hazy", r.hazy.string()},
                     {"clear", r.clear.string()},
                     {"split", to_string(r.split)},
                     {"tag", to_string(r.tag)}});
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

DatasetManifest load_manifest(const fs::path& path, int resize_to) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::NotFound, "manifest not found: " + path.string());
    DatasetManifest m;
    m.resize_to = resize_to;
    try {
        const auto j = nlohmann::json::parse(in);
        for (const auto& e : j) {
            PairRecord r;
            r.hazy = e.at("hazy").get<std::string>();
            r.clear = e.at("clear").get<std::string>();
            r.split = parse_split(e.value("split", "train"));
            r.tag = parse_level(e.value("tag", "none"));
            m.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ConfigError, "bad manifest " + path.string() + ": " + e.what());
    }
    if (m.records.empty()) fail(ErrorCode::EmptyDataset, "manifest lists no pairs: " + path.string());
    check_unique(m);
    return m;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::NotFound, "cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    return hex(digest, len);
}

PrepareResult prepare_dataset(const DatasetManifest& manifest, const fs::path& cache_dir) {
    if (manifest.records.empty()) fail(ErrorCode::EmptyDataset, "nothing to prepare");
    fs::create_directories(cache_dir);
    const fs::path index_path = cache_dir / "index.json";
    nlohmann::json index = nlohmann::json::object();
    if (fs::exists(index_path)) {
        std::ifstream in(index_path);
        try {
            index = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception&) {
            index = nlohmann::json::object();
        }
    }
    const nlohmann::json before = index;

    PrepareResult result;
    result.cache_dir = cache_dir;
    result.prepared.layout = manifest.layout;
    result.prepared.resize_to = manifest.resize_to;

    auto cache_one = [&](const fs::path& src, const fs::path& rel) {
        const fs::path dst = cache_dir / rel;
        const std::string key = rel.generic_string();
        const std::string src_hash = sha256_file(src);
        if (index.contains(key) && fs::exists(dst)) {
            const auto& e = index[key];
            if (e.value("source_sha256", "") == src_hash && e.value("size", 0) == manifest.resize_to &&
                e.value("sha256", "") == sha256_file(dst)) {
                ++result.skipped;
                return dst;
            }
        }
        const ImageBuffer img = to_size(load_with_context(src), manifest.resize_to);
        fs::create_directories(dst.parent_path());
        imaging::save_image(img, dst);
        index[key] = {{"source", src.string()},
                      {"source_sha256", src_hash},
                      {"size", manifest.resize_to},
                      {"sha256", sha256_file(dst)}};
        ++result.written;
        return dst;
    };

    for (const auto& r : manifest.records) {
        const fs::path group = fs::path(to_string(r.split)) / to_string(r.tag);
        const std::string name = r.hazy.stem().string() + ".png";
        PairRecord out = r;
        out.hazy = cache_one(r.hazy, group / "hazy" / name);
        out.clear = cache_one(r.clear, group / "clear" / name);
        result.prepared.records.push_back(std::move(out));
    }
    check_unique(result.prepared);

    if (index != before || !fs::exists(index_path)) {
        std::ofstream out(index_path, std::ios::trunc);
        out << index.dump(2) << '\n';
    }
    const fs::path manifest_path = cache_dir / "manifest.json";
    bool same_manifest = false;
    if (fs::exists(manifest_path)) {
        try {
            const auto old = load_manifest(manifest_path, manifest.resize_to);
            same_manifest = old.records.size() == result.prepared.records.size() &&
                            std::equal(old.records.begin(), old.records.end(), result.prepared.records.begin(),
                                       [](const PairRecord& a, const PairRecord& b) {
                                           return a.hazy == b.hazy && a.clear == b.clear && a.split == b.split &&
                                                  a.tag == b.tag;
                                       });
        } catch (const Error&) {
            same_manifest = false;
        }
    }
    if (!same_manifest) save_manifest(result.prepared, manifest_path);
    return result;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest, Split split, int size) {
    std::vector<Sample> out;
    for (const auto& r : manifest.records) {
        if (r.split != split) continue;
        Sample s;
        s.name = r.hazy.filename().string();
        if (r.tag != HazeLevel::None) s.name = to_string(r.tag) + "/" + s.name;
        s.tag = r.tag;
        s.hazy = as_rgb(to_size(load_with_context(r.hazy), size));
        s.clear = as_rgb(to_size(load_with_context(r.clear), size));
        out.push_back(std::move(s));
    }
    if (out.empty()) fail(ErrorCode::EmptyDataset, "the " + to_string(split) + " split is empty");
    return out;
}

Sample synthetic_pair(int height, int width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };
    // Luma rises with the distance from one dark centre (a single watershed
    // basin); the colour texture is luma-neutral so it adds no extra minima.
    const double cy = uniform(0.3, 0.7);
    const double cx = uniform(0.3, 0.7);
    const double reach = std::hypot(std::max(cy, 1.0 - cy), std::max(cx, 1.0 - cx));
    const double lo = uniform(0.1, 0.2);
    const double span = uniform(0.6, 0.7);
    const double fy = uniform(1.0, 3.0);
    const double fx = uniform(1.0, 3.0);
    const double phase = uniform(0.0, 6.283185307179586);
    const double chroma = uniform(0.04, 0.07);
    const double airlight = uniform(0.8, 0.95);
    const double t_lo = uniform(0.45, 0.6);
    const double t_tilt = uniform(0.1, 0.25);

    Sample s;
    s.name = "synthetic_" + std::to_string(seed);
    s.clear = ImageBuffer(height, width, 3);
    s.hazy = ImageBuffer(height, width, 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double v = (y + 0.5) / height;
            const double u = (x + 0.5) / width;
            const double luma = lo + span * std::hypot(v - cy, u - cx) / reach;
            const double p = chroma * std::sin(6.283185307179586 * (fy * v + fx * u) + phase);
            const double rgb[3] = {luma + p, luma - p * 0.299 / 0.587, luma};
            const double t = t_lo + t_tilt * (0.5 * u + 0.5 * v);
            for (int c = 0; c < 3; ++c) {
                const double value = std::clamp(rgb[c], 0.0, 1.0);
                s.clear.at(y, x, c) = value;
                s.hazy.at(y, x, c) = value * t + airlight * (1.0 - t);
            }
        }
    }
    return s;
}

namespace {

void write_pair(const fs::path& hazy_dir, const fs::path& clear_dir, const std::string& name, int size,
                std::uint64_t seed) {
    const Sample s = synthetic_pair(size, size, seed);
    imaging::save_image(s.hazy, hazy_dir / name);
    imaging::save_image(s.clear, clear_dir / name);
}

std::string numbered(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04zu.png", i);
    return buf;
}

}  // namespace

void write_synthetic_rice(const fs::path& root, std::size_t pairs, int size, std::uint64_t seed) {
    fs::create_directories(root / "cloud");
    fs::create_directories(root / "label");
    for (std::size_t i = 0; i < pairs; ++i) write_pair(root / "cloud", root / "label", numbered(i), size, seed + i);
}

void write_synthetic_satehaze(const fs::path& root, std::size_t train_per_level, std::size_t test_per_level,
                              int size, std::uint64_t seed) {
    std::uint64_t k = seed;
    for (const char* level : {"Haze1k_thin", "Haze1k_moderate", "Haze1k_thick"}) {
        for (const auto& [split, count] : {std::pair{"train", train_per_level}, std::pair{"test", test_per_level}}) {
            const fs::path dir = root / level / split;
            fs::create_directories(dir / "input");
            fs::create_directories(dir / "target");
            for (std::size_t i = 0; i < count; ++i) write_pair(dir / "input", dir / "target", numbered(i), size, k++);
        }
    }
}

}  // namespace swinhaze::pipeline
