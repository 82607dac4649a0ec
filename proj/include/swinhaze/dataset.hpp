#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "swinhaze/image.hpp"

namespace swinhaze::pipeline {

namespace fs = std::filesystem;

enum class Layout { Rice, SateHaze1k, Generic };
enum class Split { Train, Test };
enum class HazeLevel { None, Thin, Moderate, Thick };

std::string to_string(Layout v);
std::string to_string(Split v);
std::string to_string(HazeLevel v);
Layout parse_layout(const std::string& s);
Split parse_split(const std::string& s);
HazeLevel parse_level(const std::string& s);

struct PairRecord {
    fs::path hazy;
    fs::path clear;
    Split split = Split::Train;
    HazeLevel tag = HazeLevel::None;
};

struct DatasetManifest {
    std::vector<PairRecord> records;
    Layout layout = Layout::Generic;
    int resize_to = 256;

    std::size_t count(Split split) const;
    std::size_t count(Split split, HazeLevel tag) const;
    std::vector<PairRecord> select(Split split) const;
};

// Train share of a RICE-style listing: 390 of 500, the same ratio otherwise.
std::size_t rice_train_count(std::size_t pairs);

// rice: <root>/{cloud|hazy|input}/ and <root>/{label|clear|gt|target|reference}/
//       with identical file names (the pair may also sit one directory down).
// satehaze1k: <root>[/dataset]/<..thin..|..moderate..|..thick..>/{train,test}/{input,target}/
// generic: a CSV of hazy,clear[,split[,tag]] given directly or as <root>/pairs.csv;
//       relative paths resolve against the CSV's directory.
DatasetManifest build_manifest(const fs::path& root, Layout layout, int resize_to = 256);

// JSON array of {hazy, clear, split, tag}.
void save_manifest(const DatasetManifest& manifest, const fs::path& path);
DatasetManifest load_manifest(const fs::path& path, int resize_to = 256);

struct PrepareResult {
    fs::path cache_dir;
    DatasetManifest prepared;  // records point into the cache
    std::size_t written = 0;
    std::size_t skipped = 0;
};

// Resizes every image to manifest.resize_to and stores PNG copies under
// cache_dir together with a SHA-256 index (index.json) and manifest.json.
// Entries whose source hash, target size and cached file hash all match the
// index are left untouched.
PrepareResult prepare_dataset(const DatasetManifest& manifest, const fs::path& cache_dir);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

struct Sample {
    std::string name;
    HazeLevel tag = HazeLevel::None;
    ImageBuffer hazy;
    ImageBuffer clear;
};

// Loads (and if needed resizes) the records of one split.
std::vector<Sample> load_samples(const DatasetManifest& manifest, Split split, int size);

// Smooth colour scene and its hazy version hazy = clear * t + A (1 - t) with a
// slowly varying transmission t. Deterministic in `seed`.
Sample synthetic_pair(int height, int width, std::uint64_t seed);

// Writes a RICE-style tree of `pairs` PNG pairs (cloud/ and label/).
void write_synthetic_rice(const fs::path& root, std::size_t pairs, int size, std::uint64_t seed);
// Writes a SateHaze1k-style tree with the given per-level train/test counts.
void write_synthetic_satehaze(const fs::path& root, std::size_t train_per_level,
                              std::size_t test_per_level, int size, std::uint64_t seed);

}  // namespace swinhaze::pipeline
