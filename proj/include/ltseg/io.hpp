#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "ltseg/seqdata.hpp"

namespace ltseg::io {

namespace fs = std::filesystem;

// classes.txt: "id name" per line. 'start' is implicit and never listed.
std::vector<std::string> read_class_map(const fs::path& path, int num_classes);
void write_class_map(const fs::path& path, const std::vector<std::string>& class_names);

// Ground truth: one class-name token per line per frame.
std::vector<Label> read_label_file(const fs::path& path,
                                   const std::unordered_map<std::string, Label>& class_ids);
void write_label_file(const fs::path& path, std::span<const Label> labels,
                      const std::vector<std::string>& class_names);

// Binary features: u64 D, u64 T (little-endian) then D*T float32 in frame-major
// order. Files ending in ".csv" hold T rows of D comma-separated values.
FeatureMatrix read_features(const fs::path& path);
void write_features(const fs::path& path, const FeatureMatrix& features);

// Manifest JSON:
//   {"format": "ltseg-dataset-v1", "num_classes": L, "feature_dim": D,
//    "classes": "classes.txt",
//    "sequences": [{"id": ..., "labels": ..., "features": ...}, ...]}
// Relative paths resolve against the manifest's directory.
Dataset load_dataset(const fs::path& manifest_path);

// Writes manifest.json, classes.txt, groundTruth/<id>.txt and
// features/<id>.bin under directory; returns the manifest path.
fs::path save_dataset(const Dataset& dataset, const fs::path& directory);

// Reads a whole file into a string; IoError if unreadable.
std::string read_text(const fs::path& path);
// Writes atomically enough for our purposes; IoError on failure.
void write_text(const fs::path& path, const std::string& text);

}  // namespace ltseg::io
