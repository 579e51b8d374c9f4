#include "ltseg/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ltseg/error.hpp"

namespace ltseg::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary feature I/O assumes a little-endian host");

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string where(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "'");
    }
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

}  // namespace

std::string read_text(const fs::path& path) {
    auto in = open_in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path, std::ios::binary);
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::string> read_class_map(const fs::path& path, int num_classes) {
    auto in = open_in(path);
    std::vector<std::string> names(static_cast<std::size_t>(num_classes));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string content = trim(line);
        if (content.empty()) continue;
        std::istringstream ls(content);
        long long id = -1;
        std::string name, extra;
        if (!(ls >> id >> name) || (ls >> extra)) {
            throw ParseError(where(path, lineno) + ": expected 'id name', got '" + content + "'");
        }
        if (name == "start") throw ParseError(where(path, lineno) + ": 'start' is reserved");
        if (id < 0 || id >= num_classes) {
            throw RangeError(where(path, lineno) + ": class id " + std::to_string(id) +
                             " outside [0, " + std::to_string(num_classes) + ")");
        }
        auto& slot = names[static_cast<std::size_t>(id)];
        if (!slot.empty()) throw ParseError(where(path, lineno) + ": duplicate class id " + std::to_string(id));
        slot = name;
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i].empty()) {
            throw ParseError(path.string() + ": class id " + std::to_string(i) + " is not listed");
        }
    }
    return names;
}

void write_class_map(const fs::path& path, const std::vector<std::string>& class_names) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < class_names.size(); ++i) ss << i << ' ' << class_names[i] << '\n';
    write_text(path, ss.str());
}

std::vector<Label> read_label_file(const fs::path& path,
                                   const std::unordered_map<std::string, Label>& class_ids) {
    auto in = open_in(path);
    std::vector<Label> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string token = trim(line);
        if (token.empty()) continue;
        auto it = class_ids.find(token);
        if (it == class_ids.end()) {
            throw ParseError(where(path, lineno) + ": unknown class name '" + token + "'");
        }
        labels.push_back(it->second);
    }
    return labels;
}

void write_label_file(const fs::path& path, std::span<const Label> labels,
                      const std::vector<std::string>& class_names) {
    std::string out;
    for (Label y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= class_names.size()) {
            throw RangeError("write_label_file: label " + std::to_string(y) + " has no class name");
        }
        out += class_names[static_cast<std::size_t>(y)];
        out += '\n';
    }
    write_text(path, out);
}

namespace {

FeatureMatrix read_features_csv(const fs::path& path) {
    auto in = open_in(path);
    std::vector<float> values;
    Eigen::Index dim = -1;
    Eigen::Index frames = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string content = trim(line);
        if (content.empty()) continue;
        Eigen::Index cols = 0;
        std::size_t pos = 0;
        while (pos <= content.size()) {
            const auto comma = content.find(',', pos);
            const std::string cell =
                trim(std::string_view(content).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
            float v = 0.0f;
            const auto* first = cell.data();
            const auto* last = cell.data() + cell.size();
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (cell.empty() || ec != std::errc() || ptr != last) {
                throw ParseError(where(path, lineno) + ": column " + std::to_string(cols + 1) +
                                 ": not a number '" + cell + "'");
            }
            values.push_back(v);
            ++cols;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (dim < 0) dim = cols;
        if (cols != dim) {
            throw ParseError(where(path, lineno) + ": expected " + std::to_string(dim) +
                             " columns, got " + std::to_string(cols));
        }
        ++frames;
    }
    if (frames == 0) throw ParseError(path.string() + ": no feature rows");
    // Rows are frames, so the row-major value stream maps to a column-major D x T matrix.
    return Eigen::Map<const FeatureMatrix>(values.data(), dim, frames);
}

}  // namespace

FeatureMatrix read_features(const fs::path& path) {
    if (path.extension() == ".csv") return read_features_csv(path);
    auto in = open_in(path, std::ios::binary);
    std::uint64_t header[2] = {0, 0};
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(header))) {
        throw ParseError(path.string() + ": offset 0: truncated header (need 16 bytes)");
    }
    const std::uint64_t dim = header[0];
    const std::uint64_t frames = header[1];
    if (dim == 0 || frames == 0 || dim > (1ull << 24) || frames > (1ull << 32)) {
        throw ParseError(path.string() + ": offset 0: implausible header D=" + std::to_string(dim) +
                         ", T=" + std::to_string(frames));
    }
    FeatureMatrix features(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(frames));
    const auto bytes = static_cast<std::streamsize>(dim * frames * sizeof(float));
    in.read(reinterpret_cast<char*>(features.data()), bytes);
    if (in.gcount() != bytes) {
        throw ParseError(path.string() + ": offset " + std::to_string(16 + in.gcount()) +
                         ": payload truncated, expected " + std::to_string(bytes) + " bytes");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw ParseError(path.string() + ": offset " + std::to_string(16 + bytes) +
                         ": trailing bytes after payload");
    }
    return features;
}

void write_features(const fs::path& path, const FeatureMatrix& features) {
    if (path.extension() == ".csv") {
        std::ostringstream ss;
        ss.precision(9);
        for (Eigen::Index t = 0; t < features.cols(); ++t) {
            for (Eigen::Index d = 0; d < features.rows(); ++d) {
                if (d) ss << ',';
                ss << features(d, t);
            }
            ss << '\n';
        }
        write_text(path, ss.str());
        return;
    }
    auto out = open_out(path, std::ios::binary);
    const std::uint64_t header[2] = {static_cast<std::uint64_t>(features.rows()),
                                     static_cast<std::uint64_t>(features.cols())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(features.data()),
              static_cast<std::streamsize>(features.size() * sizeof(float)));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Dataset load_dataset(const fs::path& manifest_path) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(manifest_path.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
    }
    const fs::path base = manifest_path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    int num_classes = 0;
    int feature_dim = 0;
    std::vector<std::string> names;
    std::vector<std::tuple<std::string, std::string, std::string>> entries;
    try {
        num_classes = manifest.at("num_classes").get<int>();
        feature_dim = manifest.at("feature_dim").get<int>();
        if (num_classes <= 0 || feature_dim <= 0) {
            throw ConfigError(manifest_path.string() + ": num_classes and feature_dim must be positive");
        }
        names = read_class_map(resolve(manifest.value("classes", std::string("classes.txt"))), num_classes);
        for (const auto& s : manifest.at("sequences")) {
            entries.emplace_back(s.at("id").get<std::string>(), s.at("labels").get<std::string>(),
                                 s.at("features").get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path.string() + ": " + e.what());
    }

    std::unordered_map<std::string, Label> ids;
    for (std::size_t i = 0; i < names.size(); ++i) ids.emplace(names[i], static_cast<Label>(i));

    std::vector<LabeledSequence> sequences;
    sequences.reserve(entries.size());
    for (auto& [id, label_path, feature_path] : entries) {
        auto labels = read_label_file(resolve(label_path), ids);
        auto features = read_features(resolve(feature_path));
        if (labels.empty()) throw ParseError(resolve(label_path).string() + ": no labels");
        if (static_cast<std::size_t>(features.cols()) != labels.size()) {
            throw ConfigError("sequence '" + id + "': label file has " + std::to_string(labels.size()) +
                              " frames but feature file has " + std::to_string(features.cols()));
        }
        if (features.rows() != feature_dim) {
            throw ConfigError("sequence '" + id + "': feature dimension " +
                              std::to_string(features.rows()) + " != manifest D=" +
                              std::to_string(feature_dim));
        }
        sequences.emplace_back(id, std::move(features), std::move(labels), num_classes);
    }
    return Dataset(std::move(sequences), num_classes, feature_dim, std::move(names));
}

fs::path save_dataset(const Dataset& dataset, const fs::path& directory) {
    nlohmann::json manifest;
    manifest["format"] = "ltseg-dataset-v1";
    manifest["num_classes"] = dataset.num_classes();
    manifest["feature_dim"] = dataset.feature_dim();
    manifest["classes"] = "classes.txt";
    manifest["sequences"] = nlohmann::json::array();
    write_class_map(directory / "classes.txt", dataset.class_names());
    for (const auto& seq : dataset.sequences()) {
        const std::string labels = "groundTruth/" + seq.id() + ".txt";
        const std::string features = "features/" + seq.id() + ".bin";
        write_label_file(directory / labels, seq.frame_labels(), dataset.class_names());
        write_features(directory / features, seq.features());
        manifest["sequences"].push_back({{"id", seq.id()}, {"labels", labels}, {"features", features}});
    }
    const fs::path manifest_path = directory / "manifest.json";
    write_text(manifest_path, manifest.dump(2) + "\n");
    return manifest_path;
}

}  // namespace ltseg::io
