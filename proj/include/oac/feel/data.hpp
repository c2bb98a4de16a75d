// include/oac/feel/data.hpp - Datasets, IDX (MNIST) ingestion and device partitions.

#pragma once

#include "oac/error.hpp"
#include "oac/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oac::feel {

/// Row-major feature matrix with class labels (classification) or targets (regression).
struct Dataset {
    int features = 0;
    int classes = 0;
    int height = 0; // image geometry when the rows are images, else 0
    int width = 0;
    std::vector<double> x;
    std::vector<int> labels;
    std::vector<double> targets;

    std::size_t size() const noexcept { return features == 0 ? 0 : x.size() / static_cast<std::size_t>(features); }

    std::span<const double> row(std::size_t i) const {
        return {x.data() + i * static_cast<std::size_t>(features), static_cast<std::size_t>(features)};
    }
};

struct BlobSpec {
    int classes = 10;
    int features = 20;
    int train_per_class = 500;
    int test_per_class = 200;
    /// Standard deviation of the class centres; samples have unit noise.
    double separation = 1.0;
};

struct TrainTest {
    Dataset train;
    Dataset test;
};

/// Gaussian blobs: centre_c ~ N(0, separation^2 I), sample = centre + N(0, I).
inline TrainTest make_blobs(const BlobSpec &spec, std::uint64_t seed) {
    oac::detail::require(spec.classes >= 2 && spec.features >= 1, ErrorKind::config, "blobs need >= 2 classes and >= 1 feature");
    oac::detail::require(spec.train_per_class >= 1 && spec.test_per_class >= 1, ErrorKind::config,
                    "blobs need at least one sample per class");
    std::vector<double> centres(static_cast<std::size_t>(spec.classes) * spec.features);
    KeyedStream centre_stream(seed, StreamRole::data, {0});
    for (double &c : centres) {
        c = spec.separation * centre_stream.normal();
    }
    auto fill = [&](int per_class, std::uint64_t split) {
        Dataset d;
        d.features = spec.features;
        d.classes = spec.classes;
        KeyedStream stream(seed, StreamRole::data, {split});
        for (int c = 0; c < spec.classes; ++c) {
            for (int n = 0; n < per_class; ++n) {
                for (int f = 0; f < spec.features; ++f) {
                    d.x.push_back(centres[static_cast<std::size_t>(c) * spec.features + f] + stream.normal());
                }
                d.labels.push_back(c);
            }
        }
        return d;
    };
    return {fill(spec.train_per_class, 1), fill(spec.test_per_class, 2)};
}

/// Per-feature standardization fitted on one dataset and applied to others.
class Standardizer {
public:
    explicit Standardizer(const Dataset &fit) : mean_(static_cast<std::size_t>(fit.features), 0.0), scale_(mean_.size(), 1.0) {
        const auto n = static_cast<double>(fit.size());
        oac::detail::require(n >= 1.0, ErrorKind::domain, "cannot standardize an empty dataset");
        for (std::size_t i = 0; i < fit.size(); ++i) {
            const auto r = fit.row(i);
            for (std::size_t f = 0; f < r.size(); ++f) {
                mean_[f] += r[f];
            }
        }
        for (double &m : mean_) {
            m /= n;
        }
        std::vector<double> var(mean_.size(), 0.0);
        for (std::size_t i = 0; i < fit.size(); ++i) {
            const auto r = fit.row(i);
            for (std::size_t f = 0; f < r.size(); ++f) {
                var[f] += (r[f] - mean_[f]) * (r[f] - mean_[f]);
            }
        }
        for (std::size_t f = 0; f < var.size(); ++f) {
            const double sd = std::sqrt(var[f] / n);
            scale_[f] = sd > 1e-12 ? 1.0 / sd : 1.0; // constant pixels stay centred at zero
        }
    }

    void apply(Dataset &d) const {
        oac::detail::require(static_cast<std::size_t>(d.features) == mean_.size(), ErrorKind::shape,
                        "feature count differs from the fitted data");
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            const std::size_t f = i % mean_.size();
            d.x[i] = (d.x[i] - mean_[f]) * scale_[f];
        }
    }

private:
    std::vector<double> mean_;
    std::vector<double> scale_;
};

// ---------------------------------------------------------------- IDX files

inline constexpr std::uint32_t idx_images_magic = 0x00000803;
inline constexpr std::uint32_t idx_labels_magic = 0x00000801;

namespace idx_detail {

inline std::uint32_t read_be32(std::istream &in, const std::string &path) {
    std::array<unsigned char, 4> b{};
    in.read(reinterpret_cast<char *>(b.data()), 4);
    oac::detail::require(static_cast<bool>(in), ErrorKind::io, path + ": truncated IDX header");
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

inline std::ifstream open_binary(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    oac::detail::require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
    return in;
}

} // namespace idx_detail

struct IdxImages {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;
};

inline IdxImages read_idx_images(const std::filesystem::path &path, std::uint32_t limit = 0) {
    auto in = idx_detail::open_binary(path);
    const std::string name = path.string();
    const auto magic = idx_detail::read_be32(in, name);
    oac::detail::require(magic == idx_images_magic, ErrorKind::io, name + ": not an IDX image file (bad magic)");
    IdxImages img;
    img.count = idx_detail::read_be32(in, name);
    img.rows = idx_detail::read_be32(in, name);
    img.cols = idx_detail::read_be32(in, name);
    if (limit != 0) {
        img.count = std::min(img.count, limit);
    }
    img.pixels.resize(std::size_t{img.count} * img.rows * img.cols);
    in.read(reinterpret_cast<char *>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    oac::detail::require(static_cast<bool>(in), ErrorKind::io, name + ": truncated IDX image payload");
    return img;
}

inline std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path &path, std::uint32_t limit = 0) {
    auto in = idx_detail::open_binary(path);
    const std::string name = path.string();
    const auto magic = idx_detail::read_be32(in, name);
    oac::detail::require(magic == idx_labels_magic, ErrorKind::io, name + ": not an IDX label file (bad magic)");
    auto count = idx_detail::read_be32(in, name);
    if (limit != 0) {
        count = std::min(count, limit);
    }
    std::vector<std::uint8_t> labels(count);
    in.read(reinterpret_cast<char *>(labels.data()), static_cast<std::streamsize>(labels.size()));
    oac::detail::require(static_cast<bool>(in), ErrorKind::io, name + ": truncated IDX label payload");
    return labels;
}

/// Pairs an image file with its label file; pixels are scaled to [0, 1].
inline Dataset load_idx_pair(const std::filesystem::path &images, const std::filesystem::path &labels,
                             std::uint32_t limit = 0) {
    const auto img = read_idx_images(images, limit);
    const auto lab = read_idx_labels(labels, limit);
    oac::detail::require(lab.size() == img.count, ErrorKind::io, "image and label counts differ");
    Dataset d;
    d.features = static_cast<int>(img.rows * img.cols);
    d.classes = 10;
    d.height = static_cast<int>(img.rows);
    d.width = static_cast<int>(img.cols);
    d.x.reserve(img.pixels.size());
    for (auto p : img.pixels) {
        d.x.push_back(p / 255.0);
    }
    for (auto l : lab) {
        oac::detail::require(l < 10, ErrorKind::io, "label outside 0..9");
        d.labels.push_back(l);
    }
    return d;
}

/// Standard file names of the MNIST distribution inside `dir`.
inline TrainTest load_mnist(const std::filesystem::path &dir, std::uint32_t train_limit = 0, std::uint32_t test_limit = 0) {
    return {load_idx_pair(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", train_limit),
            load_idx_pair(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", test_limit)};
}

// ---------------------------------------------------------------- partitions

enum class PartitionMode { homogeneous, heterogeneous_concentric };

inline PartitionMode partition_mode_from_string(std::string_view name) {
    if (name == "homo" || name == "homogeneous") {
        return PartitionMode::homogeneous;
    }
    if (name == "hetero" || name == "heterogeneous" || name == "heterogeneous_concentric") {
        return PartitionMode::heterogeneous_concentric;
    }
    oac::detail::fail(ErrorKind::config, "unknown partition '" + std::string(name) + "' (expected homo or hetero)");
}

constexpr std::string_view to_string(PartitionMode mode) noexcept {
    return mode == PartitionMode::homogeneous ? "homogeneous" : "heterogeneous_concentric";
}

struct PartitionSpec {
    PartitionMode mode = PartitionMode::homogeneous;
    int devices = 25;
};

inline constexpr int concentric_areas = 5;
inline constexpr int devices_per_area = 5;
inline constexpr int labels_per_area = 6;

/// Labels held by devices of area u in {1..5}: {u-1, ..., u+4} mod 10.
inline std::vector<int> area_labels(int area) {
    std::vector<int> labels;
    for (int j = 0; j < labels_per_area; ++j) {
        labels.push_back((area - 1 + j) % 10);
    }
    return labels;
}

/// Sample indices per device. Every label's samples are shuffled and dealt in
/// equal shares to the devices that hold the label (remainders are dropped).
inline std::vector<std::vector<std::size_t>> make_partition(const PartitionSpec &spec, const Dataset &data,
                                                            std::uint64_t seed) {
    oac::detail::require(spec.devices >= 1, ErrorKind::config, "partition needs at least one device");
    oac::detail::require(data.classes >= 1 && data.labels.size() == data.size(), ErrorKind::config,
                         "partitioning needs a labelled dataset");
    std::vector<std::vector<int>> holders(static_cast<std::size_t>(data.classes));
    if (spec.mode == PartitionMode::homogeneous) {
        for (auto &h : holders) {
            h.resize(static_cast<std::size_t>(spec.devices));
            std::iota(h.begin(), h.end(), 0);
        }
    } else {
        oac::detail::require(spec.devices == concentric_areas * devices_per_area, ErrorKind::config,
                             "the concentric partition needs exactly 25 devices (5 areas x 5)");
        oac::detail::require(data.classes == 10, ErrorKind::config, "the concentric partition needs 10 classes");
        for (int k = 0; k < spec.devices; ++k) {
            for (int label : area_labels(k / devices_per_area + 1)) {
                holders[static_cast<std::size_t>(label)].push_back(k);
            }
        }
    }

    std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(data.classes));
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        by_label[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }
    std::vector<std::vector<std::size_t>> parts(static_cast<std::size_t>(spec.devices));
    for (std::size_t c = 0; c < by_label.size(); ++c) {
        const auto &h = holders[c];
        if (h.empty()) {
            continue;
        }
        auto &idx = by_label[c];
        KeyedStream stream(seed, StreamRole::partition, {c});
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::swap(idx[i - 1], idx[static_cast<std::size_t>(stream.below(i))]);
        }
        const std::size_t share = idx.size() / h.size();
        for (std::size_t j = 0; j < h.size(); ++j) {
            auto &part = parts[static_cast<std::size_t>(h[j])];
            part.insert(part.end(), idx.begin() + static_cast<std::ptrdiff_t>(j * share),
                        idx.begin() + static_cast<std::ptrdiff_t>((j + 1) * share));
        }
    }
    for (std::size_t k = 0; k < parts.size(); ++k) {
        oac::detail::require(!parts[k].empty(), ErrorKind::config,
                             "device " + std::to_string(k) + " received no samples; enlarge the dataset");
        std::sort(parts[k].begin(), parts[k].end());
    }
    return parts;
}

} // namespace oac::feel
