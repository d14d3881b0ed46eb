#include "senslab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include "senslab/rng.hpp"

namespace senslab {

void Dataset::validate() const {
    if (inputs.size() != labels.size())
        throw std::invalid_argument("Dataset: inputs/labels length mismatch");
    if (class_count <= 0)
        throw std::invalid_argument("Dataset: class_count must be positive");
    if (range_hi <= range_lo)
        throw std::invalid_argument("Dataset: empty input range");
    for (int y : labels)
        if (y < 0 || y >= class_count)
            throw std::invalid_argument("Dataset: label out of range");
    for (const Tensor& x : inputs)
        for (double v : x.data())
            if (v < range_lo || v > range_hi)
                throw std::invalid_argument("Dataset: input outside declared range");
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw IdxError(IdxError::Kind::Truncated, "idx: truncated header in " + path);
    return (static_cast<std::uint32_t>(b[0]) << 24) |
           (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) |
           static_cast<std::uint32_t>(b[3]);
}

} // namespace

Dataset load_idx(const std::string& image_path, const std::string& label_path) {
    std::ifstream images(image_path, std::ios::binary);
    if (!images) throw IdxError(IdxError::Kind::Truncated, "idx: cannot open " + image_path);
    std::uint32_t magic = read_be32(images, image_path);
    if (magic != kImageMagic)
        throw IdxError(IdxError::Kind::BadMagic, "idx: bad image magic in " + image_path);
    std::uint32_t n = read_be32(images, image_path);
    std::uint32_t rows = read_be32(images, image_path);
    std::uint32_t cols = read_be32(images, image_path);

    std::ifstream labels(label_path, std::ios::binary);
    if (!labels) throw IdxError(IdxError::Kind::Truncated, "idx: cannot open " + label_path);
    std::uint32_t lmagic = read_be32(labels, label_path);
    if (lmagic != kLabelMagic)
        throw IdxError(IdxError::Kind::BadMagic, "idx: bad label magic in " + label_path);
    std::uint32_t ln = read_be32(labels, label_path);
    if (ln != n)
        throw IdxError(IdxError::Kind::CountMismatch,
                       "idx: image/label count mismatch (" + std::to_string(n) + " vs " +
                           std::to_string(ln) + ")");

    std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    Dataset data;
    data.inputs.reserve(n);
    data.labels.reserve(n);
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n; ++i) {
        images.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!images)
            throw IdxError(IdxError::Kind::Truncated, "idx: truncated image payload in " + image_path);
        std::vector<double> v(pixels);
        for (std::size_t p = 0; p < pixels; ++p) v[p] = buf[p] / 255.0;
        data.inputs.push_back(Tensor({pixels}, std::move(v)));
        char lab;
        labels.read(&lab, 1);
        if (!labels)
            throw IdxError(IdxError::Kind::Truncated, "idx: truncated label payload in " + label_path);
        data.labels.push_back(static_cast<unsigned char>(lab));
    }
    int max_label = 0;
    for (int y : data.labels) max_label = std::max(max_label, y);
    data.class_count = max_label + 1;
    data.range_lo = 0.0;
    data.range_hi = 1.0;
    data.provenance = "idx-file(" + image_path + "," + label_path + ")";
    data.validate();
    return data;
}

Dataset synth_blobs(int class_count, int per_class, int dim, double separation,
                    std::uint64_t seed) {
    if (class_count <= 0 || per_class <= 0 || dim <= 0)
        throw std::invalid_argument("synth_blobs: counts and dim must be positive");
    if (separation < 0.0)
        throw std::invalid_argument("synth_blobs: separation must be non-negative");
    RngStream root(seed);
    RngStream center_rng = root.derive("blobs.centers");

    std::vector<std::vector<double>> centers(class_count, std::vector<double>(dim));
    for (int c = 0; c < class_count; ++c) {
        double norm2 = 0.0;
        for (int d = 0; d < dim; ++d) {
            centers[c][d] = center_rng.normal();
            norm2 += centers[c][d] * centers[c][d];
        }
        double norm = std::sqrt(norm2);
        if (norm == 0.0) norm = 1.0;
        for (int d = 0; d < dim; ++d) centers[c][d] *= separation / norm;
    }

    std::vector<std::vector<double>> raw;
    raw.reserve(static_cast<std::size_t>(class_count) * per_class);
    std::vector<int> labels;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < class_count; ++c) {
        RngStream class_rng = root.derive("blobs.points").derive(static_cast<std::uint64_t>(c));
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> p(dim);
            for (int d = 0; d < dim; ++d) {
                p[d] = centers[c][d] + class_rng.normal();
                lo = std::min(lo, p[d]);
                hi = std::max(hi, p[d]);
            }
            raw.push_back(std::move(p));
            labels.push_back(c);
        }
    }

    double span = hi - lo;
    if (span <= 0.0) span = 1.0;
    Dataset data;
    data.inputs.reserve(raw.size());
    for (auto& p : raw) {
        for (double& v : p) v = (v - lo) / span;
        data.inputs.push_back(Tensor({static_cast<std::size_t>(dim)}, std::move(p)));
    }
    data.labels = std::move(labels);
    data.class_count = class_count;
    data.range_lo = 0.0;
    data.range_hi = 1.0;
    data.provenance = "synthetic(seed=" + std::to_string(seed) +
                      ",classes=" + std::to_string(class_count) +
                      ",per_class=" + std::to_string(per_class) +
                      ",dim=" + std::to_string(dim) +
                      ",separation=" + std::to_string(separation) + ")";
    data.validate();
    return data;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& data, int holdout_per_class) {
    if (holdout_per_class < 0)
        throw std::invalid_argument("split_holdout: negative count");
    Dataset train = data;
    Dataset held = data;
    train.inputs.clear();
    train.labels.clear();
    held.inputs.clear();
    held.labels.clear();
    std::vector<int> taken(data.class_count, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        int y = data.labels[i];
        if (taken[y] < holdout_per_class) {
            held.inputs.push_back(data.inputs[i]);
            held.labels.push_back(y);
            ++taken[y];
        } else {
            train.inputs.push_back(data.inputs[i]);
            train.labels.push_back(y);
        }
    }
    return {std::move(train), std::move(held)};
}

} // namespace senslab
