#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "senslab/tensor.hpp"

namespace senslab {

/// Labelled inputs plus the declared valid input range attacks must
/// respect. `provenance` records how the data came to be (file paths or
/// synthesis parameters) for run manifests.
struct Dataset {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
    int class_count = 0;
    double range_lo = 0.0;
    double range_hi = 1.0;
    std::string provenance;

    std::size_t size() const { return inputs.size(); }
    void validate() const;
};

/// IDX parse failures, distinguished so callers can report precisely.
class IdxError : public std::runtime_error {
public:
    enum class Kind { BadMagic, Truncated, CountMismatch };
    IdxError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Big-endian IDX image/label pair (magic 0x803 / 0x801). Pixels are
/// unsigned bytes scaled into [0,1]; images are flattened row-major.
Dataset load_idx(const std::string& image_path, const std::string& label_path);

/// Seeded Gaussian blobs: one unit-variance cloud per class centred
/// `separation` away from the origin along a random direction, then the
/// whole cloud mapped into [0,1] by a single global min-max transform
/// (uniform scale + shift, so class geometry is preserved).
Dataset synth_blobs(int class_count, int per_class, int dim, double separation,
                    std::uint64_t seed);

/// Splits off the first `holdout_per_class` points of each class block.
/// Blob datasets are generated class-major, so the split is stratified.
std::pair<Dataset, Dataset> split_holdout(const Dataset& data, int holdout_per_class);

} // namespace senslab
