#include "senslab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace senslab {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'A', 'B', 'N', 'E', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double v) {
    write_u64(out, std::bit_cast<std::uint64_t>(v));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& in) {
    return std::bit_cast<double>(read_u64(in));
}

} // namespace

void save_checkpoint(const Network& net, const std::string& path) {
    net.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const DenseLayer& l : net.layers) {
        write_u64(out, l.in_width());
        write_u64(out, l.out_width());
        write_u32(out, l.activation == Activation::ReLU ? 0u : 1u);
        for (double v : l.weights.data()) write_f64(out, v);
        for (double v : l.bias.data()) write_f64(out, v);
    }
    if (!out) throw std::runtime_error("checkpoint: write failure: " + path);
}

Network load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    std::uint32_t version = read_u32(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t layer_count = read_u32(in);
    Network net;
    for (std::uint32_t li = 0; li < layer_count; ++li) {
        std::size_t in_w = static_cast<std::size_t>(read_u64(in));
        std::size_t out_w = static_cast<std::size_t>(read_u64(in));
        std::uint32_t act = read_u32(in);
        if (act > 1) throw std::runtime_error("checkpoint: bad activation code");
        std::vector<double> w(in_w * out_w), b(out_w);
        for (double& v : w) v = read_f64(in);
        for (double& v : b) v = read_f64(in);
        DenseLayer layer;
        layer.weights = Tensor({in_w, out_w}, std::move(w));
        layer.bias = Tensor({out_w}, std::move(b));
        layer.activation = act == 0 ? Activation::ReLU : Activation::Identity;
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

} // namespace senslab
