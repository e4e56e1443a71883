// SPDX-License-Identifier: Apache-2.0
#include "supernas/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace supernas {

uint32_t crc32(const unsigned char* data, size_t len) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr uint64_t kMagic = 0x544b434e53414e53ULL;  // "SNANSCKT" tag

class Writer {
  public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(uint8_t((v >> (8 * i)) & 0xff));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(uint8_t((v >> (8 * i)) & 0xff));
    }
    void i32(int32_t v) { u32(uint32_t(v)); }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u32(uint32_t(s.size()));
        for (char c : s) buf_.push_back(uint8_t(c));
    }
    void tensor(const Tensor& t) {
        u32(uint32_t(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) i32(t.dim(i));
        for (int64_t i = 0; i < t.numel(); ++i) f64(t[i]);
    }
    const std::vector<unsigned char>& bytes() const { return buf_; }

  private:
    std::vector<unsigned char> buf_;
};

class Reader {
  public:
    Reader(const unsigned char* p, size_t n) : p_(p), n_(n) {}
    uint8_t u8() { return take(1)[0]; }
    uint32_t u32() {
        const unsigned char* b = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        const unsigned char* b = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
        return v;
    }
    int32_t i32() { return int32_t(u32()); }
    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str() {
        const uint32_t len = u32();
        const unsigned char* b = take(len);
        return std::string(reinterpret_cast<const char*>(b), len);
    }
    Tensor tensor() {
        const uint32_t nd = u32();
        if (nd > 8) throw IoError("checkpoint: implausible tensor rank");
        std::vector<int> shape(nd);
        for (auto& d : shape) d = i32();
        Tensor t(shape);
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = f64();
        return t;
    }

  private:
    const unsigned char* take(size_t k) {
        if (pos_ + k > n_) throw IoError("checkpoint: truncated payload");
        const unsigned char* r = p_ + pos_;
        pos_ += k;
        return r;
    }
    const unsigned char* p_;
    size_t n_;
    size_t pos_ = 0;
};

void write_space(Writer& w, const SearchSpace& sp) {
    w.str(sp.name);
    for (int d : sp.input_shape) w.i32(d);
    w.i32(sp.num_classes);
    w.u8(sp.activation == Activation::prelu ? 1 : 0);
    w.u8(sp.channel_proxy ? 1 : 0);
    w.u32(uint32_t(sp.layers.size()));
    for (const auto& l : sp.layers) {
        w.i32(l.index);
        w.u8(uint8_t(l.role));
        w.i32(l.stride);
        w.u32(uint32_t(l.options.size()));
        for (int o : l.options) w.i32(o);
    }
}

SearchSpace read_space(Reader& r) {
    SearchSpace sp;
    sp.name = r.str();
    for (auto& d : sp.input_shape) d = r.i32();
    sp.num_classes = r.i32();
    sp.activation = r.u8() ? Activation::prelu : Activation::relu;
    sp.channel_proxy = r.u8() != 0;
    const uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        LayerSpec l;
        l.index = r.i32();
        l.role = LayerRole(r.u8());
        l.stride = r.i32();
        const uint32_t k = r.u32();
        l.options.resize(k);
        for (auto& o : l.options) o = r.i32();
        sp.layers.push_back(std::move(l));
    }
    return sp;
}

void write_params(Writer& w, const SupernetParams& p) {
    write_space(w, p.space);
    w.u32(uint32_t(p.stage));
    w.f64(p.bn_eps);
    w.f64(p.bn_momentum);
    for (const auto& layer : p.layers) {
        w.u32(uint32_t(layer.size()));
        for (const auto& g : layer) {
            w.i32(g.first_option);
            w.i32(g.num_options);
            w.i32(g.width);
            w.tensor(g.conv_w.value);
            w.tensor(g.bn_gamma.value);
            w.tensor(g.bn_beta.value);
            w.tensor(g.bn_running_mean);
            w.tensor(g.bn_running_var);
            if (p.space.activation == Activation::prelu) w.tensor(g.prelu_slope.value);
        }
    }
    w.u32(uint32_t(p.blocks.size()));
    for (const auto& b : p.blocks) w.tensor(b.proj_w.value);
    w.tensor(p.fc_w.value);
    w.tensor(p.fc_b.value);
}

SupernetParams read_params(Reader& r) {
    SupernetParams p;
    p.space = read_space(r);
    p.space.validate();
    p.stage = int(r.u32());
    p.bn_eps = r.f64();
    p.bn_momentum = r.f64();
    p.layers.resize(size_t(p.space.num_layers()));
    for (auto& layer : p.layers) {
        const uint32_t n = r.u32();
        for (uint32_t i = 0; i < n; ++i) {
            BranchGroup g;
            g.first_option = r.i32();
            g.num_options = r.i32();
            g.width = r.i32();
            g.conv_w = Parameter(r.tensor());
            g.bn_gamma = Parameter(r.tensor());
            g.bn_beta = Parameter(r.tensor());
            g.bn_running_mean = r.tensor();
            g.bn_running_var = r.tensor();
            if (p.space.activation == Activation::prelu) g.prelu_slope = Parameter(r.tensor());
            layer.push_back(std::move(g));
        }
    }
    const uint32_t nb = r.u32();
    for (uint32_t i = 0; i < nb; ++i) {
        BlockParams b;
        b.proj_w = Parameter(r.tensor());
        p.blocks.push_back(std::move(b));
    }
    p.fc_w = Parameter(r.tensor());
    p.fc_b = Parameter(r.tensor());
    return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    Writer w;
    write_params(w, ckpt.params);
    w.i32(ckpt.trainer.iteration);
    w.u8(ckpt.trainer.warmup_done ? 1 : 0);
    for (uint64_t s : ckpt.trainer.sampler_state.s) w.u64(s);
    w.u8(ckpt.trainer.sampler_state.has_gauss ? 1 : 0);
    w.f64(ckpt.trainer.sampler_state.gauss);
    w.u64(ckpt.trainer.data_epoch);
    w.i32(ckpt.trainer.data_cursor);
    w.u32(uint32_t(ckpt.trainer.velocities.size()));
    for (const auto& v : ckpt.trainer.velocities) w.tensor(v);
    w.u8(ckpt.stage_complete ? 1 : 0);
    w.f64(ckpt.lr_init);
    w.u32(uint32_t(ckpt.lr_history.size()));
    for (const auto& h : ckpt.lr_history) {
        w.i32(h.stage);
        w.f64(h.lr_init);
    }
    w.u64(ckpt.run_seed);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    Writer header;
    header.u64(kMagic);
    header.u32(Checkpoint::kVersion);
    header.u64(uint64_t(w.bytes().size()));
    out.write(reinterpret_cast<const char*>(header.bytes().data()), std::streamsize(header.bytes().size()));
    out.write(reinterpret_cast<const char*>(w.bytes().data()), std::streamsize(w.bytes().size()));
    Writer trailer;
    trailer.u32(crc32(w.bytes().data(), w.bytes().size()));
    out.write(reinterpret_cast<const char*>(trailer.bytes().data()), std::streamsize(trailer.bytes().size()));
    if (!out) throw IoError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("checkpoint not found: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8 + 4 + 8 + 4) throw IoError("checkpoint " + path + ": file too short");
    Reader head(bytes.data(), bytes.size());
    if (head.u64() != kMagic) throw IoError("checkpoint " + path + ": bad magic");
    const uint32_t version = head.u32();
    if (version != Checkpoint::kVersion)
        throw IoError("checkpoint " + path + ": unsupported format version " + std::to_string(version));
    const uint64_t payload_len = head.u64();
    const size_t header_len = 8 + 4 + 8;
    if (bytes.size() != header_len + payload_len + 4)
        throw IoError("checkpoint " + path + ": length mismatch (corrupt or truncated)");
    const unsigned char* payload = bytes.data() + header_len;
    Reader tail(payload + payload_len, 4);
    const uint32_t stored = tail.u32();
    const uint32_t computed = crc32(payload, payload_len);
    if (stored != computed)
        throw IoError("checkpoint " + path + ": checksum mismatch (stored " + std::to_string(stored) +
                      ", computed " + std::to_string(computed) + ")");

    Reader r(payload, payload_len);
    Checkpoint c;
    c.params = read_params(r);
    c.trainer.iteration = r.i32();
    c.trainer.warmup_done = r.u8() != 0;
    for (auto& s : c.trainer.sampler_state.s) s = r.u64();
    c.trainer.sampler_state.has_gauss = r.u8() != 0;
    c.trainer.sampler_state.gauss = r.f64();
    c.trainer.data_epoch = r.u64();
    c.trainer.data_cursor = r.i32();
    const uint32_t nv = r.u32();
    c.trainer.velocities.resize(nv);
    for (auto& v : c.trainer.velocities) v = r.tensor();
    c.stage_complete = r.u8() != 0;
    c.lr_init = r.f64();
    const uint32_t nh = r.u32();
    c.lr_history.resize(nh);
    for (auto& h : c.lr_history) {
        h.stage = r.i32();
        h.lr_init = r.f64();
    }
    c.run_seed = r.u64();
    return c;
}

}  // namespace supernas
